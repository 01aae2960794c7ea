#include "replykit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "replykit/error.hpp"
#include "replykit/text.hpp"

namespace replykit::metrics {

TokenSeq tokenize(std::string_view input, std::string_view /*language*/) {
  TokenSeq out;
  std::vector<char32_t> cps;
  // On invalid UTF-8 this keeps the decodable prefix; the corpus stage
  // rejects invalid bodies before they get here.
  text::utf8_decode(input, cps);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.tokens.push_back(current);
      current.clear();
    }
  };
  for (char32_t cp : cps) {
    const char32_t lc = text::to_lower(cp);
    if (text::is_space(lc) || text::is_punct(lc)) {
      flush();
    } else if (text::is_spacefree_script(lc)) {
      flush();
      std::string one;
      text::utf8_append(one, lc);
      out.tokens.push_back(std::move(one));
    } else {
      text::utf8_append(current, lc);
    }
  }
  flush();
  return out;
}

namespace {

// Clipped n-gram overlap between two sequences, as multiset intersection.
struct NgramCounts {
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
};

NgramCounts count_ngrams(const TokenSeq& seq, std::size_t n) {
  NgramCounts out;
  if (n == 0 || seq.size() < n) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += seq.tokens[i + k];
    }
    ++out.counts[key];
    ++out.total;
  }
  return out;
}

std::size_t clipped_overlap(const NgramCounts& a, const NgramCounts& b) {
  std::size_t overlap = 0;
  for (const auto& [gram, c] : a.counts) {
    auto it = b.counts.find(gram);
    if (it != b.counts.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

}  // namespace

double rouge_n_f1(const TokenSeq& candidate, const TokenSeq& reference, std::size_t n) {
  if (n == 0) throw ConfigError("rouge order must be >= 1");
  const NgramCounts cand = count_ngrams(candidate, n);
  const NgramCounts ref = count_ngrams(reference, n);
  if (cand.total == 0 || ref.total == 0) return 0.0;
  const std::size_t overlap = clipped_overlap(cand, ref);
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(cand.total);
  const double recall = static_cast<double>(overlap) / static_cast<double>(ref.total);
  return 2.0 * precision * recall / (precision + recall);
}

RougeScore weighted_rouge(const TokenSeq& candidate, const TokenSeq& reference) {
  RougeScore s;
  s.r1 = rouge_n_f1(candidate, reference, 1);
  s.r2 = rouge_n_f1(candidate, reference, 2);
  s.r3 = rouge_n_f1(candidate, reference, 3);
  s.weighted = s.r1 * kRouge1Weight + s.r2 * kRouge2Weight + s.r3 * kRouge3Weight;
  return s;
}

std::size_t best_of_k_index(std::span<const TokenSeq> candidates, const TokenSeq& reference) {
  if (candidates.empty()) throw ConfigError("best_of_k needs at least one candidate");
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double w = weighted_rouge(candidates[i], reference).weighted;
    if (w > best_score) {
      best_score = w;
      best = i;
    }
  }
  return best;
}

RougeScore best_of_k(std::span<const TokenSeq> candidates, const TokenSeq& reference) {
  return weighted_rouge(candidates[best_of_k_index(candidates, reference)], reference);
}

double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ConfigError("mrr of empty rank list");
  double sum = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw ConfigError("ranks are 1-based");
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

double precision_at_1(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ConfigError("precision_at_1 of empty rank list");
  std::size_t hits = 0;
  for (std::size_t r : ranks) {
    if (r == 0) throw ConfigError("ranks are 1-based");
    if (r == 1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::size_t rank_reference(std::span<const std::pair<std::string, double>> scored,
                           const std::string& reference) {
  std::optional<double> ref_score;
  for (const auto& [cand, score] : scored) {
    if (cand == reference) {
      ref_score = score;
      break;
    }
  }
  if (!ref_score) throw DataError("rank_reference: reference not among candidates");
  std::size_t rank = 1;
  bool self_seen = false;
  for (const auto& [cand, score] : scored) {
    if (!self_seen && cand == reference) {
      self_seen = true;
      continue;
    }
    if (score >= *ref_score) ++rank;  // pessimistic on ties
  }
  return rank;
}

std::optional<double> macro_mrr(const std::map<std::string, std::vector<std::size_t>>& ranks_by_response) {
  if (ranks_by_response.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [response, ranks] : ranks_by_response) {
    sum += mrr(ranks);
  }
  return sum / static_cast<double>(ranks_by_response.size());
}

double dist_n(std::span<const TokenSeq> replies, std::size_t n) {
  if (n == 0) throw ConfigError("dist order must be >= 1");
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t total = 0;
  for (const TokenSeq& reply : replies) {
    const NgramCounts counts = count_ngrams(reply, n);
    total += counts.total;
    for (const auto& [gram, c] : counts.counts) seen[gram] += c;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

double bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
            std::size_t max_n) {
  if (candidates.empty()) throw ConfigError("bleu of empty corpus");
  if (candidates.size() != references.size()) {
    throw ConfigError("bleu: candidate/reference count mismatch");
  }
  if (max_n == 0) throw ConfigError("bleu max_n must be >= 1");

  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  std::vector<std::size_t> matched(max_n, 0);
  std::vector<std::size_t> total(max_n, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const NgramCounts c = count_ngrams(candidates[i], n);
      const NgramCounts r = count_ngrams(references[i], n);
      matched[n - 1] += clipped_overlap(c, r);
      total[n - 1] += c.total;
    }
  }

  double log_prec_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    double num = static_cast<double>(matched[n - 1]);
    double den = static_cast<double>(total[n - 1]);
    if (n >= 2) {  // add-one smoothing on the higher orders
      num += 1.0;
      den += 1.0;
    }
    if (num == 0.0 || den == 0.0) return 0.0;
    log_prec_sum += std::log(num / den);
  }
  const double geo = log_prec_sum / static_cast<double>(max_n);
  double bp = 1.0;
  if (cand_len == 0) return 0.0;
  if (cand_len < ref_len) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  }
  return bp * std::exp(geo);
}

double perplexity(double total_logprob, std::size_t token_count) {
  if (token_count == 0) throw ConfigError("perplexity needs a positive token count");
  return std::exp(-total_logprob / static_cast<double>(token_count));
}

std::string to_flat_record(const MetricReport& report) {
  std::map<std::string, double> kv;
  kv["rouge1"] = report.rouge.r1;
  kv["rouge2"] = report.rouge.r2;
  kv["rouge3"] = report.rouge.r3;
  kv["rouge_weighted"] = report.rouge.weighted;
  kv["dist1"] = report.dist1;
  kv["dist2"] = report.dist2;
  kv["n_examples"] = static_cast<double>(report.n_examples);
  if (report.bleu_score) kv["bleu"] = *report.bleu_score;
  if (report.mrr_score) kv["mrr"] = *report.mrr_score;
  if (report.p_at_1) kv["precision_at_1"] = *report.p_at_1;
  if (report.macro_mrr_score) kv["macro_mrr"] = *report.macro_mrr_score;
  if (report.perplexity_score) kv["perplexity"] = *report.perplexity_score;

  std::string out;
  char line[128];
  for (const auto& [key, value] : kv) {
    std::snprintf(line, sizeof line, "%s %.17g\n", key.c_str(), value);
    out += line;
  }
  return out;
}

}  // namespace replykit::metrics
