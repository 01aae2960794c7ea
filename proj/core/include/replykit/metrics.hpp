#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace replykit::metrics {

// Tokenized text. Tokens are lowercased; never empty.
struct TokenSeq {
  std::vector<std::string> tokens;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSeq&) const = default;
};

// Lowercases, then splits on whitespace and punctuation. Characters from
// scripts written without spaces (kana, Han, Thai) become one token each, so
// unsegmented text still produces a usable sequence.
TokenSeq tokenize(std::string_view text, std::string_view language = "");

constexpr double kRouge1Weight = 1.0 / 6.0;
constexpr double kRouge2Weight = 1.0 / 3.0;
constexpr double kRouge3Weight = 1.0 / 2.0;

struct RougeScore {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double weighted = 0.0;  // always r1/6 + r2/3 + r3/2
};

// F1 of clipped n-gram overlap. 0 when either side has fewer than n tokens.
double rouge_n_f1(const TokenSeq& candidate, const TokenSeq& reference, std::size_t n);

RougeScore weighted_rouge(const TokenSeq& candidate, const TokenSeq& reference);

// Score of the candidate with the highest weighted rouge; ties go to the
// lowest index. Throws on an empty candidate list.
RougeScore best_of_k(std::span<const TokenSeq> candidates, const TokenSeq& reference);
std::size_t best_of_k_index(std::span<const TokenSeq> candidates, const TokenSeq& reference);

double mrr(std::span<const std::size_t> ranks);
double precision_at_1(std::span<const std::size_t> ranks);

// 1-based rank of `reference` when candidates are sorted by score descending.
// Ties are pessimistic: the reference ranks below every equal-scored
// distractor. Throws if the reference text is absent.
std::size_t rank_reference(std::span<const std::pair<std::string, double>> scored,
                           const std::string& reference);

// Mean over distinct responses of each response's MRR. Empty input -> nullopt.
std::optional<double> macro_mrr(const std::map<std::string, std::vector<std::size_t>>& ranks_by_response);

// Distinct n-grams / total n-grams, pooled over all replies. 0 when there are
// no n-grams at all.
double dist_n(std::span<const TokenSeq> replies, std::size_t n);

// Corpus BLEU, one reference per candidate. Brevity penalty; add-one
// smoothing on orders >= 2.
double bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
            std::size_t max_n = 4);

// exp(-total_logprob / token_count); token_count must be positive.
double perplexity(double total_logprob, std::size_t token_count);

// Flat evaluation record for one (model, language, setting) run. Metrics that
// do not apply to a model family stay unset.
struct MetricReport {
  RougeScore rouge;
  std::optional<double> bleu_score;
  std::optional<double> mrr_score;
  std::optional<double> p_at_1;
  std::optional<double> macro_mrr_score;
  double dist1 = 0.0;
  double dist2 = 0.0;
  std::optional<double> perplexity_score;
  std::size_t n_examples = 0;
};

// Serialized as sorted "key value" lines, one metric per line (the golden-file
// format). Unset metrics are omitted.
std::string to_flat_record(const MetricReport& report);

}  // namespace replykit::metrics
