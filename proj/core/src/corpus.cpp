#include "replykit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "replykit/error.hpp"
#include "replykit/rng.hpp"
#include "replykit/text.hpp"

namespace replykit::corpus {

namespace {

using nlohmann::json;

// Pushshift-style ids carry a "t1_"/"t3_" type prefix; matching works on the
// bare id.
std::string strip_type_prefix(std::string id) {
  if (id.size() > 3 && id[0] == 't' && id[1] >= '0' && id[1] <= '9' && id[2] == '_') {
    return id.substr(3);
  }
  return id;
}

std::optional<RawComment> record_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  RawComment c;

  auto id_it = j.find("id");
  if (id_it == j.end() || !id_it->is_string()) return std::nullopt;
  c.id = strip_type_prefix(id_it->get<std::string>());
  if (c.id.empty()) return std::nullopt;

  auto body_it = j.find("body");
  if (body_it == j.end() || !body_it->is_string()) return std::nullopt;
  c.body = body_it->get<std::string>();
  if (!text::utf8_valid(c.body)) return std::nullopt;

  auto score_it = j.find("score");
  if (score_it == j.end() || !score_it->is_number_integer()) return std::nullopt;
  c.score = score_it->get<int>();

  auto utc_it = j.find("created_utc");
  if (utc_it == j.end() || !utc_it->is_number_integer()) return std::nullopt;
  c.created_utc = utc_it->get<std::int64_t>();

  auto link_it = j.find("link_id");
  if (link_it == j.end()) link_it = j.find("thread_id");
  if (link_it == j.end() || !link_it->is_string()) return std::nullopt;
  c.thread_id = strip_type_prefix(link_it->get<std::string>());
  if (c.thread_id.empty()) return std::nullopt;

  auto parent_it = j.find("parent_id");
  if (parent_it != j.end() && parent_it->is_string()) {
    std::string p = strip_type_prefix(parent_it->get<std::string>());
    if (!p.empty()) c.parent_id = std::move(p);
  }
  if (c.parent_id && *c.parent_id == c.id) return std::nullopt;
  return c;
}

}  // namespace

ParseResult parse_dump(std::istream& in) {
  if (in.bad() || (in.fail() && !in.eof())) throw DataError("dump stream unreadable");
  ParseResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      ++result.malformed;
      continue;
    }
    std::optional<RawComment> c = record_from_json(j);
    if (!c) {
      ++result.malformed;
      continue;
    }
    result.comments.push_back(std::move(*c));
  }
  if (in.bad()) throw DataError("I/O error while reading dump");
  return result;
}

PairResult build_pairs(std::span<const RawComment> comments) {
  PairResult result;
  // Pass 1: per-thread id index.
  std::unordered_map<std::string, std::unordered_map<std::string, const RawComment*>> threads;
  for (const RawComment& c : comments) {
    threads[c.thread_id].emplace(c.id, &c);
  }
  // Pass 2: emit pairs in input order of the child.
  for (const RawComment& child : comments) {
    if (!child.parent_id || *child.parent_id == child.thread_id) continue;  // root
    const auto& index = threads[child.thread_id];
    auto it = index.find(*child.parent_id);
    if (it == index.end()) {
      ++result.orphans;
      continue;
    }
    const RawComment& parent = *it->second;
    PairCandidate cand;
    cand.pair.message = parent.body;
    cand.pair.reply = child.body;
    cand.pair.source_ids = {parent.id, child.id};
    cand.parent_score = parent.score;
    cand.child_score = child.score;
    result.pairs.push_back(std::move(cand));
  }
  return result;
}

FilterDecision apply_filters(const MessagePair& pair, int parent_score, int child_score,
                             const FilterConfig& config, const ToxicityScorer& primary,
                             const ToxicityScorer& secondary) {
  FilterDecision decision;

  const std::string_view message = text::trim(pair.message);
  const std::string_view reply = text::trim(pair.reply);
  for (const std::string& marker : config.deletion_markers) {
    if (message.starts_with(marker) || reply.starts_with(marker)) {
      decision.reason = DropReason::Deleted;
      return decision;
    }
  }

  if (parent_score < config.min_score || child_score < config.min_score) {
    decision.reason = DropReason::LowScore;
    return decision;
  }

  // Toxicity applies to both sides of the pair; the worse text decides. A
  // definitive toxic score wins over a scorer failure on the other text.
  bool any_error = false;
  auto over_threshold = [&](const ToxicityScorer& scorer, double threshold) {
    if (!scorer) return false;
    for (const std::string* side : {&pair.message, &pair.reply}) {
      const std::optional<double> score = scorer(*side);
      if (!score) {
        any_error = true;
      } else if (*score > threshold) {
        return true;
      }
    }
    return false;
  };
  if (over_threshold(primary, config.toxicity_primary_max) ||
      over_threshold(secondary, config.toxicity_secondary_max)) {
    decision.reason = DropReason::Toxic;
    decision.scorer_error = any_error;
    return decision;
  }
  if (any_error) {
    decision.scorer_error = true;
    decision.keep = !config.drop_on_scorer_error;
    return decision;
  }

  decision.keep = true;
  return decision;
}

std::optional<MessagePair> assign_language(MessagePair pair, const Detector& detector,
                                           double min_confidence) {
  if (!detector) throw ConfigError("assign_language: no detector configured");
  const std::map<std::string, double> scores = detector(pair.message + " " + pair.reply);
  if (scores.empty()) throw ConfigError("language detector has an empty label set");
  auto best = scores.begin();
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  if (best->second < min_confidence) return std::nullopt;
  pair.language = best->first;
  pair.lang_confidence = best->second;
  return pair;
}

void SplitSpec::validate() const {
  for (double r : {train, valid, test}) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("split ratios must be in (0,1)");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

Splits split(std::vector<MessagePair> pairs, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = pairs.size();
  const std::size_t n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.valid));
  const std::size_t n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test));
  const std::size_t n_train = n - n_valid - n_test;  // remainder goes to train

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  Splits out;
  out.train.reserve(n_train);
  out.valid.reserve(n_valid);
  out.test.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    MessagePair& p = pairs[order[i]];
    if (i < n_train) {
      out.train.push_back(std::move(p));
    } else if (i < n_train + n_valid) {
      out.valid.push_back(std::move(p));
    } else {
      out.test.push_back(std::move(p));
    }
  }
  return out;
}

ResponseSet build_response_set(std::span<const MessagePair> train_pairs,
                               std::size_t min_count, std::size_t max_size,
                               const std::string& language) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const MessagePair& pair : train_pairs) {
    if (!language.empty() && pair.language != language) continue;
    const std::string_view trimmed = text::trim(pair.reply);
    if (trimmed.empty()) continue;
    ++counts[std::string(trimmed)];
  }

  ResponseSet set;
  set.language = language;
  set.min_count = min_count;
  set.max_size = max_size;
  for (auto& [reply, count] : counts) {
    if (count >= min_count) set.entries.emplace_back(reply, count);
  }
  std::sort(set.entries.begin(), set.entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (set.entries.size() > max_size) set.entries.resize(max_size);
  return set;
}

AugmentResult augment_response_set(const ResponseSet& source, const Translator& translate,
                                   const std::string& target_language) {
  if (!translate) throw ConfigError("augment_response_set: no translator configured");
  AugmentResult result;
  result.set.language = target_language;
  result.set.min_count = source.min_count;
  result.set.max_size = source.max_size;

  std::unordered_map<std::string, std::size_t> merged;
  for (const auto& [reply, count] : source.entries) {
    const std::optional<std::string> translated = translate(reply);
    if (!translated) {
      ++result.skipped;
      continue;
    }
    merged[*translated] += count;
  }
  for (auto& [reply, count] : merged) {
    result.set.entries.emplace_back(reply, count);
  }
  std::sort(result.set.entries.begin(), result.set.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (result.set.entries.size() > result.set.max_size) {
    result.set.entries.resize(result.set.max_size);
  }
  return result;
}

CorpusStats corpus_stats(std::span<const MessagePair> pairs) {
  CorpusStats stats;
  stats.examples = pairs.size();
  for (const MessagePair& pair : pairs) {
    stats.tokens += text::whitespace_token_count(pair.message);
    stats.tokens += text::whitespace_token_count(pair.reply);
    ++stats.per_language[pair.language];
  }
  return stats;
}

PipelineResult filter_pairs(std::vector<PairCandidate> candidates, const PipelineConfig& config) {
  PipelineResult result;
  for (PairCandidate& cand : candidates) {
    // Retained pairs must have text on both sides.
    if (text::trim(cand.pair.message).empty() || text::trim(cand.pair.reply).empty()) {
      ++result.counters.empty_text_drops;
      continue;
    }
    const FilterDecision d = apply_filters(cand.pair, cand.parent_score, cand.child_score,
                                           config.filter, config.toxicity_primary,
                                           config.toxicity_secondary);
    if (d.scorer_error) ++result.counters.scorer_errors;
    if (!d.keep) {
      if (d.reason) {
        switch (*d.reason) {
          case DropReason::Deleted: ++result.counters.dropped_deleted; break;
          case DropReason::LowScore: ++result.counters.dropped_low_score; break;
          case DropReason::Toxic: ++result.counters.dropped_toxic; break;
          case DropReason::LowLangConfidence: ++result.counters.dropped_low_lang_confidence; break;
        }
      } else {
        ++result.counters.scorer_error_drops;
      }
      continue;
    }
    std::optional<MessagePair> tagged =
        assign_language(std::move(cand.pair), config.detector, config.filter.lang_confidence_min);
    if (!tagged) {
      ++result.counters.dropped_low_lang_confidence;
      continue;
    }
    result.kept.push_back(std::move(*tagged));
  }
  result.counters.kept = result.kept.size();
  return result;
}

PipelineResult run_pipeline(std::istream& dump, const PipelineConfig& config) {
  ParseResult parsed = parse_dump(dump);
  PairResult paired = build_pairs(parsed.comments);
  const std::size_t n_pairs = paired.pairs.size();
  PipelineResult result = filter_pairs(std::move(paired.pairs), config);
  result.counters.parsed = parsed.comments.size();
  result.counters.malformed = parsed.malformed;
  result.counters.pairs = n_pairs;
  result.counters.orphans = paired.orphans;
  return result;
}

// --- IO ---

void write_pairs(std::ostream& out, std::span<const MessagePair> pairs) {
  for (const MessagePair& pair : pairs) {
    json j;
    j["message"] = pair.message;
    j["reply"] = pair.reply;
    j["lang"] = pair.language;
    j["confidence"] = pair.lang_confidence;
    out << j.dump() << '\n';
  }
}

std::vector<MessagePair> read_pairs(std::istream& in) {
  std::vector<MessagePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("message") || !j.contains("reply")) {
      throw DataError("bad pair record at line " + std::to_string(line_no));
    }
    MessagePair pair;
    pair.message = j["message"].get<std::string>();
    pair.reply = j["reply"].get<std::string>();
    pair.language = j.value("lang", std::string());
    pair.lang_confidence = j.value("confidence", 0.0);
    pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw DataError("I/O error while reading pairs");
  return pairs;
}

void write_pair_candidates(std::ostream& out, std::span<const PairCandidate> pairs) {
  for (const PairCandidate& cand : pairs) {
    json j;
    j["message"] = cand.pair.message;
    j["reply"] = cand.pair.reply;
    j["parent_id"] = cand.pair.source_ids.first;
    j["child_id"] = cand.pair.source_ids.second;
    j["parent_score"] = cand.parent_score;
    j["child_score"] = cand.child_score;
    out << j.dump() << '\n';
  }
}

std::vector<PairCandidate> read_pair_candidates(std::istream& in) {
  std::vector<PairCandidate> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("message") || !j.contains("reply") ||
        !j.contains("parent_score") || !j.contains("child_score")) {
      throw DataError("bad pair-candidate record at line " + std::to_string(line_no));
    }
    PairCandidate cand;
    cand.pair.message = j["message"].get<std::string>();
    cand.pair.reply = j["reply"].get<std::string>();
    cand.pair.source_ids = {j.value("parent_id", std::string()), j.value("child_id", std::string())};
    cand.parent_score = j["parent_score"].get<int>();
    cand.child_score = j["child_score"].get<int>();
    pairs.push_back(std::move(cand));
  }
  if (in.bad()) throw DataError("I/O error while reading pair candidates");
  return pairs;
}

void write_comments(std::ostream& out, std::span<const RawComment> comments) {
  for (const RawComment& c : comments) {
    json j;
    j["id"] = c.id;
    if (c.parent_id) j["parent_id"] = *c.parent_id;
    j["body"] = c.body;
    j["score"] = c.score;
    j["created_utc"] = c.created_utc;
    j["link_id"] = c.thread_id;
    out << j.dump() << '\n';
  }
}

namespace {

std::string escape_tsv(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_tsv(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default:
        out.push_back('\\');
        out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

void write_response_set(std::ostream& out, const ResponseSet& set) {
  for (const auto& [reply, count] : set.entries) {
    out << escape_tsv(reply) << '\t' << count << '\n';
  }
}

ResponseSet read_response_set(std::istream& in, const std::string& language) {
  ResponseSet set;
  set.language = language;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw DataError("response set: missing tab at line " + std::to_string(line_no));
    }
    const std::string text_part = unescape_tsv(std::string_view(line).substr(0, tab));
    std::size_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("response set: bad count at line " + std::to_string(line_no));
    }
    set.entries.emplace_back(text_part, count);
  }
  if (in.bad()) throw DataError("I/O error while reading response set");
  return set;
}

const char* drop_reason_name(DropReason reason) {
  switch (reason) {
    case DropReason::Deleted: return "deleted";
    case DropReason::LowScore: return "low_score";
    case DropReason::Toxic: return "toxic";
    case DropReason::LowLangConfidence: return "low_lang_confidence";
  }
  return "unknown";
}

}  // namespace replykit::corpus
