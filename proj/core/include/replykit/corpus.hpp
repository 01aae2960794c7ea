#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace replykit::corpus {

// One record of a newline-delimited comment dump.
struct RawComment {
  std::string id;
  std::optional<std::string> parent_id;
  std::string body;
  int score = 0;
  std::int64_t created_utc = 0;
  std::string thread_id;
};

// One (message, reply) training example. Language stays empty until
// assign_language runs.
struct MessagePair {
  std::string message;
  std::string reply;
  std::string language;
  double lang_confidence = 0.0;
  std::pair<std::string, std::string> source_ids;  // (parent id, child id)
};

// Pair plus the comment scores the filters need.
struct PairCandidate {
  MessagePair pair;
  int parent_score = 0;
  int child_score = 0;
};

struct FilterConfig {
  std::vector<std::string> deletion_markers{"[removed]", "[deleted]"};
  int min_score = 1;
  double lang_confidence_min = 0.7;
  double toxicity_primary_max = 0.9;
  double toxicity_secondary_max = 0.5;
  // Strict mode drops a pair whose toxicity scorer failed; lenient keeps it.
  bool drop_on_scorer_error = true;
};

enum class DropReason { Deleted, LowScore, Toxic, LowLangConfidence };

struct FilterDecision {
  bool keep = false;
  std::optional<DropReason> reason;
  bool scorer_error = false;
};

// Pluggable scorers. Toxicity maps text -> [0,1]; nullopt signals scorer
// failure. The detector returns per-language scores summing to <= 1.
using ToxicityScorer = std::function<std::optional<double>(const std::string&)>;
using Detector = std::function<std::map<std::string, double>(const std::string&)>;
using Translator = std::function<std::optional<std::string>(const std::string&)>;

struct ParseResult {
  std::vector<RawComment> comments;
  std::size_t malformed = 0;
};

// Reads newline-delimited records (one object per line; unknown fields are
// ignored). Malformed lines are counted and skipped, never fatal. Throws
// DataError only if the stream itself is unreadable.
ParseResult parse_dump(std::istream& in);

struct PairResult {
  std::vector<PairCandidate> pairs;
  std::size_t orphans = 0;  // children whose parent never resolved
};

// Two passes per thread: index comments by id, then emit one pair per child
// whose parent resolves within the same thread. Root comments (no parent, or
// parent == thread id) produce no pair and are not orphans.
PairResult build_pairs(std::span<const RawComment> comments);

FilterDecision apply_filters(const MessagePair& pair, int parent_score, int child_score,
                             const FilterConfig& config,
                             const ToxicityScorer& primary = nullptr,
                             const ToxicityScorer& secondary = nullptr);

// Runs the detector on "message reply"; drops when the best score is below
// min_confidence, otherwise fills in (language, confidence).
std::optional<MessagePair> assign_language(MessagePair pair, const Detector& detector,
                                           double min_confidence);

struct SplitSpec {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // ratios in (0,1), summing to 1 within 1e-9
};

struct Splits {
  std::vector<MessagePair> train;
  std::vector<MessagePair> valid;
  std::vector<MessagePair> test;
};

// Exact partition: valid and test get floor(n * ratio) items, the remainder
// goes to train. Deterministic given the seed.
Splits split(std::vector<MessagePair> pairs, const SplitSpec& spec);

// Frequency-ranked reply inventory. Entries are (reply text, count), sorted
// by count descending with ties broken lexicographically; no duplicates.
struct ResponseSet {
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::string language;
  std::size_t max_size = 50000;
  std::size_t min_count = 20;
};

// Counts trimmed reply surface forms over training pairs of the given
// language (empty language matches everything). An empty result is valid.
ResponseSet build_response_set(std::span<const MessagePair> train_pairs,
                               std::size_t min_count, std::size_t max_size,
                               const std::string& language);

struct AugmentResult {
  ResponseSet set;
  std::size_t skipped = 0;  // entries the translator failed on
};

// Translates every entry; identical translations merge with summed counts,
// so the result may be smaller than the source.
AugmentResult augment_response_set(const ResponseSet& source, const Translator& translate,
                                   const std::string& target_language);

struct CorpusStats {
  std::size_t examples = 0;
  std::size_t tokens = 0;  // whitespace tokens over message + reply
  std::map<std::string, std::size_t> per_language;
};

CorpusStats corpus_stats(std::span<const MessagePair> pairs);

// Full pipeline counters, emitted in the run manifest.
struct PipelineCounters {
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t pairs = 0;
  std::size_t orphans = 0;
  std::size_t empty_text_drops = 0;  // a side trimmed to nothing
  std::size_t dropped_deleted = 0;
  std::size_t dropped_low_score = 0;
  std::size_t dropped_toxic = 0;
  std::size_t dropped_low_lang_confidence = 0;
  std::size_t scorer_errors = 0;
  std::size_t scorer_error_drops = 0;
  std::size_t kept = 0;
};

struct PipelineConfig {
  FilterConfig filter;
  Detector detector;  // required for language assignment
  ToxicityScorer toxicity_primary;    // optional
  ToxicityScorer toxicity_secondary;  // optional
};

struct PipelineResult {
  std::vector<MessagePair> kept;
  PipelineCounters counters;
};

// Filter + language stages over already-built pair candidates (the staged CLI
// path). Parse/pair counters stay zero.
PipelineResult filter_pairs(std::vector<PairCandidate> candidates, const PipelineConfig& config);

// parse -> pairs -> filters -> language, in one deterministic pass.
PipelineResult run_pipeline(std::istream& dump, const PipelineConfig& config);

// --- file formats (see docs/formats.md) ---

// Final pair records: {"message":..., "reply":..., "lang":..., "confidence":...}
void write_pairs(std::ostream& out, std::span<const MessagePair> pairs);
std::vector<MessagePair> read_pairs(std::istream& in);

// Intermediate (pre-filter) pair records, carrying scores and source ids.
void write_pair_candidates(std::ostream& out, std::span<const PairCandidate> pairs);
std::vector<PairCandidate> read_pair_candidates(std::istream& in);

void write_comments(std::ostream& out, std::span<const RawComment> comments);

// Response set: "text<TAB>count" per line, UTF-8, sorted as specified.
// Tab/newline/backslash inside the text are backslash-escaped.
void write_response_set(std::ostream& out, const ResponseSet& set);
ResponseSet read_response_set(std::istream& in, const std::string& language);

const char* drop_reason_name(DropReason reason);

}  // namespace replykit::corpus
