#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "replykit/config.hpp"
#include "replykit/corpus.hpp"
#include "replykit/generation.hpp"
#include "replykit/metrics.hpp"
#include "replykit/retrieval.hpp"

namespace replykit::harness {

enum class ModelKind { Retrieval, Generation };
enum class Setting { Monolingual, ZeroShot, MT, Multilingual };

const char* model_kind_name(ModelKind kind);
const char* setting_name(Setting setting);
ModelKind parse_model_kind(const std::string& name);
Setting parse_setting(const std::string& name);

struct ProtocolConfig {
  std::size_t k = 3;                 // suggestions per message
  std::size_t mrr_candidates = 100;  // reference + sampled distractors
};

struct ExperimentConfig {
  ModelKind model = ModelKind::Retrieval;
  Setting setting = Setting::Monolingual;
  std::vector<std::string> train_languages;
  std::map<std::string, std::string> train_paths;  // organic data, language -> path
  std::string mt_path;                             // pre-translated pairs (mt setting)
  std::string eval_language;
  std::string test_path;
  std::string response_set_path;  // retrieval only
  ProtocolConfig protocol;
  retrieval::TrainConfig retrieval_train;
  generation::GenTrainConfig generation_train;
  generation::DecodeConfig decode;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
  static ExperimentConfig from_config(const Config& config);
};

struct RunReport {
  std::map<std::string, std::string> config_echo;
  metrics::MetricReport metrics;
  std::map<std::string, std::string> absent_metrics;  // metric -> reason
  std::map<std::string, std::uint64_t> counters;
  std::vector<std::string> file_access;  // every data file opened, sorted
  std::string loss_curve_path;
  std::uint64_t seed = 0;
  // Timing lives outside the canonical report bytes so equal-seed runs stay
  // byte-identical.
  double wall_clock_sec = 0.0;
  double throughput_examples_per_sec = 0.0;
};

// Equalizes per-language contribution: every language supplies exactly
// max-language-size examples per epoch (full copies plus a seeded sample of
// the remainder), merged in one seeded shuffle.
std::vector<corpus::MessagePair> oversample(
    const std::map<std::string, std::vector<corpus::MessagePair>>& datasets, std::uint64_t seed);

// Trains (per setting), evaluates with the k-suggestion best-of protocol and
// writes artifacts under out_dir. Deterministic per seed.
RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir);

std::string canonical_report_json(const RunReport& report);
void write_report(const RunReport& report, const std::string& path);
RunReport read_report(const std::string& path);

struct ComparisonCell {
  double rouge = 0.0;
  double dist1 = 0.0;
  double dist2 = 0.0;
  bool cross_lingual = false;  // eval language not among train languages
  bool best = false;           // best cross-lingual rouge for this language
};

struct ComparisonTable {
  std::vector<std::string> settings;   // column groups, sorted
  std::vector<std::string> languages;  // rows, sorted
  // (language, setting) -> cell
  std::map<std::pair<std::string, std::string>, ComparisonCell> cells;
};

// Reports must share the metric protocol. Flags the best cross-lingual rouge
// per language.
ComparisonTable compare(std::span<const RunReport> reports);
std::string render_table(const ComparisonTable& table);

// Loaded artifact for serving suggestions; wraps either model family.
class Suggester {
 public:
  static Suggester load_retrieval(const std::string& model_path, const std::string& index_path);
  static Suggester load_generation(const std::string& model_path,
                                   const generation::DecodeConfig& decode = {});

  std::vector<std::pair<std::string, double>> suggest(const std::string& message,
                                                      std::size_t k = 3) const;
  ModelKind kind() const { return kind_; }

 private:
  Suggester() = default;
  ModelKind kind_ = ModelKind::Retrieval;
  retrieval::RetrievalModel retrieval_model_;
  retrieval::ResponseIndex index_;
  generation::Seq2SeqModel generation_model_;
  generation::DecodeConfig decode_;
};

}  // namespace replykit::harness
