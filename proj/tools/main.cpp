// replykit command-line interface. One subcommand per pipeline stage plus
// training, evaluation and serving. Exit codes: 0 success, 1 usage/config
// error, 2 data error, 3 numerical abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "replykit/config.hpp"
#include "replykit/corpus.hpp"
#include "replykit/error.hpp"
#include "replykit/generation.hpp"
#include "replykit/harness.hpp"
#include "replykit/langid.hpp"
#include "replykit/metrics.hpp"
#include "replykit/retrieval.hpp"
#include "replykit/serialize.hpp"
#include "replykit/text.hpp"

namespace fs = std::filesystem;
using namespace replykit;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
  std::string out_dir = ".";

  Config config;

  void load() {
    if (!config_path.empty()) config = Config::parse_file(config_path);
    if (seed_set) config.set("seed", std::to_string(seed));
    config.set("threads", std::to_string(threads));
  }
  std::uint64_t effective_seed() const { return config.get_uint("seed", 0); }
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return in;
}

std::string out_path(const GlobalOptions& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void write_manifest(const std::string& path, const std::string& command,
                    const corpus::PipelineCounters& c) {
  json j;
  j["command"] = command;
  j["counters"]["parsed"] = c.parsed;
  j["counters"]["malformed"] = c.malformed;
  j["counters"]["pairs"] = c.pairs;
  j["counters"]["orphans"] = c.orphans;
  j["counters"]["empty_text_drops"] = c.empty_text_drops;
  j["counters"]["dropped_deleted"] = c.dropped_deleted;
  j["counters"]["dropped_low_score"] = c.dropped_low_score;
  j["counters"]["dropped_toxic"] = c.dropped_toxic;
  j["counters"]["dropped_low_lang_confidence"] = c.dropped_low_lang_confidence;
  j["counters"]["scorer_errors"] = c.scorer_errors;
  j["counters"]["scorer_error_drops"] = c.scorer_error_drops;
  j["counters"]["kept"] = c.kept;
  write_file_atomic(path, j.dump(2) + "\n");
}

// Lexicon stub scorer: 1.0 when any marker substring appears. Real toxicity
// services plug in behind the same corpus::ToxicityScorer signature.
corpus::ToxicityScorer lexicon_scorer(const std::string& path) {
  auto markers = std::make_shared<std::vector<std::string>>();
  std::ifstream in = open_input(path);
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = text::trim(line);
    if (!t.empty()) markers->emplace_back(t);
  }
  return [markers](const std::string& body) -> std::optional<double> {
    for (const std::string& marker : *markers) {
      if (body.find(marker) != std::string::npos) return 1.0;
    }
    return 0.0;
  };
}

// Deterministic stub translator: whitespace tokens mapped through a TSV
// table, unknown tokens pass through unchanged.
corpus::Translator token_map_translator(const std::string& path) {
  auto table = std::make_shared<std::map<std::string, std::string>>();
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("token map: missing tab at line " + std::to_string(line_no));
    }
    (*table)[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return [table](const std::string& body) -> std::optional<std::string> {
    std::string out;
    std::istringstream words(body);
    std::string w;
    while (words >> w) {
      if (!out.empty()) out.push_back(' ');
      auto it = table->find(w);
      out += it != table->end() ? it->second : w;
    }
    return out;
  };
}

int cmd_ingest(const GlobalOptions& g, const std::string& input, const std::string& output) {
  corpus::ParseResult result;
  if (input == "-") {
    result = corpus::parse_dump(std::cin);
  } else {
    std::ifstream in = open_input(input);
    result = corpus::parse_dump(in);
  }
  std::ostringstream out;
  corpus::write_comments(out, result.comments);
  const std::string path = output.empty() ? out_path(g, "comments.ndjson") : output;
  write_file_atomic(path, out.str());

  corpus::PipelineCounters counters;
  counters.parsed = result.comments.size();
  counters.malformed = result.malformed;
  write_manifest(path + ".manifest.json", "ingest", counters);
  std::cerr << "parsed " << result.comments.size() << " comments, " << result.malformed
            << " malformed -> " << path << "\n";
  return 0;
}

int cmd_pairs(const GlobalOptions& g, const std::string& input, const std::string& output) {
  std::ifstream in = open_input(input);
  const corpus::ParseResult parsed = corpus::parse_dump(in);
  const corpus::PairResult result = corpus::build_pairs(parsed.comments);

  std::ostringstream out;
  corpus::write_pair_candidates(out, result.pairs);
  const std::string path = output.empty() ? out_path(g, "pairs_raw.ndjson") : output;
  write_file_atomic(path, out.str());

  corpus::PipelineCounters counters;
  counters.parsed = parsed.comments.size();
  counters.malformed = parsed.malformed;
  counters.pairs = result.pairs.size();
  counters.orphans = result.orphans;
  write_manifest(path + ".manifest.json", "pairs", counters);
  std::cerr << result.pairs.size() << " pairs, " << result.orphans << " orphans -> " << path
            << "\n";
  return 0;
}

struct FilterOptions {
  std::string input;
  std::string output;
  std::string langid_model;
  std::string toxicity_lexicon;
  std::string toxicity_secondary_lexicon;
  bool lenient_scorer_errors = false;
};

int cmd_filter(const GlobalOptions& g, const FilterOptions& opt) {
  std::ifstream in = open_input(opt.input);
  std::vector<corpus::PairCandidate> candidates = corpus::read_pair_candidates(in);

  const langid::LangIdModel model = langid::load(opt.langid_model);
  corpus::PipelineConfig config;
  config.detector = [&model](const std::string& body) { return langid::predict(model, body); };
  config.filter.min_score = static_cast<int>(g.config.get_int("filter.min_score", 1));
  config.filter.lang_confidence_min = g.config.get_double("filter.lang_confidence_min", 0.7);
  config.filter.toxicity_primary_max = g.config.get_double("filter.toxicity_primary_max", 0.9);
  config.filter.toxicity_secondary_max = g.config.get_double("filter.toxicity_secondary_max", 0.5);
  config.filter.drop_on_scorer_error = !opt.lenient_scorer_errors;
  if (!opt.toxicity_lexicon.empty()) {
    config.toxicity_primary = lexicon_scorer(opt.toxicity_lexicon);
  }
  if (!opt.toxicity_secondary_lexicon.empty()) {
    config.toxicity_secondary = lexicon_scorer(opt.toxicity_secondary_lexicon);
  }

  const corpus::PipelineResult result = corpus::filter_pairs(std::move(candidates), config);
  std::ostringstream out;
  corpus::write_pairs(out, result.kept);
  const std::string path = opt.output.empty() ? out_path(g, "pairs.ndjson") : opt.output;
  write_file_atomic(path, out.str());
  write_manifest(path + ".manifest.json", "filter", result.counters);
  std::cerr << "kept " << result.counters.kept << " pairs -> " << path << "\n";
  return 0;
}

int cmd_split(const GlobalOptions& g, const std::string& input, const std::string& prefix,
              double train, double valid, double test, const std::string& language) {
  std::ifstream in = open_input(input);
  std::vector<corpus::MessagePair> pairs = corpus::read_pairs(in);
  if (!language.empty()) {
    std::erase_if(pairs, [&](const corpus::MessagePair& p) { return p.language != language; });
  }

  corpus::SplitSpec spec;
  spec.train = train;
  spec.valid = valid;
  spec.test = test;
  spec.seed = g.effective_seed();
  const corpus::Splits splits = corpus::split(std::move(pairs), spec);

  const std::string base = prefix.empty() ? out_path(g, "split") : prefix;
  const auto dump = [](const std::string& path, const std::vector<corpus::MessagePair>& part) {
    std::ostringstream out;
    corpus::write_pairs(out, part);
    write_file_atomic(path, out.str());
  };
  dump(base + ".train.ndjson", splits.train);
  dump(base + ".valid.ndjson", splits.valid);
  dump(base + ".test.ndjson", splits.test);
  std::cerr << "split " << splits.train.size() << "/" << splits.valid.size() << "/"
            << splits.test.size() << " -> " << base << ".{train,valid,test}.ndjson\n";
  return 0;
}

struct ResponseSetOptions {
  std::string input;
  std::string output;
  std::string language;
  std::size_t min_count = 20;
  std::size_t max_size = 50000;
  std::string augment_token_map;
  std::string target_language;
};

int cmd_response_set(const GlobalOptions& g, const ResponseSetOptions& opt) {
  std::ifstream in = open_input(opt.input);
  const std::vector<corpus::MessagePair> pairs = corpus::read_pairs(in);
  corpus::ResponseSet set =
      corpus::build_response_set(pairs, opt.min_count, opt.max_size, opt.language);
  if (set.entries.empty()) {
    std::cerr << "warning: no reply reached min_count=" << opt.min_count << "\n";
  }
  std::size_t skipped = 0;
  if (!opt.augment_token_map.empty()) {
    const corpus::AugmentResult augmented = corpus::augment_response_set(
        set, token_map_translator(opt.augment_token_map),
        opt.target_language.empty() ? opt.language : opt.target_language);
    set = augmented.set;
    skipped = augmented.skipped;
  }
  std::ostringstream out;
  corpus::write_response_set(out, set);
  const std::string path = opt.output.empty() ? out_path(g, "response_set.tsv") : opt.output;
  write_file_atomic(path, out.str());
  std::cerr << set.entries.size() << " responses";
  if (skipped) std::cerr << " (" << skipped << " translation failures skipped)";
  std::cerr << " -> " << path << "\n";
  return 0;
}

int cmd_train_langid(const GlobalOptions& g, const std::string& input, const std::string& output,
                     std::size_t order, double smoothing) {
  std::ifstream in = open_input(input);
  std::vector<std::pair<std::string, std::string>> labeled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("labeled text: missing tab at line " + std::to_string(line_no));
    }
    labeled.emplace_back(line.substr(tab + 1), line.substr(0, tab));
  }
  langid::TrainOptions options;
  options.ngram_order = order;
  options.smoothing = smoothing;
  const langid::LangIdModel model = langid::train_langid(labeled, options);
  const std::string path = output.empty() ? out_path(g, "langid.model") : output;
  langid::save(model, path);
  std::cerr << "trained on " << labeled.size() << " texts, " << model.languages.size()
            << " languages -> " << path << "\n";
  return 0;
}

retrieval::TrainConfig retrieval_config_from(const Config& cfg) {
  retrieval::TrainConfig out;
  out.batch_size = cfg.get_uint("train.batch_size", 256);
  out.lr = cfg.get_double("train.lr", 1e-3);
  out.epochs = cfg.get_uint("train.epochs", 1);
  out.max_steps = cfg.get_uint("train.max_steps", 0);
  out.warmup_fraction = cfg.get_double("train.warmup_fraction", 0.01);
  out.embedding_dim = cfg.get_uint("train.embedding_dim", 64);
  out.max_vocab = cfg.get_uint("train.max_vocab", 50000);
  out.seed = cfg.get_uint("seed", 0);
  const std::string objective = cfg.get_string("train.objective", "mean_log");
  if (objective == "raw_ratio") {
    out.objective = retrieval::Objective::RawRatio;
  } else if (objective != "mean_log") {
    throw ConfigError("train.objective must be mean_log or raw_ratio");
  }
  for (const std::string& block : cfg.get_list("train.freeze")) {
    if (block == "embeddings_message") out.freeze.embeddings_message = true;
    else if (block == "projection_message") out.freeze.projection_message = true;
    else if (block == "embeddings_reply") out.freeze.embeddings_reply = true;
    else if (block == "projection_reply") out.freeze.projection_reply = true;
    else throw ConfigError("unknown freeze block: " + block);
  }
  return out;
}

void write_loss_curve_csv(const std::vector<double>& curve, const std::string& path) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, curve[i]);
    out += buf;
  }
  write_file_atomic(path, out);
}

int cmd_train_retrieval(const GlobalOptions& g, const std::string& input,
                        const std::string& model_out, const std::string& response_set_path,
                        const std::string& index_out) {
  std::ifstream in = open_input(input);
  const std::vector<corpus::MessagePair> pairs = corpus::read_pairs(in);
  const retrieval::TrainConfig cfg = retrieval_config_from(g.config);
  const retrieval::TrainResult result = retrieval::train(pairs, cfg);

  const std::string path = model_out.empty() ? out_path(g, "retrieval_model.bin") : model_out;
  retrieval::save(result.model, path);
  write_loss_curve_csv(result.loss_curve, path + ".loss.csv");
  std::cerr << "trained " << result.loss_curve.size() << " steps (final loss "
            << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back()) << ") -> " << path
            << "\n";

  if (!response_set_path.empty()) {
    std::ifstream rs_in = open_input(response_set_path);
    const corpus::ResponseSet responses = corpus::read_response_set(rs_in, "");
    const retrieval::ResponseIndex index =
        retrieval::build_index(result.model, responses, g.threads);
    const std::string ipath = index_out.empty() ? out_path(g, "response_index.bin") : index_out;
    retrieval::save_index(index, ipath);
    std::cerr << "indexed " << responses.entries.size() << " responses -> " << ipath << "\n";
  }
  return 0;
}

int cmd_train_generation(const GlobalOptions& g, const std::string& input,
                         const std::string& model_out) {
  std::ifstream in = open_input(input);
  const std::vector<corpus::MessagePair> pairs = corpus::read_pairs(in);

  generation::GenTrainConfig cfg;
  cfg.batch_size = g.config.get_uint("train.batch_size", 16);
  cfg.lr = g.config.get_double("train.lr", 1e-3);
  cfg.epochs = g.config.get_uint("train.epochs", 1);
  cfg.max_steps = g.config.get_uint("train.max_steps", 0);
  cfg.warmup_fraction = g.config.get_double("train.warmup_fraction", 0.01);
  cfg.embedding_dim = g.config.get_uint("train.embedding_dim", 64);
  cfg.max_vocab = g.config.get_uint("train.max_vocab", 20000);
  cfg.max_len = g.config.get_uint("train.max_len", 32);
  cfg.freeze_embeddings = g.config.get_bool("train.freeze_embeddings", false);
  cfg.seed = g.effective_seed();

  const generation::GenTrainResult result = generation::train(pairs, cfg);
  const std::string path = model_out.empty() ? out_path(g, "generation_model.bin") : model_out;
  generation::save(result.model, path);
  write_loss_curve_csv(result.loss_curve, path + ".loss.csv");
  std::cerr << "trained " << result.loss_curve.size() << " steps (final loss "
            << (result.loss_curve.empty() ? 0.0 : result.loss_curve.back()) << ") -> " << path
            << "\n";
  return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& report_out) {
  if (g.config_path.empty()) throw ConfigError("eval requires --config <experiment file>");
  harness::ExperimentConfig cfg = harness::ExperimentConfig::from_config(g.config);
  cfg.threads = g.threads;
  const harness::RunReport report = harness::run_experiment(cfg, g.out_dir);
  const std::string path = report_out.empty() ? out_path(g, "report.json") : report_out;
  harness::write_report(report, path);
  std::cout << metrics::to_flat_record(report.metrics);
  std::cerr << "report -> " << path << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& output) {
  std::vector<harness::RunReport> reports;
  reports.reserve(report_paths.size());
  for (const std::string& path : report_paths) {
    reports.push_back(harness::read_report(path));
  }
  const harness::ComparisonTable table = harness::compare(reports);
  const std::string rendered = harness::render_table(table);
  if (output.empty()) {
    std::cout << rendered;
  } else {
    write_file_atomic(output, rendered);
    std::cerr << "table -> " << output << "\n";
  }
  return 0;
}

struct SuggestOptions {
  std::string model_type;
  std::string model_path;
  std::string index_path;
  std::string message;
  std::size_t k = 3;
  bool interactive = false;
  std::size_t beam_width = 0;  // 0 = max(k, 3)
  std::size_t max_len = 32;
};

int cmd_suggest(const SuggestOptions& opt) {
  harness::Suggester suggester = [&] {
    if (opt.model_type == "retrieval") {
      if (opt.index_path.empty()) throw ConfigError("retrieval suggest needs --index");
      return harness::Suggester::load_retrieval(opt.model_path, opt.index_path);
    }
    if (opt.model_type == "generation") {
      generation::DecodeConfig decode;
      decode.beam_width = opt.beam_width ? opt.beam_width : std::max<std::size_t>(opt.k, 3);
      decode.max_len = opt.max_len;
      return harness::Suggester::load_generation(opt.model_path, decode);
    }
    throw ConfigError("--model-type must be retrieval or generation");
  }();

  const auto print = [&](const std::string& message) {
    const auto suggestions = suggester.suggest(message, opt.k);
    char buf[64];
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu\t%.6f\t", i + 1, suggestions[i].second);
      std::cout << buf << suggestions[i].first << "\n";
    }
  };

  if (opt.interactive) {
    std::string line;
    std::cerr << "message> " << std::flush;
    while (std::getline(std::cin, line)) {
      if (line == "/quit" || line == "/q") break;
      if (!text::trim(line).empty()) print(line);
      std::cerr << "message> " << std::flush;
    }
    return 0;
  }
  if (opt.message.empty()) throw ConfigError("suggest needs --message or --interactive");
  print(opt.message);
  return 0;
}

int cmd_stats(const std::string& input) {
  std::ifstream in = open_input(input);
  const std::vector<corpus::MessagePair> pairs = corpus::read_pairs(in);
  const corpus::CorpusStats stats = corpus::corpus_stats(pairs);
  json j;
  j["examples"] = stats.examples;
  j["tokens"] = stats.tokens;
  j["languages"] = json::object();
  for (const auto& [lang, count] : stats.per_language) {
    j["languages"][lang.empty() ? "und" : lang] = count;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reply-suggestion corpus and model toolkit"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value config file (docs/formats.md)");
  app.add_option("--seed", g.seed, "seed override")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--threads", g.threads, "worker threads for parallel stages");
  app.add_option("--out-dir", g.out_dir, "default output directory");

  std::string in_path, out_file;
  auto* ingest = app.add_subcommand("ingest", "parse a comment dump into validated records");
  ingest->add_option("input", in_path, "dump path or - for stdin")->required();
  ingest->add_option("-o,--output", out_file, "output comments file");

  std::string pairs_in, pairs_out;
  auto* pairs = app.add_subcommand("pairs", "reconstruct message-reply pairs from comments");
  pairs->add_option("input", pairs_in, "comments file (dump format)")->required();
  pairs->add_option("-o,--output", pairs_out, "output raw pairs file");

  FilterOptions fopt;
  auto* filter = app.add_subcommand("filter", "apply deletion/score/toxicity/language filters");
  filter->add_option("input", fopt.input, "raw pairs file")->required();
  filter->add_option("-o,--output", fopt.output, "output pairs file");
  filter->add_option("--langid-model", fopt.langid_model, "language detector table")->required();
  filter->add_option("--toxicity-lexicon", fopt.toxicity_lexicon, "primary marker lexicon");
  filter->add_option("--toxicity-secondary-lexicon", fopt.toxicity_secondary_lexicon,
                     "secondary marker lexicon");
  filter->add_flag("--lenient-scorer-errors", fopt.lenient_scorer_errors,
                   "keep pairs whose toxicity scorer failed");

  std::string split_in, split_prefix;
  double r_train = 0.8, r_valid = 0.1, r_test = 0.1;
  auto* split = app.add_subcommand("split", "deterministic train/valid/test partition");
  split->add_option("input", split_in, "pairs file")->required();
  split->add_option("-o,--output-prefix", split_prefix, "output prefix");
  split->add_option("--train", r_train, "train ratio");
  split->add_option("--valid", r_valid, "valid ratio");
  split->add_option("--test", r_test, "test ratio");
  std::string split_language;
  split->add_option("--language", split_language, "keep only pairs in this language");

  ResponseSetOptions rs;
  auto* response_set = app.add_subcommand("response-set", "frequency-ranked reply inventory");
  response_set->add_option("input", rs.input, "training pairs file")->required();
  response_set->add_option("-o,--output", rs.output, "output tsv");
  response_set->add_option("--language", rs.language, "restrict to a language");
  response_set->add_option("--min-count", rs.min_count, "minimum reply frequency");
  response_set->add_option("--max-size", rs.max_size, "inventory cap");
  response_set->add_option("--augment-token-map", rs.augment_token_map,
                           "stub translator token map (tsv)");
  response_set->add_option("--target-language", rs.target_language, "augmented set language");

  std::string tl_in, tl_out;
  std::size_t tl_order = 3;
  double tl_smoothing = 1.0;
  auto* train_langid = app.add_subcommand("train-langid", "character n-gram language detector");
  train_langid->add_option("input", tl_in, "labeled texts: lang<TAB>text per line")->required();
  train_langid->add_option("-o,--output", tl_out, "output model table");
  train_langid->add_option("--ngram-order", tl_order, "character n-gram order");
  train_langid->add_option("--smoothing", tl_smoothing, "add-k smoothing");

  std::string tr_in, tr_model, tr_rs, tr_index;
  auto* train_retrieval = app.add_subcommand("train-retrieval", "dual-encoder retrieval model");
  train_retrieval->add_option("input", tr_in, "training pairs file")->required();
  train_retrieval->add_option("-o,--output", tr_model, "model output path");
  train_retrieval->add_option("--response-set", tr_rs, "build an index over this inventory");
  train_retrieval->add_option("--index-output", tr_index, "index output path");

  std::string tg_in, tg_model;
  auto* train_generation = app.add_subcommand("train-generation", "seq2seq generation model");
  train_generation->add_option("input", tg_in, "training pairs file")->required();
  train_generation->add_option("-o,--output", tg_model, "model output path");

  std::string eval_report;
  auto* eval = app.add_subcommand("eval", "run one experiment per the config file");
  eval->add_option("-o,--report", eval_report, "report output path");

  std::vector<std::string> cmp_reports;
  std::string cmp_out;
  auto* compare = app.add_subcommand("compare", "align run reports into a settings table");
  compare->add_option("reports", cmp_reports, "report.json paths")->required()->expected(-1);
  compare->add_option("-o,--output", cmp_out, "write the table here instead of stdout");

  SuggestOptions sopt;
  auto* suggest = app.add_subcommand("suggest", "serve suggestions from a trained artifact");
  suggest->add_option("--model-type", sopt.model_type, "retrieval | generation")->required();
  suggest->add_option("--model", sopt.model_path, "model artifact")->required();
  suggest->add_option("--index", sopt.index_path, "response index (retrieval)");
  suggest->add_option("--message", sopt.message, "input message");
  suggest->add_option("-k", sopt.k, "suggestions per message");
  suggest->add_option("--beam-width", sopt.beam_width, "beam width (generation)");
  suggest->add_option("--max-len", sopt.max_len, "decode length cap (generation)");
  suggest->add_flag("--interactive", sopt.interactive, "read messages from stdin");

  std::string stats_in;
  auto* stats = app.add_subcommand("stats", "corpus statistics for a pairs file");
  stats->add_option("input", stats_in, "pairs file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    g.load();
    if (*ingest) return cmd_ingest(g, in_path, out_file);
    if (*pairs) return cmd_pairs(g, pairs_in, pairs_out);
    if (*filter) return cmd_filter(g, fopt);
    if (*split) return cmd_split(g, split_in, split_prefix, r_train, r_valid, r_test, split_language);
    if (*response_set) return cmd_response_set(g, rs);
    if (*train_langid) return cmd_train_langid(g, tl_in, tl_out, tl_order, tl_smoothing);
    if (*train_retrieval) return cmd_train_retrieval(g, tr_in, tr_model, tr_rs, tr_index);
    if (*train_generation) return cmd_train_generation(g, tg_in, tg_model);
    if (*eval) return cmd_eval(g, eval_report);
    if (*compare) return cmd_compare(cmp_reports, cmp_out);
    if (*suggest) return cmd_suggest(sopt);
    if (*stats) return cmd_stats(stats_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
