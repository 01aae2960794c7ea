#include "replykit/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "replykit/error.hpp"
#include "replykit/parallel.hpp"
#include "replykit/rng.hpp"
#include "replykit/serialize.hpp"
#include "replykit/text.hpp"

namespace replykit::harness {

using nlohmann::json;

const char* model_kind_name(ModelKind kind) {
  return kind == ModelKind::Retrieval ? "retrieval" : "generation";
}

const char* setting_name(Setting setting) {
  switch (setting) {
    case Setting::Monolingual: return "monolingual";
    case Setting::ZeroShot: return "zero_shot";
    case Setting::MT: return "mt";
    case Setting::Multilingual: return "multilingual";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "retrieval") return ModelKind::Retrieval;
  if (name == "generation") return ModelKind::Generation;
  throw ConfigError("unknown model kind: " + name);
}

Setting parse_setting(const std::string& name) {
  if (name == "monolingual") return Setting::Monolingual;
  if (name == "zero_shot") return Setting::ZeroShot;
  if (name == "mt") return Setting::MT;
  if (name == "multilingual") return Setting::Multilingual;
  throw ConfigError("unknown setting: " + name);
}

void ExperimentConfig::validate() const {
  if (eval_language.empty()) throw ConfigError("eval_language is required");
  if (test_path.empty()) throw ConfigError("data.test is required");
  if (protocol.k == 0) throw ConfigError("protocol.k must be >= 1");
  if (protocol.mrr_candidates < 2) throw ConfigError("protocol.mrr_candidates must be >= 2");

  switch (setting) {
    case Setting::Monolingual:
      if (train_languages != std::vector<std::string>{eval_language}) {
        throw ConfigError("monolingual setting trains on the eval language only");
      }
      break;
    case Setting::ZeroShot:
      if (train_languages != std::vector<std::string>{"en"}) {
        throw ConfigError("zero_shot setting trains on {en}");
      }
      break;
    case Setting::MT:
      if (mt_path.empty()) throw ConfigError("mt setting requires data.mt");
      if (train_languages != std::vector<std::string>{eval_language}) {
        throw ConfigError("mt setting trains on translated data in the eval language");
      }
      break;
    case Setting::Multilingual:
      if (train_languages.size() < 2) {
        throw ConfigError("multilingual setting needs >= 2 train languages");
      }
      break;
  }
  if (setting != Setting::MT) {
    for (const std::string& lang : train_languages) {
      if (!train_paths.count(lang)) {
        throw ConfigError("missing data.train." + lang);
      }
    }
  }
  if (model == ModelKind::Retrieval && response_set_path.empty()) {
    throw ConfigError("retrieval evaluation requires data.response_set");
  }
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  ExperimentConfig out;
  out.model = parse_model_kind(cfg.get_string("model"));
  out.setting = parse_setting(cfg.get_string("setting"));
  out.eval_language = cfg.get_string("eval_language");
  out.train_languages = cfg.get_list("train_languages");
  if (out.train_languages.empty()) out.train_languages = {out.eval_language};
  out.train_paths = cfg.with_prefix("data.train");
  out.mt_path = cfg.get_string("data.mt", "");
  out.test_path = cfg.get_string("data.test");
  out.response_set_path = cfg.get_string("data.response_set", "");
  out.protocol.k = cfg.get_uint("protocol.k", 3);
  out.protocol.mrr_candidates = cfg.get_uint("protocol.mrr_candidates", 100);
  out.seed = cfg.get_uint("seed", 0);
  out.threads = static_cast<unsigned>(cfg.get_uint("threads", 1));

  out.retrieval_train.batch_size = cfg.get_uint("train.batch_size", 64);
  out.retrieval_train.lr = cfg.get_double("train.lr", 1e-3);
  out.retrieval_train.epochs = cfg.get_uint("train.epochs", 1);
  out.retrieval_train.max_steps = cfg.get_uint("train.max_steps", 0);
  out.retrieval_train.warmup_fraction = cfg.get_double("train.warmup_fraction", 0.01);
  out.retrieval_train.embedding_dim = cfg.get_uint("train.embedding_dim", 64);
  out.retrieval_train.max_vocab = cfg.get_uint("train.max_vocab", 50000);
  out.retrieval_train.seed = out.seed;
  const std::string objective = cfg.get_string("train.objective", "mean_log");
  if (objective == "mean_log") {
    out.retrieval_train.objective = retrieval::Objective::MeanLog;
  } else if (objective == "raw_ratio") {
    out.retrieval_train.objective = retrieval::Objective::RawRatio;
  } else {
    throw ConfigError("train.objective must be mean_log or raw_ratio");
  }
  for (const std::string& block : cfg.get_list("train.freeze")) {
    if (block == "embeddings_message") out.retrieval_train.freeze.embeddings_message = true;
    else if (block == "projection_message") out.retrieval_train.freeze.projection_message = true;
    else if (block == "embeddings_reply") out.retrieval_train.freeze.embeddings_reply = true;
    else if (block == "projection_reply") out.retrieval_train.freeze.projection_reply = true;
    else throw ConfigError("unknown freeze block: " + block);
  }

  out.generation_train.batch_size = cfg.get_uint("train.batch_size", 16);
  out.generation_train.lr = cfg.get_double("train.lr", 1e-3);
  out.generation_train.epochs = cfg.get_uint("train.epochs", 1);
  out.generation_train.max_steps = cfg.get_uint("train.max_steps", 0);
  out.generation_train.warmup_fraction = cfg.get_double("train.warmup_fraction", 0.01);
  out.generation_train.embedding_dim = cfg.get_uint("train.embedding_dim", 64);
  out.generation_train.max_vocab = cfg.get_uint("train.max_vocab", 20000);
  out.generation_train.max_len = cfg.get_uint("train.max_len", 32);
  out.generation_train.freeze_embeddings = cfg.get_bool("train.freeze_embeddings", false);
  out.generation_train.seed = out.seed;

  out.decode.beam_width = cfg.get_uint("gen.beam_width", 3);
  out.decode.max_len = cfg.get_uint("gen.max_len", 32);
  out.decode.length_norm_alpha = cfg.get_double("gen.length_norm_alpha", 0.0);

  out.validate();
  return out;
}

std::vector<corpus::MessagePair> oversample(
    const std::map<std::string, std::vector<corpus::MessagePair>>& datasets, std::uint64_t seed) {
  if (datasets.size() < 2) throw ConfigError("oversample needs >= 2 languages");
  std::size_t max_size = 0;
  for (const auto& [lang, pairs] : datasets) {
    if (pairs.empty()) throw ConfigError("oversample: language '" + lang + "' has no examples");
    max_size = std::max(max_size, pairs.size());
  }

  Rng rng(seed);
  std::vector<corpus::MessagePair> merged;
  merged.reserve(max_size * datasets.size());
  for (const auto& [lang, pairs] : datasets) {  // std::map: language order is fixed
    const std::size_t copies = max_size / pairs.size();
    const std::size_t remainder = max_size % pairs.size();
    for (std::size_t c = 0; c < copies; ++c) {
      merged.insert(merged.end(), pairs.begin(), pairs.end());
    }
    for (std::size_t idx : rng.sample_without_replacement(pairs.size(), remainder)) {
      merged.push_back(pairs[idx]);
    }
  }
  rng.shuffle(merged);
  return merged;
}

namespace {

std::vector<corpus::MessagePair> read_pairs_recorded(const std::string& path,
                                                     std::set<std::string>& file_access) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pairs file: " + path);
  file_access.insert(path);
  return corpus::read_pairs(in);
}

corpus::ResponseSet read_response_set_recorded(const std::string& path, const std::string& language,
                                               std::set<std::string>& file_access) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open response set: " + path);
  file_access.insert(path);
  return corpus::read_response_set(in, language);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_loss_curve(const std::vector<double>& curve, const std::string& path) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += std::to_string(i);
    out.push_back(',');
    out += format_double(curve[i]);
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

struct EvalAccumulator {
  double r1_sum = 0.0, r2_sum = 0.0, r3_sum = 0.0;
  std::vector<metrics::TokenSeq> pooled_suggestions;
  std::vector<metrics::TokenSeq> best_candidates;
  std::vector<metrics::TokenSeq> references;
  std::size_t n = 0;

  void add_example(std::span<const metrics::TokenSeq> candidates,
                   const metrics::TokenSeq& reference) {
    const std::size_t best = metrics::best_of_k_index(candidates, reference);
    const metrics::RougeScore score = metrics::weighted_rouge(candidates[best], reference);
    r1_sum += score.r1;
    r2_sum += score.r2;
    r3_sum += score.r3;
    best_candidates.push_back(candidates[best]);
    references.push_back(reference);
    for (const metrics::TokenSeq& cand : candidates) pooled_suggestions.push_back(cand);
    ++n;
  }

  void finish(metrics::MetricReport& report) const {
    report.n_examples = n;
    if (n > 0) {
      report.rouge.r1 = r1_sum / static_cast<double>(n);
      report.rouge.r2 = r2_sum / static_cast<double>(n);
      report.rouge.r3 = r3_sum / static_cast<double>(n);
      report.rouge.weighted = report.rouge.r1 * metrics::kRouge1Weight +
                              report.rouge.r2 * metrics::kRouge2Weight +
                              report.rouge.r3 * metrics::kRouge3Weight;
      report.bleu_score = metrics::bleu(best_candidates, references);
    }
    report.dist1 = metrics::dist_n(pooled_suggestions, 1);
    report.dist2 = metrics::dist_n(pooled_suggestions, 2);
  }
};

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);

  RunReport report;
  report.seed = config.seed;
  std::set<std::string> file_access;

  // Training data per setting. Only the files a setting is allowed to see
  // are ever opened; the recorded access list proves it.
  std::vector<corpus::MessagePair> train_pairs;
  switch (config.setting) {
    case Setting::Monolingual:
      train_pairs = read_pairs_recorded(config.train_paths.at(config.eval_language), file_access);
      break;
    case Setting::ZeroShot:
      train_pairs = read_pairs_recorded(config.train_paths.at("en"), file_access);
      break;
    case Setting::MT:
      train_pairs = read_pairs_recorded(config.mt_path, file_access);
      break;
    case Setting::Multilingual: {
      std::map<std::string, std::vector<corpus::MessagePair>> datasets;
      for (const std::string& lang : config.train_languages) {
        datasets[lang] = read_pairs_recorded(config.train_paths.at(lang), file_access);
      }
      train_pairs = oversample(datasets, config.seed);
      break;
    }
  }
  report.counters["train_examples"] = train_pairs.size();

  const std::vector<corpus::MessagePair> test_pairs =
      read_pairs_recorded(config.test_path, file_access);
  report.counters["test_examples"] = test_pairs.size();

  metrics::MetricReport& mr = report.metrics;
  EvalAccumulator acc;

  if (config.model == ModelKind::Retrieval) {
    retrieval::TrainResult trained = retrieval::train(train_pairs, config.retrieval_train);
    retrieval::save(trained.model, out_dir + "/retrieval_model.bin");
    write_loss_curve(trained.loss_curve, out_dir + "/loss_curve.csv");
    report.loss_curve_path = "loss_curve.csv";

    const corpus::ResponseSet responses =
        read_response_set_recorded(config.response_set_path, config.eval_language, file_access);
    if (responses.entries.empty()) {
      throw DataError("response set is empty: " + config.response_set_path);
    }
    report.counters["response_set_size"] = responses.entries.size();
    const retrieval::ResponseIndex index =
        retrieval::build_index(trained.model, responses, config.threads);
    retrieval::save_index(index, out_dir + "/response_index.bin");

    std::set<std::string> response_texts;
    for (const auto& [reply, count] : responses.entries) response_texts.insert(reply);

    // Distractor rows are drawn sequentially in test order from one RNG; the
    // per-example scoring then parallelizes into disjoint slots, so threaded
    // runs reproduce the serial results exactly.
    Rng mrr_rng(config.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    std::vector<std::vector<std::size_t>> distractor_rows(test_pairs.size());
    for (std::size_t e = 0; e < test_pairs.size(); ++e) {
      const std::size_t want = config.protocol.mrr_candidates - 1;
      distractor_rows[e] = mrr_rng.sample_without_replacement(
          responses.entries.size(), std::min(want + 1, responses.entries.size()));
    }

    struct Slot {
      std::vector<metrics::TokenSeq> candidates;
      metrics::TokenSeq reference_tokens;
      std::size_t rank = 0;
      std::string reference;
    };
    std::vector<Slot> slots(test_pairs.size());
    parallel_for(test_pairs.size(), config.threads, [&](std::size_t e) {
      Slot& slot = slots[e];
      const metrics::TokenSeq msg = metrics::tokenize(test_pairs[e].message);
      slot.reference_tokens = metrics::tokenize(test_pairs[e].reply);
      for (const auto& [reply, score] : retrieval::top_k(trained.model, index, msg, config.protocol.k)) {
        slot.candidates.push_back(metrics::tokenize(reply));
      }

      slot.reference = std::string(text::trim(test_pairs[e].reply));
      const std::vector<double> x = retrieval::encode(trained.model, retrieval::Side::Message, msg);
      const std::vector<double> ref_vec =
          retrieval::encode(trained.model, retrieval::Side::Reply, slot.reference_tokens);
      std::vector<std::pair<std::string, double>> scored;
      scored.reserve(config.protocol.mrr_candidates);
      scored.emplace_back(slot.reference, dot(x, ref_vec));
      const std::size_t want = config.protocol.mrr_candidates - 1;
      std::size_t taken = 0;
      for (std::size_t row : distractor_rows[e]) {
        if (taken == want) break;
        if (responses.entries[row].first == slot.reference) continue;
        scored.emplace_back(responses.entries[row].first, dot(x, index.row(row)));
        ++taken;
      }
      slot.rank = metrics::rank_reference(scored, slot.reference);
    });

    std::vector<std::size_t> ranks;
    std::map<std::string, std::vector<std::size_t>> macro_ranks;
    for (Slot& slot : slots) {
      acc.add_example(slot.candidates, slot.reference_tokens);
      ranks.push_back(slot.rank);
      if (response_texts.count(slot.reference)) macro_ranks[slot.reference].push_back(slot.rank);
    }
    if (!ranks.empty()) {
      mr.mrr_score = metrics::mrr(ranks);
      mr.p_at_1 = metrics::precision_at_1(ranks);
    } else {
      report.absent_metrics["mrr"] = "empty test set";
      report.absent_metrics["precision_at_1"] = "empty test set";
    }
    report.counters["mrr_examples"] = ranks.size();
    report.counters["macro_mrr_responses"] = macro_ranks.size();
    mr.macro_mrr_score = metrics::macro_mrr(macro_ranks);
    if (!mr.macro_mrr_score) {
      report.absent_metrics["macro_mrr"] = "no test reference appears in the response set";
    }
    report.absent_metrics["perplexity"] = "not defined for the retrieval model";
  } else {
    generation::GenTrainResult trained = generation::train(train_pairs, config.generation_train);
    generation::save(trained.model, out_dir + "/generation_model.bin");
    write_loss_curve(trained.loss_curve, out_dir + "/loss_curve.csv");
    report.loss_curve_path = "loss_curve.csv";

    generation::DecodeConfig decode = config.decode;
    if (decode.beam_width < config.protocol.k) decode.beam_width = config.protocol.k;

    // Decoding per message is independent; slots keep the reduction in test
    // order so threaded runs match serial ones.
    struct Slot {
      std::vector<metrics::TokenSeq> candidates;
      metrics::TokenSeq reference_tokens;
      std::uint64_t empty = 0;
      double logprob = 0.0;
      std::size_t tokens = 0;
    };
    std::vector<Slot> slots(test_pairs.size());
    parallel_for(test_pairs.size(), config.threads, [&](std::size_t e) {
      Slot& slot = slots[e];
      const metrics::TokenSeq msg = metrics::tokenize(test_pairs[e].message);
      slot.reference_tokens = metrics::tokenize(test_pairs[e].reply);
      const std::vector<generation::Hypothesis> hyps =
          generation::beam_search(trained.model, msg, decode);
      for (std::size_t i = 0; i < hyps.size() && i < config.protocol.k; ++i) {
        const std::string reply_text = generation::hypothesis_text(trained.model.vocab, hyps[i]);
        if (reply_text.empty()) ++slot.empty;
        slot.candidates.push_back(metrics::tokenize(reply_text));
      }
      if (slot.candidates.empty()) slot.candidates.push_back(metrics::TokenSeq{});
      slot.logprob = generation::reply_log_prob(trained.model, msg, slot.reference_tokens);
      slot.tokens = slot.reference_tokens.size() + 1;  // + EOS
    });

    std::uint64_t empty_suggestions = 0;
    double total_logprob = 0.0;
    std::size_t total_tokens = 0;
    for (Slot& slot : slots) {
      acc.add_example(slot.candidates, slot.reference_tokens);
      empty_suggestions += slot.empty;
      total_logprob += slot.logprob;
      total_tokens += slot.tokens;
    }
    report.counters["empty_suggestions"] = empty_suggestions;
    if (total_tokens > 0) {
      mr.perplexity_score = metrics::perplexity(total_logprob, total_tokens);
    } else {
      report.absent_metrics["perplexity"] = "empty test set";
    }
    report.absent_metrics["mrr"] = "response-set ranking applies to the retrieval model";
    report.absent_metrics["precision_at_1"] = "response-set ranking applies to the retrieval model";
    report.absent_metrics["macro_mrr"] = "response-set ranking applies to the retrieval model";
  }

  acc.finish(mr);
  if (!mr.bleu_score) report.absent_metrics["bleu"] = "empty test set";

  report.config_echo["model"] = model_kind_name(config.model);
  report.config_echo["setting"] = setting_name(config.setting);
  report.config_echo["eval_language"] = config.eval_language;
  report.config_echo["train_languages"] = join(config.train_languages, ",");
  report.config_echo["test_path"] = config.test_path;
  if (!config.response_set_path.empty()) {
    report.config_echo["response_set_path"] = config.response_set_path;
  }
  if (!config.mt_path.empty()) report.config_echo["mt_path"] = config.mt_path;
  report.config_echo["protocol.k"] = std::to_string(config.protocol.k);
  report.config_echo["protocol.mrr_candidates"] = std::to_string(config.protocol.mrr_candidates);
  report.file_access.assign(file_access.begin(), file_access.end());

  const auto t1 = std::chrono::steady_clock::now();
  report.wall_clock_sec = std::chrono::duration<double>(t1 - t0).count();
  if (report.wall_clock_sec > 0.0) {
    report.throughput_examples_per_sec =
        static_cast<double>(test_pairs.size()) / report.wall_clock_sec;
  }
  return report;
}

namespace {

json metrics_to_json(const metrics::MetricReport& mr) {
  json j;
  j["rouge1"] = mr.rouge.r1;
  j["rouge2"] = mr.rouge.r2;
  j["rouge3"] = mr.rouge.r3;
  j["rouge_weighted"] = mr.rouge.weighted;
  j["dist1"] = mr.dist1;
  j["dist2"] = mr.dist2;
  j["n_examples"] = mr.n_examples;
  if (mr.bleu_score) j["bleu"] = *mr.bleu_score;
  if (mr.mrr_score) j["mrr"] = *mr.mrr_score;
  if (mr.p_at_1) j["precision_at_1"] = *mr.p_at_1;
  if (mr.macro_mrr_score) j["macro_mrr"] = *mr.macro_mrr_score;
  if (mr.perplexity_score) j["perplexity"] = *mr.perplexity_score;
  return j;
}

void metrics_from_json(const json& j, metrics::MetricReport& mr) {
  mr.rouge.r1 = j.value("rouge1", 0.0);
  mr.rouge.r2 = j.value("rouge2", 0.0);
  mr.rouge.r3 = j.value("rouge3", 0.0);
  mr.rouge.weighted = j.value("rouge_weighted", 0.0);
  mr.dist1 = j.value("dist1", 0.0);
  mr.dist2 = j.value("dist2", 0.0);
  mr.n_examples = j.value("n_examples", 0ULL);
  if (j.contains("bleu")) mr.bleu_score = j["bleu"].get<double>();
  if (j.contains("mrr")) mr.mrr_score = j["mrr"].get<double>();
  if (j.contains("precision_at_1")) mr.p_at_1 = j["precision_at_1"].get<double>();
  if (j.contains("macro_mrr")) mr.macro_mrr_score = j["macro_mrr"].get<double>();
  if (j.contains("perplexity")) mr.perplexity_score = j["perplexity"].get<double>();
}

}  // namespace

std::string canonical_report_json(const RunReport& report) {
  json j;
  j["schema"] = "replykit-run-report-v1";
  j["seed"] = report.seed;
  j["config"] = report.config_echo;
  j["counters"] = report.counters;
  j["metrics"] = metrics_to_json(report.metrics);
  j["absent_metrics"] = report.absent_metrics;
  j["file_access"] = report.file_access;
  j["loss_curve"] = report.loss_curve_path;
  return j.dump(2) + "\n";
}

void write_report(const RunReport& report, const std::string& path) {
  write_file_atomic(path, canonical_report_json(report));
  json timing;
  timing["wall_clock_sec"] = report.wall_clock_sec;
  timing["throughput_examples_per_sec"] = report.throughput_examples_per_sec;
  write_file_atomic(path + ".timing.json", timing.dump(2) + "\n");
}

RunReport read_report(const std::string& path) {
  const json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("schema", "") != "replykit-run-report-v1") {
    throw DataError("not a run report: " + path);
  }
  RunReport report;
  report.seed = j.value("seed", 0ULL);
  if (j.contains("config")) {
    for (const auto& [key, value] : j["config"].items()) {
      report.config_echo[key] = value.get<std::string>();
    }
  }
  if (j.contains("counters")) {
    for (const auto& [key, value] : j["counters"].items()) {
      report.counters[key] = value.get<std::uint64_t>();
    }
  }
  if (j.contains("metrics")) metrics_from_json(j["metrics"], report.metrics);
  if (j.contains("absent_metrics")) {
    for (const auto& [key, value] : j["absent_metrics"].items()) {
      report.absent_metrics[key] = value.get<std::string>();
    }
  }
  if (j.contains("file_access")) {
    for (const auto& item : j["file_access"]) report.file_access.push_back(item.get<std::string>());
  }
  report.loss_curve_path = j.value("loss_curve", "");
  return report;
}

ComparisonTable compare(std::span<const RunReport> reports) {
  if (reports.empty()) throw ConfigError("compare: no reports");
  ComparisonTable table;

  std::string proto_k, proto_m;
  std::set<std::string> settings, languages;
  for (const RunReport& report : reports) {
    const auto get = [&](const char* key) -> std::string {
      auto it = report.config_echo.find(key);
      return it != report.config_echo.end() ? it->second : std::string();
    };
    const std::string k = get("protocol.k");
    const std::string m = get("protocol.mrr_candidates");
    if (proto_k.empty()) {
      proto_k = k;
      proto_m = m;
    } else if (k != proto_k || m != proto_m) {
      throw ConfigError("compare: reports use different metric protocols");
    }
    const std::string language = get("eval_language");
    const std::string setting = get("setting");
    if (language.empty() || setting.empty()) {
      throw DataError("compare: report lacks eval_language/setting echo");
    }
    if (table.cells.count({language, setting})) {
      throw ConfigError("compare: duplicate report for (" + language + ", " + setting + ")");
    }

    ComparisonCell cell;
    cell.rouge = report.metrics.rouge.weighted;
    cell.dist1 = report.metrics.dist1;
    cell.dist2 = report.metrics.dist2;
    cell.cross_lingual = true;
    std::istringstream langs(get("train_languages"));
    std::string lang;
    while (std::getline(langs, lang, ',')) {
      if (lang == language) cell.cross_lingual = false;
    }
    table.cells[{language, setting}] = cell;
    settings.insert(setting);
    languages.insert(language);
  }
  table.settings.assign(settings.begin(), settings.end());
  table.languages.assign(languages.begin(), languages.end());

  // Best cross-lingual rouge per language (the boldface rule).
  for (const std::string& language : table.languages) {
    const std::pair<std::string, std::string>* best = nullptr;
    double best_rouge = 0.0;
    for (const std::string& setting : table.settings) {
      auto it = table.cells.find({language, setting});
      if (it == table.cells.end() || !it->second.cross_lingual) continue;
      if (!best || it->second.rouge > best_rouge) {
        best = &it->first;
        best_rouge = it->second.rouge;
      }
    }
    if (best) table.cells[*best].best = true;
  }
  return table;
}

std::string render_table(const ComparisonTable& table) {
  std::ostringstream out;
  out << "language";
  for (const std::string& setting : table.settings) {
    out << '\t' << setting << ".rouge\t" << setting << ".dist1\t" << setting << ".dist2";
  }
  out << '\n';
  char buf[64];
  for (const std::string& language : table.languages) {
    out << language;
    for (const std::string& setting : table.settings) {
      auto it = table.cells.find({language, setting});
      if (it == table.cells.end()) {
        out << "\t-\t-\t-";
        continue;
      }
      const ComparisonCell& cell = it->second;
      std::snprintf(buf, sizeof buf, "%.4f", cell.rouge);
      out << '\t' << buf << (cell.best ? "*" : "");
      std::snprintf(buf, sizeof buf, "%.4f", cell.dist1);
      out << '\t' << buf;
      std::snprintf(buf, sizeof buf, "%.4f", cell.dist2);
      out << '\t' << buf;
    }
    out << '\n';
  }
  return out.str();
}

namespace {

[[noreturn]] void rethrow_with_hash(const std::string& path, const std::string& what) {
  std::string hash = "unreadable";
  try {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path))));
    hash = buf;
  } catch (const std::exception&) {
  }
  throw DataError("cannot load artifact " + path + " (fnv1a64=" + hash + "): " + what);
}

}  // namespace

Suggester Suggester::load_retrieval(const std::string& model_path, const std::string& index_path) {
  Suggester s;
  s.kind_ = ModelKind::Retrieval;
  try {
    s.retrieval_model_ = retrieval::load_model(model_path);
  } catch (const DataError& e) {
    rethrow_with_hash(model_path, e.what());
  }
  try {
    s.index_ = retrieval::load_index(index_path);
  } catch (const DataError& e) {
    rethrow_with_hash(index_path, e.what());
  }
  if (s.index_.params_hash != retrieval::params_hash(s.retrieval_model_)) {
    throw DataError("response index was built from different parameters; rebuild it");
  }
  return s;
}

Suggester Suggester::load_generation(const std::string& model_path,
                                     const generation::DecodeConfig& decode) {
  Suggester s;
  s.kind_ = ModelKind::Generation;
  s.decode_ = decode;
  try {
    s.generation_model_ = generation::load_model(model_path);
  } catch (const DataError& e) {
    rethrow_with_hash(model_path, e.what());
  }
  return s;
}

std::vector<std::pair<std::string, double>> Suggester::suggest(const std::string& message,
                                                               std::size_t k) const {
  const metrics::TokenSeq tokens = metrics::tokenize(message);
  if (kind_ == ModelKind::Retrieval) {
    return retrieval::top_k(retrieval_model_, index_, tokens, k);
  }
  generation::DecodeConfig decode = decode_;
  if (decode.beam_width < k) decode.beam_width = k;
  const std::vector<generation::Hypothesis> hyps =
      generation::beam_search(generation_model_, tokens, decode);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < hyps.size() && i < k; ++i) {
    out.emplace_back(generation::hypothesis_text(generation_model_.vocab, hyps[i]),
                     hyps[i].log_prob);
  }
  return out;
}

}  // namespace replykit::harness
