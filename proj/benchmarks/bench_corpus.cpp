#include <benchmark/benchmark.h>

#include <sstream>

#include "replykit/corpus.hpp"
#include "replykit/langid.hpp"
#include "synthetic.hpp"

using namespace replykit;

static void BM_ParseDump(benchmark::State& state) {
  const std::string dump = testsupport::fixture_dump_contents();
  for (auto _ : state) {
    std::istringstream in(dump);
    benchmark::DoNotOptimize(corpus::parse_dump(in));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(dump.size()));
}
BENCHMARK(BM_ParseDump);

static void BM_FullPipeline(benchmark::State& state) {
  const std::string dump = testsupport::fixture_dump_contents();
  const langid::LangIdModel model = testsupport::fixture_langid_model();
  corpus::PipelineConfig config;
  config.detector = testsupport::fixture_detector(model);
  config.toxicity_primary = testsupport::marker_scorer(testsupport::kPrimaryToxicMarker);
  config.toxicity_secondary = testsupport::marker_scorer(testsupport::kSecondaryToxicMarker);
  for (auto _ : state) {
    std::istringstream in(dump);
    benchmark::DoNotOptimize(corpus::run_pipeline(in, config));
  }
}
BENCHMARK(BM_FullPipeline);

static void BM_LangIdPredict(benchmark::State& state) {
  const langid::LangIdModel model = testsupport::fixture_langid_model();
  Rng rng(3);
  std::vector<std::string> texts;
  for (int i = 0; i < 64; ++i) {
    texts.push_back(testsupport::sentence(rng, testsupport::lexicon_aa(), 8));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(langid::predict(model, texts[i++ % texts.size()]));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LangIdPredict);
