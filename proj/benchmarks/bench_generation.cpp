#include <benchmark/benchmark.h>

#include "replykit/generation.hpp"
#include "replykit/rng.hpp"
#include "synthetic.hpp"

using namespace replykit;

namespace {

generation::GenTrainResult trained_copy_model() {
  static generation::GenTrainResult result = [] {
    const auto task = testsupport::make_copy_task(64, 0, 13);
    generation::GenTrainConfig cfg;
    cfg.batch_size = 16;
    cfg.lr = 5e-3;
    cfg.epochs = 10;
    cfg.embedding_dim = 32;
    cfg.seed = 14;
    return generation::train(task.train, cfg);
  }();
  return result;
}

}  // namespace

static void BM_BeamSearch(benchmark::State& state) {
  const auto model = trained_copy_model().model;
  const auto message = metrics::tokenize("ta tb tc td");
  generation::DecodeConfig cfg;
  cfg.beam_width = static_cast<std::size_t>(state.range(0));
  cfg.max_len = 8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generation::beam_search(model, message, cfg));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(3)->Arg(8);

static void BM_Seq2SeqGradient(benchmark::State& state) {
  const auto model = trained_copy_model().model;
  const auto task = testsupport::make_copy_task(static_cast<std::size_t>(state.range(0)), 0, 15);
  std::vector<generation::GenBatchExample> batch;
  for (const auto& pair : task.train) {
    generation::GenBatchExample ex;
    ex.message = metrics::tokenize(pair.message);
    ex.reply = metrics::tokenize(pair.reply);
    batch.push_back(std::move(ex));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(generation::seq2seq_loss_gradient(model, batch));
  }
}
BENCHMARK(BM_Seq2SeqGradient)->Arg(4)->Arg(16);

static void BM_NextTokenDist(benchmark::State& state) {
  const auto model = trained_copy_model().model;
  const auto message = metrics::tokenize("ta tb tc");
  const std::vector<std::size_t> prefix = {generation::GenVocab::kSpecials,
                                           generation::GenVocab::kSpecials + 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(generation::next_token_dist(model, message, prefix));
  }
}
BENCHMARK(BM_NextTokenDist);
