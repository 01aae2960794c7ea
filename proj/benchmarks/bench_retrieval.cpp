#include <benchmark/benchmark.h>

#include "replykit/retrieval.hpp"
#include "replykit/rng.hpp"
#include "synthetic.hpp"

using namespace replykit;

namespace {

retrieval::TrainResult trained_cluster_model() {
  static retrieval::TrainResult result = [] {
    const auto task = testsupport::make_cluster_task(20, 1, 31);
    retrieval::TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.lr = 0.02;
    cfg.epochs = 5;
    cfg.embedding_dim = 32;
    cfg.seed = 3;
    return retrieval::train(task.train, cfg);
  }();
  return result;
}

corpus::ResponseSet synthetic_responses(std::size_t n) {
  Rng rng(77);
  corpus::ResponseSet set;
  for (std::size_t i = 0; i < n; ++i) {
    set.entries.emplace_back(testsupport::sentence(rng, testsupport::lexicon_aa(), 4) + " #" +
                                 std::to_string(i),
                             20);
  }
  return set;
}

}  // namespace

static void BM_SymmetricLossForward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  retrieval::ScoreMatrix m;
  m.n = n;
  m.values.resize(n * n);
  for (double& v : m.values) v = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::symmetric_loss(m));
  }
}
BENCHMARK(BM_SymmetricLossForward)->Arg(16)->Arg(64)->Arg(256);

static void BM_SymmetricLossGrad(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  retrieval::ScoreMatrix m;
  m.n = n;
  m.values.resize(n * n);
  for (double& v : m.values) v = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::symmetric_loss_grad(m));
  }
}
BENCHMARK(BM_SymmetricLossGrad)->Arg(16)->Arg(64)->Arg(256);

static void BM_TrainStep(benchmark::State& state) {
  const auto task = testsupport::make_cluster_task(10, 1, 41);
  std::vector<metrics::TokenSeq> msgs, reps;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    msgs.push_back(metrics::tokenize(task.train[i].message));
    reps.push_back(metrics::tokenize(task.train[i].reply));
  }
  auto model = trained_cluster_model().model;
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::loss_gradient(model, msgs, reps));
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64);

static void BM_TopK(benchmark::State& state) {
  const auto model = trained_cluster_model().model;
  const auto responses = synthetic_responses(static_cast<std::size_t>(state.range(0)));
  const auto index = retrieval::build_index(model, responses);
  const auto message = metrics::tokenize("m3a m3b m3c");
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieval::top_k(model, index, message, 3));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000)->Arg(50000);
