#include <benchmark/benchmark.h>

#include "replykit/metrics.hpp"
#include "replykit/rng.hpp"
#include "synthetic.hpp"

using namespace replykit;

namespace {

std::vector<std::string> sample_texts(std::size_t n, std::size_t words) {
  Rng rng(17);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(testsupport::sentence(rng, testsupport::lexicon_aa(), words));
  }
  return out;
}

}  // namespace

static void BM_Tokenize(benchmark::State& state) {
  const auto texts = sample_texts(256, static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::tokenize(texts[i++ % texts.size()]));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_Tokenize)->Arg(8)->Arg(32)->Arg(128);

static void BM_WeightedRouge(benchmark::State& state) {
  const auto texts = sample_texts(256, static_cast<std::size_t>(state.range(0)));
  std::vector<metrics::TokenSeq> seqs;
  for (const auto& t : texts) seqs.push_back(metrics::tokenize(t));
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = seqs[i % seqs.size()];
    const auto& b = seqs[(i + 1) % seqs.size()];
    benchmark::DoNotOptimize(metrics::weighted_rouge(a, b));
    ++i;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_WeightedRouge)->Arg(8)->Arg(32);

static void BM_CorpusBleu(benchmark::State& state) {
  const auto texts = sample_texts(512, 12);
  std::vector<metrics::TokenSeq> cands, refs;
  for (std::size_t i = 0; i < texts.size(); i += 2) {
    cands.push_back(metrics::tokenize(texts[i]));
    refs.push_back(metrics::tokenize(texts[i + 1]));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::bleu(cands, refs));
  }
}
BENCHMARK(BM_CorpusBleu);
