#include <doctest.h>

#include <cmath>
#include <set>

#include "replykit/error.hpp"
#include "replykit/retrieval.hpp"
#include "replykit/rng.hpp"
#include "synthetic.hpp"

using namespace replykit;
using metrics::TokenSeq;

namespace {

TokenSeq seq(std::initializer_list<const char*> tokens) {
  TokenSeq s;
  for (const char* t : tokens) s.tokens.emplace_back(t);
  return s;
}

retrieval::Vocab small_vocab(std::initializer_list<const char*> tokens) {
  retrieval::Vocab v;
  for (const char* t : tokens) v.tokens.emplace_back(t);
  std::sort(v.tokens.begin(), v.tokens.end());
  for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = i;
  return v;
}

retrieval::RetrievalModel random_model(std::size_t vocab_size, std::size_t d, std::uint64_t seed) {
  retrieval::Vocab vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) {
    vocab.tokens.push_back("w" + std::to_string(i));
  }
  std::sort(vocab.tokens.begin(), vocab.tokens.end());
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  retrieval::RetrievalModel model(std::move(vocab), d);
  Rng rng(seed);
  for (double& p : model.params) p = 0.5 * rng.gaussian();
  return model;
}

TokenSeq random_tokens(Rng& rng, std::size_t vocab_size, std::size_t max_len) {
  TokenSeq s;
  const std::size_t len = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < len; ++i) {
    s.tokens.push_back("w" + std::to_string(rng.below(vocab_size + 2)));  // some OOV
  }
  return s;
}

retrieval::ScoreMatrix random_scores(Rng& rng, std::size_t n, double scale = 2.0) {
  retrieval::ScoreMatrix m;
  m.n = n;
  m.values.resize(n * n);
  for (double& v : m.values) v = scale * rng.gaussian();
  return m;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("encode: zero embeddings, single token, hand-set mean and projection") {
  retrieval::RetrievalModel model(small_vocab({"x", "y"}), 2);
  CHECK(encode(model, retrieval::Side::Message, seq({"x", "y"})) ==
        std::vector<double>{0.0, 0.0});

  auto emb = model.embeddings(retrieval::Side::Message);
  emb(0, 0) = 1.0;  // "x"
  emb(0, 1) = 2.0;
  emb(1, 0) = 3.0;  // "y"
  emb(1, 1) = 4.0;
  emb(2, 0) = 5.0;  // UNK row
  emb(2, 1) = 6.0;
  auto proj = model.projection(retrieval::Side::Message);
  proj(0, 0) = 2.0;
  proj(1, 1) = 3.0;

  // Single token: projection * embedding row.
  CHECK(encode(model, retrieval::Side::Message, seq({"x"})) == std::vector<double>{2.0, 6.0});
  // Mean of two rows (2,3), then the diagonal projection.
  CHECK(encode(model, retrieval::Side::Message, seq({"x", "y"})) == std::vector<double>{4.0, 9.0});
  // Unknown and empty both hit the UNK row.
  CHECK(encode(model, retrieval::Side::Message, seq({"zzz"})) == std::vector<double>{10.0, 18.0});
  CHECK(encode(model, retrieval::Side::Message, TokenSeq{}) == std::vector<double>{10.0, 18.0});
}

TEST_CASE("relevance is the dot product of the two encodings") {
  retrieval::RetrievalModel model(small_vocab({"a", "b"}), 2);
  auto ex = model.embeddings(retrieval::Side::Message);
  auto ey = model.embeddings(retrieval::Side::Reply);
  auto px = model.projection(retrieval::Side::Message);
  auto py = model.projection(retrieval::Side::Reply);
  px(0, 0) = py(0, 0) = 1.0;
  px(1, 1) = py(1, 1) = 1.0;

  // Orthogonal encodings score zero.
  ex(0, 0) = 1.0;
  ey(1, 1) = 1.0;
  CHECK(relevance(model, seq({"a"}), seq({"b"})) == 0.0);

  // Identical encodings score the squared norm.
  ey(1, 0) = 1.0;
  ey(1, 1) = 0.0;
  CHECK(relevance(model, seq({"a"}), seq({"b"})) == doctest::Approx(1.0));

  // Hand-set 2-d case: (1,2) . (3,4) = 11.
  ex(0, 0) = 1.0;
  ex(0, 1) = 2.0;
  ey(1, 0) = 3.0;
  ey(1, 1) = 4.0;
  CHECK(relevance(model, seq({"a"}), seq({"b"})) == doctest::Approx(11.0));
}

TEST_CASE("symmetric loss closed forms") {
  // n = 1: the denominator collapses to the numerator, loss is exactly 0.
  retrieval::ScoreMatrix one;
  one.n = 1;
  one.values = {7.3};
  CHECK(retrieval::symmetric_loss(one) == 0.0);
  one.values = {-123.0};
  CHECK(retrieval::symmetric_loss(one) == 0.0);

  // n = 2 uniform: each ratio is 1/3, loss = ln 3.
  retrieval::ScoreMatrix uniform;
  uniform.n = 2;
  uniform.values = {0.4, 0.4, 0.4, 0.4};
  CHECK(std::abs(retrieval::symmetric_loss(uniform) - std::log(3.0)) < 1e-9);

  // n = 2, diagonal 10, off-diagonal 0: loss = log(1 + 2 e^{-10}).
  retrieval::ScoreMatrix diag;
  diag.n = 2;
  diag.values = {10.0, 0.0, 0.0, 10.0};
  CHECK(retrieval::symmetric_loss(diag) ==
        doctest::Approx(std::log(1.0 + 2.0 * std::exp(-10.0))).epsilon(1e-9));

  retrieval::ScoreMatrix bad;
  bad.n = 1;
  bad.values = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(retrieval::symmetric_loss(bad), NumericalError);
}

TEST_CASE("symmetric loss invariances") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    retrieval::ScoreMatrix m = random_scores(rng, n);

    const double loss = retrieval::symmetric_loss(m);
    CHECK(loss >= 0.0);

    // Transposition symmetry: the denominator sums both directions.
    retrieval::ScoreMatrix t = m;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) t.at(i, j) = m.at(j, i);
    }
    CHECK(std::abs(retrieval::symmetric_loss(t) - loss) < 1e-12);

    // Constant shifts cancel in the ratios.
    retrieval::ScoreMatrix shifted = m;
    for (double& v : shifted.values) v += 13.5;
    CHECK(std::abs(retrieval::symmetric_loss(shifted) - loss) < 1e-9);

    // Raw-ratio objective obeys the same invariances.
    const double raw = retrieval::symmetric_loss(m, retrieval::Objective::RawRatio);
    CHECK(raw >= 0.0);
    CHECK(raw <= 1.0);
    CHECK(std::abs(retrieval::symmetric_loss(t, retrieval::Objective::RawRatio) - raw) < 1e-12);

    // Off-diagonal mass is finite here, so the loss is strictly positive for
    // n >= 2 (it vanishes only as off-diagonal scores go to -infinity).
    if (n >= 2) {
      CHECK(loss > 0.0);
      CHECK(raw > 0.0);
    }
  }
}

TEST_CASE("loss gradient matches central finite differences") {
  Rng data_rng(202);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    retrieval::RetrievalModel model = random_model(6, 3, 300 + seed);
    std::vector<TokenSeq> msgs, reps;
    const std::size_t n = 2 + data_rng.below(3);
    for (std::size_t i = 0; i < n; ++i) {
      msgs.push_back(random_tokens(data_rng, 6, 4));
      reps.push_back(random_tokens(data_rng, 6, 4));
    }
    const retrieval::Objective obj =
        seed % 2 == 0 ? retrieval::Objective::MeanLog : retrieval::Objective::RawRatio;
    const retrieval::LossAndGrad lg = retrieval::loss_gradient(model, msgs, reps, obj);

    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < model.params.size(); ++p) {
      const double saved = model.params[p];
      model.params[p] = saved + h;
      const double up = retrieval::symmetric_loss(retrieval::score_batch(model, msgs, reps), obj);
      model.params[p] = saved - h;
      const double dn = retrieval::symmetric_loss(retrieval::score_batch(model, msgs, reps), obj);
      model.params[p] = saved;
      const double fd = (up - dn) / (2.0 * h);
      num += (lg.grad[p] - fd) * (lg.grad[p] - fd);
      den += fd * fd;
    }
    const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
    CHECK(rel <= 1e-4);
  }
}

TEST_CASE("gradient edge cases: n=1 and frozen blocks") {
  retrieval::RetrievalModel model = random_model(5, 3, 7);
  std::vector<TokenSeq> one_msg = {seq({"w0", "w1"})};
  std::vector<TokenSeq> one_rep = {seq({"w2"})};
  const retrieval::LossAndGrad lg1 = retrieval::loss_gradient(model, one_msg, one_rep);
  CHECK(lg1.loss == 0.0);
  for (double g : lg1.grad) CHECK(g == 0.0);

  std::vector<TokenSeq> msgs = {seq({"w0"}), seq({"w1"})};
  std::vector<TokenSeq> reps = {seq({"w2"}), seq({"w3"})};
  retrieval::FreezeMask freeze;
  freeze.embeddings_message = true;
  freeze.projection_reply = true;
  const retrieval::LossAndGrad lg =
      retrieval::loss_gradient(model, msgs, reps, retrieval::Objective::MeanLog, freeze);
  auto gspan = std::span<double>(const_cast<std::vector<double>&>(lg.grad));
  for (double g : model.block_embeddings(gspan, retrieval::Side::Message)) CHECK(g == 0.0);
  for (double g : model.block_projection(gspan, retrieval::Side::Reply)) CHECK(g == 0.0);
  double unfrozen_mass = 0.0;
  for (double g : model.block_projection(gspan, retrieval::Side::Message)) unfrozen_mass += std::abs(g);
  CHECK(unfrozen_mass > 0.0);
}

TEST_CASE("training: lr=0 leaves parameters unchanged, loss decreases otherwise") {
  testsupport::ClusterTask task = testsupport::make_cluster_task(6, 1, 55);

  retrieval::TrainConfig frozen_cfg;
  frozen_cfg.batch_size = 10;
  frozen_cfg.lr = 0.0;
  frozen_cfg.epochs = 2;
  frozen_cfg.embedding_dim = 8;
  frozen_cfg.seed = 1;
  const retrieval::TrainResult a = retrieval::train(task.train, frozen_cfg);
  const retrieval::TrainResult b = [&] {
    retrieval::TrainConfig c = frozen_cfg;
    c.epochs = 1;
    return retrieval::train(task.train, c);
  }();
  CHECK(a.model.params == b.model.params);  // zero rate never moves them

  retrieval::TrainConfig cfg = frozen_cfg;
  cfg.lr = 0.05;
  cfg.epochs = 40;
  const retrieval::TrainResult trained = retrieval::train(task.train, cfg);
  REQUIRE(trained.loss_curve.size() > 200);
  CHECK(trained.loss_curve[200] < trained.loss_curve[0]);
  const double head = (trained.loss_curve[0] + trained.loss_curve[1] + trained.loss_curve[2]) / 3.0;
  const std::size_t z = trained.loss_curve.size();
  const double tail =
      (trained.loss_curve[z - 1] + trained.loss_curve[z - 2] + trained.loss_curve[z - 3]) / 3.0;
  CHECK(tail < head);
}

TEST_CASE("training is deterministic per seed") {
  testsupport::ClusterTask task = testsupport::make_cluster_task(4, 1, 66);
  retrieval::TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.lr = 0.01;
  cfg.epochs = 3;
  cfg.embedding_dim = 8;
  cfg.seed = 17;
  const retrieval::TrainResult a = retrieval::train(task.train, cfg);
  const retrieval::TrainResult b = retrieval::train(task.train, cfg);
  CHECK(a.model.params == b.model.params);
  CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("top_k equals a full-sort oracle and respects ties") {
  retrieval::RetrievalModel model = random_model(40, 8, 404);
  corpus::ResponseSet responses;
  Rng rng(405);
  for (int i = 0; i < 1000; ++i) {
    std::string reply;
    const std::size_t len = 1 + rng.below(4);
    for (std::size_t w = 0; w < len; ++w) {
      if (w) reply.push_back(' ');
      reply += "w" + std::to_string(rng.below(42));
    }
    reply += " #" + std::to_string(i);  // make texts unique
    responses.entries.emplace_back(reply, 20 + rng.below(100));
  }
  const retrieval::ResponseIndex index = retrieval::build_index(model, responses);

  const TokenSeq message = seq({"w1", "w2", "w3"});
  const auto top3 = retrieval::top_k(model, index, message, 3);
  REQUIRE(top3.size() == 3);

  // Oracle: score every response via relevance() and stable-sort.
  std::vector<std::pair<double, std::size_t>> oracle;
  for (std::size_t r = 0; r < responses.entries.size(); ++r) {
    oracle.emplace_back(
        relevance(model, message, metrics::tokenize(responses.entries[r].first)), r);
  }
  std::stable_sort(oracle.begin(), oracle.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(top3[i].first == responses.entries[oracle[i].second].first);
    CHECK(top3[i].second == doctest::Approx(oracle[i].first).epsilon(1e-9));
  }

  // k = |Y| returns a permutation of the whole set.
  const auto full = retrieval::top_k(model, index, message, responses.entries.size());
  CHECK(full.size() == responses.entries.size());
  std::set<std::string> texts;
  for (const auto& [reply, score] : full) texts.insert(reply);
  CHECK(texts.size() == responses.entries.size());

  // k = 1 is the argmax of relevance over the set.
  const auto top1 = retrieval::top_k(model, index, message, 1);
  CHECK(top1[0].first == full[0].first);
}

TEST_CASE("stale index is rejected") {
  retrieval::RetrievalModel model = random_model(10, 4, 500);
  corpus::ResponseSet responses;
  responses.entries = {{"w1", 30}, {"w2", 25}};
  const retrieval::ResponseIndex index = retrieval::build_index(model, responses);

  model.params[0] += 1.0;  // parameters moved on
  CHECK_THROWS_AS(retrieval::top_k(model, index, seq({"w1"}), 1), DataError);
}

TEST_CASE("model and index serialization round trip") {
  retrieval::RetrievalModel model = random_model(12, 5, 600);
  const retrieval::RetrievalModel restored = retrieval::deserialize_model(retrieval::serialize(model));
  CHECK(restored.d == model.d);
  CHECK(restored.vocab.tokens == model.vocab.tokens);
  CHECK(restored.params == model.params);
  CHECK(retrieval::params_hash(restored) == retrieval::params_hash(model));

  corpus::ResponseSet responses;
  responses.entries = {{"w1 w2", 30}, {"w3", 25}, {"w4 w5", 21}};
  const retrieval::ResponseIndex index = retrieval::build_index(model, responses);

  const std::string path = "/tmp/replykit_test_index.bin";
  retrieval::save_index(index, path);
  const retrieval::ResponseIndex loaded = retrieval::load_index(path);
  CHECK(loaded.params_hash == index.params_hash);
  CHECK(loaded.vectors == index.vectors);
  CHECK(loaded.responses.entries == index.responses.entries);

  // Same suggestions through the reloaded pair of artifacts.
  const auto a = retrieval::top_k(model, index, seq({"w1"}), 2);
  const auto b = retrieval::top_k(restored, loaded, seq({"w1"}), 2);
  CHECK(a == b);
}

TEST_CASE("index build is invariant to response permutation up to tie order") {
  retrieval::RetrievalModel model = random_model(10, 4, 700);
  corpus::ResponseSet responses;
  for (int i = 0; i < 50; ++i) {
    responses.entries.emplace_back("w" + std::to_string(i % 12) + " #" + std::to_string(i), 20 + i);
  }
  corpus::ResponseSet shuffled = responses;
  Rng rng(701);
  rng.shuffle(shuffled.entries);

  const retrieval::ResponseIndex i1 = retrieval::build_index(model, responses);
  const retrieval::ResponseIndex i2 = retrieval::build_index(model, shuffled);
  const TokenSeq message = seq({"w3", "w7"});
  auto t1 = retrieval::top_k(model, i1, message, 5);
  auto t2 = retrieval::top_k(model, i2, message, 5);
  // Scores agree pointwise; texts may swap only among exact ties.
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t1[i].second == doctest::Approx(t2[i].second).epsilon(1e-12));
  }
}

TEST_CASE("threaded index build matches the serial one") {
  retrieval::RetrievalModel model = random_model(20, 6, 800);
  corpus::ResponseSet responses;
  for (int i = 0; i < 333; ++i) {
    responses.entries.emplace_back("w" + std::to_string(i % 25) + " w" + std::to_string(i % 7), 20);
  }
  const retrieval::ResponseIndex serial = retrieval::build_index(model, responses, 1);
  const retrieval::ResponseIndex threaded = retrieval::build_index(model, responses, 4);
  CHECK(serial.vectors == threaded.vectors);
}

}  // TEST_SUITE
