#include "replykit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "replykit/error.hpp"
#include "replykit/optim.hpp"
#include "replykit/parallel.hpp"
#include "replykit/rng.hpp"
#include "replykit/serialize.hpp"

namespace replykit::retrieval {

Vocab build_vocab(std::span<const metrics::TokenSeq> seqs, std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const metrics::TokenSeq& seq : seqs) {
    for (const std::string& tok : seq.tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (by_freq.size() > max_size) by_freq.resize(max_size);

  Vocab vocab;
  vocab.tokens.reserve(by_freq.size());
  for (auto& [tok, count] : by_freq) vocab.tokens.push_back(std::move(tok));
  std::sort(vocab.tokens.begin(), vocab.tokens.end());
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  return vocab;
}

RetrievalModel::RetrievalModel(Vocab v, std::size_t dim) : vocab(std::move(v)), d(dim) {
  params.assign(2 * embedding_rows() * d + 2 * d * d, 0.0);
}

namespace {

struct Layout {
  std::size_t emb_x, proj_x, emb_y, proj_y;  // offsets
  std::size_t emb_size, proj_size;
};

Layout layout_of(const RetrievalModel& m) {
  Layout l;
  l.emb_size = m.embedding_rows() * m.d;
  l.proj_size = m.d * m.d;
  l.emb_x = 0;
  l.proj_x = l.emb_size;
  l.emb_y = l.emb_size + l.proj_size;
  l.proj_y = 2 * l.emb_size + l.proj_size;
  return l;
}

}  // namespace

MatView RetrievalModel::embeddings(Side side) {
  const Layout l = layout_of(*this);
  return {params.data() + (side == Side::Message ? l.emb_x : l.emb_y), embedding_rows(), d};
}
ConstMatView RetrievalModel::embeddings(Side side) const {
  const Layout l = layout_of(*this);
  return {params.data() + (side == Side::Message ? l.emb_x : l.emb_y), embedding_rows(), d};
}
MatView RetrievalModel::projection(Side side) {
  const Layout l = layout_of(*this);
  return {params.data() + (side == Side::Message ? l.proj_x : l.proj_y), d, d};
}
ConstMatView RetrievalModel::projection(Side side) const {
  const Layout l = layout_of(*this);
  return {params.data() + (side == Side::Message ? l.proj_x : l.proj_y), d, d};
}

std::span<double> RetrievalModel::block_embeddings(std::span<double> flat, Side side) const {
  const Layout l = layout_of(*this);
  return flat.subspan(side == Side::Message ? l.emb_x : l.emb_y, l.emb_size);
}
std::span<double> RetrievalModel::block_projection(std::span<double> flat, Side side) const {
  const Layout l = layout_of(*this);
  return flat.subspan(side == Side::Message ? l.proj_x : l.proj_y, l.proj_size);
}

namespace {

// Mean of token embedding rows; the UNK row stands in for OOV tokens and for
// the empty sequence.
std::vector<double> mean_embedding(const RetrievalModel& model, Side side,
                                   const metrics::TokenSeq& tokens) {
  const ConstMatView emb = model.embeddings(side);
  std::vector<double> u(model.d, 0.0);
  if (tokens.empty()) {
    auto row = emb.row(model.vocab.unk_row());
    return {row.begin(), row.end()};
  }
  for (const std::string& tok : tokens.tokens) {
    axpy(1.0, emb.row(model.vocab.row_for(tok)), u);
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& x : u) x *= inv;
  return u;
}

}  // namespace

std::vector<double> encode(const RetrievalModel& model, Side side, const metrics::TokenSeq& tokens) {
  const std::vector<double> u = mean_embedding(model, side, tokens);
  std::vector<double> out(model.d, 0.0);
  matvec(model.projection(side), u, out);
  return out;
}

double relevance(const RetrievalModel& model, const metrics::TokenSeq& message,
                 const metrics::TokenSeq& reply) {
  const std::vector<double> x = encode(model, Side::Message, message);
  const std::vector<double> y = encode(model, Side::Reply, reply);
  return dot(x, y);
}

ScoreMatrix score_batch(const RetrievalModel& model, std::span<const metrics::TokenSeq> messages,
                        std::span<const metrics::TokenSeq> replies) {
  if (messages.size() != replies.size()) {
    throw ConfigError("score_batch: message/reply count mismatch");
  }
  ScoreMatrix scores;
  scores.n = messages.size();
  scores.values.assign(scores.n * scores.n, 0.0);
  std::vector<std::vector<double>> xs(scores.n), ys(scores.n);
  for (std::size_t i = 0; i < scores.n; ++i) {
    xs[i] = encode(model, Side::Message, messages[i]);
    ys[i] = encode(model, Side::Reply, replies[i]);
  }
  for (std::size_t i = 0; i < scores.n; ++i) {
    for (std::size_t j = 0; j < scores.n; ++j) {
      scores.at(i, j) = dot(xs[i], ys[j]);
    }
  }
  return scores;
}

namespace {

// Per-row log denominator: logsumexp over row i of Theta plus column i
// without the diagonal (the diagonal appears once in total).
std::vector<double> log_denominators(const ScoreMatrix& s) {
  const std::size_t n = s.n;
  std::vector<double> lse(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      mx = std::max(mx, s.at(i, j));
      if (j != i) mx = std::max(mx, s.at(j, i));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += std::exp(s.at(i, j) - mx);
      if (j != i) sum += std::exp(s.at(j, i) - mx);
    }
    lse[i] = mx + std::log(sum);
  }
  return lse;
}

void check_finite(const ScoreMatrix& s) {
  for (double v : s.values) {
    if (!std::isfinite(v)) throw NumericalError("symmetric loss: non-finite score matrix");
  }
}

}  // namespace

double symmetric_loss(const ScoreMatrix& scores, Objective objective) {
  if (scores.n == 0) throw ConfigError("symmetric loss of empty batch");
  check_finite(scores);
  const std::vector<double> lse = log_denominators(scores);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.n; ++i) {
    const double log_ratio = scores.at(i, i) - lse[i];
    total += objective == Objective::MeanLog ? -log_ratio : 1.0 - std::exp(log_ratio);
  }
  return total / static_cast<double>(scores.n);
}

std::vector<double> symmetric_loss_grad(const ScoreMatrix& scores, Objective objective) {
  if (scores.n == 0) throw ConfigError("symmetric loss of empty batch");
  check_finite(scores);
  const std::size_t n = scores.n;
  const std::vector<double> lse = log_denominators(scores);
  std::vector<double> ratio(n);  // e^{Theta_ii} / D_i
  for (std::size_t i = 0; i < n; ++i) ratio[i] = std::exp(scores.at(i, i) - lse[i]);

  // Outer weight per term: 1 for the log objective, the ratio itself for the
  // raw objective.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = objective == Objective::MeanLog ? 1.0 : ratio[i];
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double q_a = std::exp(scores.at(a, b) - lse[a]);  // E_ab / D_a
      double g = -w[a] * ((a == b ? 1.0 : 0.0) - q_a);
      if (a != b) {
        const double q_b = std::exp(scores.at(a, b) - lse[b]);  // E_ab / D_b
        g += w[b] * q_b;
      }
      grad[a * n + b] = g * inv_n;
    }
  }
  return grad;
}

LossAndGrad loss_gradient(const RetrievalModel& model, std::span<const metrics::TokenSeq> messages,
                          std::span<const metrics::TokenSeq> replies, Objective objective,
                          const FreezeMask& freeze) {
  const std::size_t n = messages.size();
  if (n == 0 || n != replies.size()) throw ConfigError("loss_gradient: bad batch");

  // Forward, keeping intermediates.
  std::vector<std::vector<double>> ux(n), uy(n), outx(n), outy(n);
  for (std::size_t i = 0; i < n; ++i) {
    ux[i] = mean_embedding(model, Side::Message, messages[i]);
    uy[i] = mean_embedding(model, Side::Reply, replies[i]);
    outx[i].assign(model.d, 0.0);
    outy[i].assign(model.d, 0.0);
    matvec(model.projection(Side::Message), ux[i], outx[i]);
    matvec(model.projection(Side::Reply), uy[i], outy[i]);
  }
  ScoreMatrix scores;
  scores.n = n;
  scores.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scores.at(i, j) = dot(outx[i], outy[j]);
  }

  LossAndGrad result;
  result.loss = symmetric_loss(scores, objective);
  result.grad.assign(model.params.size(), 0.0);
  const std::vector<double> g_theta = symmetric_loss_grad(scores, objective);

  // Views into the flat gradient, mirroring the parameter layout.
  auto grad_span = std::span<double>(result.grad);
  auto demb = [&](Side side) {
    return MatView{model.block_embeddings(grad_span, side).data(), model.embedding_rows(), model.d};
  };
  auto dproj = [&](Side side) {
    return MatView{model.block_projection(grad_span, side).data(), model.d, model.d};
  };

  std::vector<double> doutx(model.d), douty(model.d), du(model.d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(doutx.begin(), doutx.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      axpy(g_theta[i * n + j], outy[j], doutx);
    }
    add_outer(dproj(Side::Message), doutx, ux[i]);
    matvec_t(model.projection(Side::Message), doutx, du);
    MatView de = demb(Side::Message);
    if (messages[i].empty()) {
      axpy(1.0, du, de.row(model.vocab.unk_row()));
    } else {
      const double inv = 1.0 / static_cast<double>(messages[i].size());
      for (const std::string& tok : messages[i].tokens) {
        axpy(inv, du, de.row(model.vocab.row_for(tok)));
      }
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(douty.begin(), douty.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(g_theta[i * n + j], outx[i], douty);
    }
    add_outer(dproj(Side::Reply), douty, uy[j]);
    matvec_t(model.projection(Side::Reply), douty, du);
    MatView de = demb(Side::Reply);
    if (replies[j].empty()) {
      axpy(1.0, du, de.row(model.vocab.unk_row()));
    } else {
      const double inv = 1.0 / static_cast<double>(replies[j].size());
      for (const std::string& tok : replies[j].tokens) {
        axpy(inv, du, de.row(model.vocab.row_for(tok)));
      }
    }
  }

  auto zero_block = [&](std::span<double> block) {
    std::fill(block.begin(), block.end(), 0.0);
  };
  if (freeze.embeddings_message) zero_block(model.block_embeddings(grad_span, Side::Message));
  if (freeze.projection_message) zero_block(model.block_projection(grad_span, Side::Message));
  if (freeze.embeddings_reply) zero_block(model.block_embeddings(grad_span, Side::Reply));
  if (freeze.projection_reply) zero_block(model.block_projection(grad_span, Side::Reply));
  return result;
}

TrainResult train(std::span<const corpus::MessagePair> pairs, const TrainConfig& config) {
  if (pairs.empty()) throw ConfigError("train: no pairs");
  if (config.batch_size < 2) throw ConfigError("contrastive training needs batch_size >= 2");
  if (config.lr < 0) throw ConfigError("train: lr must be >= 0");

  std::vector<metrics::TokenSeq> messages(pairs.size()), replies(pairs.size());
  std::vector<metrics::TokenSeq> all;
  all.reserve(pairs.size() * 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    messages[i] = metrics::tokenize(pairs[i].message);
    replies[i] = metrics::tokenize(pairs[i].reply);
    all.push_back(messages[i]);
    all.push_back(replies[i]);
  }

  TrainResult result;
  result.model = RetrievalModel(build_vocab(all, config.max_vocab), config.embedding_dim);

  Rng rng(config.seed);
  {
    MatView ex = result.model.embeddings(Side::Message);
    MatView ey = result.model.embeddings(Side::Reply);
    for (std::size_t i = 0; i < ex.size(); ++i) ex.data[i] = 0.1 * rng.gaussian();
    for (std::size_t i = 0; i < ey.size(); ++i) ey.data[i] = 0.1 * rng.gaussian();
    const double scale = 1.0 / std::sqrt(static_cast<double>(result.model.d));
    MatView px = result.model.projection(Side::Message);
    MatView py = result.model.projection(Side::Reply);
    for (std::size_t i = 0; i < px.size(); ++i) px.data[i] = scale * rng.gaussian();
    for (std::size_t i = 0; i < py.size(); ++i) py.data[i] = scale * rng.gaussian();
  }

  const std::size_t n = pairs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // A trailing partial batch still trains if it has >= 2 examples.
  std::size_t batches_per_epoch = n / config.batch_size;
  if (n % config.batch_size >= 2) ++batches_per_epoch;
  if (batches_per_epoch == 0) {
    throw ConfigError("train: need at least 2 examples for one batch");
  }
  std::size_t total_steps = batches_per_epoch * config.epochs;
  if (config.max_steps > 0 && config.max_steps < total_steps) total_steps = config.max_steps;

  AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.beta1 = config.beta1;
  adam_cfg.beta2 = config.beta2;
  adam_cfg.warmup_fraction = config.warmup_fraction;
  Adam adam(result.model.params.size(), adam_cfg, total_steps);

  std::vector<metrics::TokenSeq> batch_msgs, batch_reps;
  for (std::size_t epoch = 0; epoch < config.epochs && result.loss_curve.size() < total_steps;
       ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch && result.loss_curve.size() < total_steps; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, n);
      if (hi - lo < 2) break;
      batch_msgs.clear();
      batch_reps.clear();
      for (std::size_t i = lo; i < hi; ++i) {
        batch_msgs.push_back(messages[order[i]]);
        batch_reps.push_back(replies[order[i]]);
      }
      LossAndGrad lg = loss_gradient(result.model, batch_msgs, batch_reps, config.objective,
                                     config.freeze);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("retrieval training diverged at step " +
                             std::to_string(result.loss_curve.size()));
      }
      adam.step(result.model.params, lg.grad);
      result.loss_curve.push_back(lg.loss);
    }
  }
  return result;
}

std::uint64_t params_hash(const RetrievalModel& model) {
  return fnv1a64(serialize(model));
}

ResponseIndex build_index(const RetrievalModel& model, const corpus::ResponseSet& responses,
                          unsigned threads) {
  ResponseIndex index;
  index.responses = responses;
  index.d = model.d;
  index.vectors.assign(responses.entries.size() * model.d, 0.0);
  index.params_hash = params_hash(model);
  parallel_for(responses.entries.size(), threads, [&](std::size_t r) {
    const std::vector<double> v =
        encode(model, Side::Reply, metrics::tokenize(responses.entries[r].first));
    std::copy(v.begin(), v.end(), index.vectors.begin() + static_cast<std::ptrdiff_t>(r * model.d));
  });
  return index;
}

std::vector<std::pair<std::string, double>> top_k(const RetrievalModel& model,
                                                  const ResponseIndex& index,
                                                  const metrics::TokenSeq& message,
                                                  std::size_t k) {
  if (index.params_hash != params_hash(model)) {
    throw DataError("response index is stale: rebuild it for the current parameters");
  }
  const std::size_t n = index.responses.entries.size();
  const std::vector<double> x = encode(model, Side::Message, message);
  std::vector<double> scores(n);
  for (std::size_t r = 0; r < n; ++r) scores[r] = dot(x, index.row(r));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Stable sort keeps response-set order on ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (k > n) k = n;
  std::vector<std::pair<std::string, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.emplace_back(index.responses.entries[order[i]].first, scores[order[i]]);
  }
  return out;
}

std::string serialize(const RetrievalModel& model) {
  BinaryWriter w;
  w.magic("RKRETP01");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.d));
  w.u64(model.vocab.size());
  for (const std::string& tok : model.vocab.tokens) w.str(tok);
  w.f64_span(model.params);
  return w.bytes();
}

RetrievalModel deserialize_model(const std::string& bytes) {
  BinaryReader r(bytes);
  r.expect_magic("RKRETP01", "retrieval model");
  const std::uint32_t version = r.u32();
  if (version != 1) throw DataError("unsupported retrieval model version");
  const std::size_t d = r.u32();
  const std::uint64_t v = r.u64();
  Vocab vocab;
  vocab.tokens.reserve(v);
  for (std::uint64_t i = 0; i < v; ++i) vocab.tokens.push_back(r.str());
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  RetrievalModel model(std::move(vocab), d);
  r.f64_span(model.params);
  return model;
}

void save(const RetrievalModel& model, const std::string& path) {
  write_file_atomic(path, serialize(model));
}

RetrievalModel load_model(const std::string& path) {
  return deserialize_model(read_file(path));
}

void save_index(const ResponseIndex& index, const std::string& path) {
  BinaryWriter w;
  w.magic("RKRIDX01");
  w.u32(1);
  w.u64(index.params_hash);
  w.u32(static_cast<std::uint32_t>(index.d));
  w.str(index.responses.language);
  w.u64(index.responses.min_count);
  w.u64(index.responses.max_size);
  w.u64(index.responses.entries.size());
  for (const auto& [reply, count] : index.responses.entries) {
    w.str(reply);
    w.u64(count);
  }
  w.f64_span(index.vectors);
  w.write_file(path);
}

ResponseIndex load_index(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  r.expect_magic("RKRIDX01", "response index");
  const std::uint32_t version = r.u32();
  if (version != 1) throw DataError("unsupported response index version");
  ResponseIndex index;
  index.params_hash = r.u64();
  index.d = r.u32();
  index.responses.language = r.str();
  index.responses.min_count = r.u64();
  index.responses.max_size = r.u64();
  const std::uint64_t n = r.u64();
  index.responses.entries.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string reply = r.str();
    const std::uint64_t count = r.u64();
    index.responses.entries.emplace_back(std::move(reply), count);
  }
  index.vectors.assign(n * index.d, 0.0);
  r.f64_span(index.vectors);
  return index;
}

}  // namespace replykit::retrieval
