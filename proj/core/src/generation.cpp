#include "replykit/generation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "replykit/error.hpp"
#include "replykit/rng.hpp"
#include "replykit/serialize.hpp"

namespace replykit::generation {

GenVocab build_gen_vocab(std::span<const metrics::TokenSeq> seqs, std::size_t max_content) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const metrics::TokenSeq& seq : seqs) {
    for (const std::string& tok : seq.tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (by_freq.size() > max_content) by_freq.resize(max_content);

  GenVocab vocab;
  vocab.tokens = {"<pad>", "<s>", "</s>", "<unk>"};
  std::vector<std::string> content;
  content.reserve(by_freq.size());
  for (auto& [tok, count] : by_freq) content.push_back(std::move(tok));
  std::sort(content.begin(), content.end());
  for (std::string& tok : content) vocab.tokens.push_back(std::move(tok));
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  return vocab;
}

std::vector<std::size_t> to_ids(const GenVocab& vocab, const metrics::TokenSeq& seq) {
  std::vector<std::size_t> ids;
  ids.reserve(seq.size());
  for (const std::string& tok : seq.tokens) ids.push_back(vocab.id_for(tok));
  return ids;
}

namespace {

struct Layout {
  std::size_t enc_emb, enc_w, enc_u, enc_b;
  std::size_t dec_emb, dec_w, dec_u, dec_c, dec_b;
  std::size_t out_w, out_b;
  std::size_t total;
};

Layout layout_of(std::size_t v, std::size_t d) {
  Layout l;
  std::size_t off = 0;
  auto take = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  l.enc_emb = take(v * d);
  l.enc_w = take(d * d);
  l.enc_u = take(d * d);
  l.enc_b = take(d);
  l.dec_emb = take(v * d);
  l.dec_w = take(d * d);
  l.dec_u = take(d * d);
  l.dec_c = take(d * d);
  l.dec_b = take(d);
  l.out_w = take(v * d);
  l.out_b = take(v);
  l.total = off;
  return l;
}

void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : v) x /= z;
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(GenVocab v, std::size_t dim) : vocab(std::move(v)), d(dim) {
  params.assign(layout_of(vocab.size(), d).total, 0.0);
}

#define RK_GEN_VIEW(name, field, rows_, cols_)                                      \
  MatView Seq2SeqModel::name() {                                                    \
    const Layout l = layout_of(vocab.size(), d);                                    \
    return {params.data() + l.field, rows_, cols_};                                 \
  }                                                                                 \
  ConstMatView Seq2SeqModel::name() const {                                         \
    const Layout l = layout_of(vocab.size(), d);                                    \
    return {params.data() + l.field, rows_, cols_};                                 \
  }

RK_GEN_VIEW(enc_embeddings, enc_emb, vocab.size(), d)
RK_GEN_VIEW(enc_input_w, enc_w, d, d)
RK_GEN_VIEW(enc_recur_w, enc_u, d, d)
RK_GEN_VIEW(dec_embeddings, dec_emb, vocab.size(), d)
RK_GEN_VIEW(dec_input_w, dec_w, d, d)
RK_GEN_VIEW(dec_recur_w, dec_u, d, d)
RK_GEN_VIEW(dec_attn_w, dec_c, d, d)
RK_GEN_VIEW(out_w, out_w, vocab.size(), d)
#undef RK_GEN_VIEW

std::span<double> Seq2SeqModel::enc_bias() {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.enc_b, d};
}
std::span<const double> Seq2SeqModel::enc_bias() const {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.enc_b, d};
}
std::span<double> Seq2SeqModel::dec_bias() {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.dec_b, d};
}
std::span<const double> Seq2SeqModel::dec_bias() const {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.dec_b, d};
}
std::span<double> Seq2SeqModel::out_bias() {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.out_b, vocab.size()};
}
std::span<const double> Seq2SeqModel::out_bias() const {
  const Layout l = layout_of(vocab.size(), d);
  return {params.data() + l.out_b, vocab.size()};
}

namespace {

// Encoder states for one message: h[t] for t in [0, n), row-major n x d.
struct EncoderStates {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> h;

  std::span<const double> state(std::size_t t) const { return {h.data() + t * d, d}; }
  std::span<double> state_mut(std::size_t t) { return {h.data() + t * d, d}; }
};

EncoderStates run_encoder(const Seq2SeqModel& model, std::span<const std::size_t> message_ids) {
  EncoderStates enc;
  enc.n = message_ids.size();
  enc.d = model.d;
  enc.h.assign(enc.n * model.d, 0.0);
  const ConstMatView emb = model.enc_embeddings();
  const ConstMatView w = model.enc_input_w();
  const ConstMatView u = model.enc_recur_w();
  const auto b = model.enc_bias();
  std::vector<double> a(model.d), tmp(model.d);
  std::vector<double> prev(model.d, 0.0);
  for (std::size_t t = 0; t < enc.n; ++t) {
    matvec(w, emb.row(message_ids[t]), a);
    matvec(u, prev, tmp);
    for (std::size_t i = 0; i < model.d; ++i) {
      a[i] = std::tanh(a[i] + tmp[i] + b[i]);
    }
    std::copy(a.begin(), a.end(), enc.state_mut(t).begin());
    prev = a;
  }
  return enc;
}

// One decoder step: previous state -> attention context -> new state.
// Records the attention weights when asked (training needs them).
void decoder_step(const Seq2SeqModel& model, const EncoderStates& enc,
                  std::span<const double> prev_state, std::size_t input_id,
                  std::span<double> new_state, std::vector<double>* attn_out,
                  std::vector<double>* context_out) {
  const std::size_t d = model.d;
  std::vector<double> context(d, 0.0);
  std::vector<double> attn;
  if (enc.n > 0) {
    attn.resize(enc.n);
    for (std::size_t t = 0; t < enc.n; ++t) attn[t] = dot(prev_state, enc.state(t));
    softmax_inplace(attn);
    for (std::size_t t = 0; t < enc.n; ++t) axpy(attn[t], enc.state(t), context);
  }
  std::vector<double> g(d), tmp(d);
  matvec(model.dec_input_w(), model.dec_embeddings().row(input_id), g);
  matvec(model.dec_recur_w(), prev_state, tmp);
  for (std::size_t i = 0; i < d; ++i) g[i] += tmp[i];
  matvec(model.dec_attn_w(), context, tmp);
  const auto b = model.dec_bias();
  for (std::size_t i = 0; i < d; ++i) new_state[i] = std::tanh(g[i] + tmp[i] + b[i]);
  if (attn_out) *attn_out = std::move(attn);
  if (context_out) *context_out = std::move(context);
}

std::vector<double> output_dist(const Seq2SeqModel& model, std::span<const double> state) {
  std::vector<double> logits(model.vocab.size());
  matvec(model.out_w(), state, logits);
  const auto b = model.out_bias();
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += b[i];
  softmax_inplace(logits);
  return logits;
}

std::span<const double> initial_state(const EncoderStates& enc, std::vector<double>& zero) {
  if (enc.n > 0) return enc.state(enc.n - 1);
  return zero;
}

}  // namespace

std::vector<double> next_token_dist(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                                    std::span<const std::size_t> prefix_ids) {
  for (std::size_t id : prefix_ids) {
    if (id >= model.vocab.size()) throw DataError("next_token_dist: id outside vocabulary");
  }
  const std::vector<std::size_t> msg_ids = to_ids(model.vocab, message);
  const EncoderStates enc = run_encoder(model, msg_ids);
  std::vector<double> zero(model.d, 0.0);
  const std::span<const double> s0 = initial_state(enc, zero);
  std::vector<double> state(s0.begin(), s0.end());
  std::vector<double> next(model.d);
  std::size_t input = GenVocab::kBos;
  for (std::size_t i = 0;; ++i) {
    decoder_step(model, enc, state, input, next, nullptr, nullptr);
    state = next;
    if (i == prefix_ids.size()) break;
    input = prefix_ids[i];
  }
  return output_dist(model, state);
}

double sequence_log_prob(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                         std::span<const std::size_t> target_ids) {
  if (target_ids.empty() || target_ids.back() != GenVocab::kEos) {
    throw ConfigError("sequence_log_prob: target must end with EOS");
  }
  for (std::size_t id : target_ids) {
    if (id >= model.vocab.size()) throw DataError("sequence_log_prob: id outside vocabulary");
  }
  const std::vector<std::size_t> msg_ids = to_ids(model.vocab, message);
  const EncoderStates enc = run_encoder(model, msg_ids);
  std::vector<double> zero(model.d, 0.0);
  const std::span<const double> s0 = initial_state(enc, zero);
  std::vector<double> state(s0.begin(), s0.end());
  std::vector<double> next(model.d);
  double total = 0.0;
  std::size_t input = GenVocab::kBos;
  for (std::size_t i = 0; i < target_ids.size(); ++i) {
    decoder_step(model, enc, state, input, next, nullptr, nullptr);
    state = next;
    const std::vector<double> p = output_dist(model, state);
    total += std::log(p[target_ids[i]]);
    input = target_ids[i];
  }
  return total;
}

double reply_log_prob(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                      const metrics::TokenSeq& reply) {
  std::vector<std::size_t> ids = to_ids(model.vocab, reply);
  ids.push_back(GenVocab::kEos);
  return sequence_log_prob(model, message, ids);
}

GenLossAndGrad seq2seq_loss_gradient(const Seq2SeqModel& model,
                                     std::span<const GenBatchExample> batch,
                                     bool freeze_embeddings) {
  if (batch.empty()) throw ConfigError("seq2seq_loss_gradient: empty batch");
  const std::size_t d = model.d;
  const std::size_t v = model.vocab.size();
  const Layout layout = layout_of(v, d);

  GenLossAndGrad result;
  result.grad.assign(model.params.size(), 0.0);

  // Count target tokens first so per-step output deltas can carry the 1/T
  // normalization directly.
  std::vector<std::vector<std::size_t>> targets(batch.size());
  std::vector<std::vector<std::size_t>> inputs(batch.size());
  std::vector<std::vector<std::size_t>> msg_ids(batch.size());
  std::size_t total_tokens = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    targets[e] = to_ids(model.vocab, batch[e].reply);
    targets[e].push_back(GenVocab::kEos);
    inputs[e].assign(1, GenVocab::kBos);
    inputs[e].insert(inputs[e].end(), targets[e].begin(), targets[e].end() - 1);
    msg_ids[e] = to_ids(model.vocab, batch[e].message);
    total_tokens += targets[e].size();
  }
  result.target_tokens = total_tokens;
  const double inv_t = 1.0 / static_cast<double>(total_tokens);

  auto gspan = std::span<double>(result.grad);
  MatView g_enc_emb{gspan.data() + layout.enc_emb, v, d};
  MatView g_enc_w{gspan.data() + layout.enc_w, d, d};
  MatView g_enc_u{gspan.data() + layout.enc_u, d, d};
  std::span<double> g_enc_b{gspan.data() + layout.enc_b, d};
  MatView g_dec_emb{gspan.data() + layout.dec_emb, v, d};
  MatView g_dec_w{gspan.data() + layout.dec_w, d, d};
  MatView g_dec_u{gspan.data() + layout.dec_u, d, d};
  MatView g_dec_c{gspan.data() + layout.dec_c, d, d};
  std::span<double> g_dec_b{gspan.data() + layout.dec_b, d};
  MatView g_out_w{gspan.data() + layout.out_w, v, d};
  std::span<double> g_out_b{gspan.data() + layout.out_b, v};

  double loss_sum = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const EncoderStates enc = run_encoder(model, msg_ids[e]);
    const std::size_t n = enc.n;
    const std::size_t m = targets[e].size();

    // Forward pass, keeping every intermediate the backward pass needs.
    std::vector<double> zero(d, 0.0);
    std::vector<std::vector<double>> states(m + 1);  // states[0] = s_0
    states[0].assign(initial_state(enc, zero).begin(), initial_state(enc, zero).end());
    std::vector<std::vector<double>> attns(m), contexts(m), probs(m);
    for (std::size_t i = 0; i < m; ++i) {
      states[i + 1].assign(d, 0.0);
      decoder_step(model, enc, states[i], inputs[e][i], states[i + 1], &attns[i], &contexts[i]);
      probs[i] = output_dist(model, states[i + 1]);
      loss_sum += -std::log(probs[i][targets[e][i]]);
    }

    // Backward through the decoder.
    std::vector<double> d_state(d, 0.0);  // d loss / d states[i+1]
    std::vector<double> d_prev(d, 0.0);
    std::vector<double> dg(d), dc(d), tmp(d);
    std::vector<std::vector<double>> d_enc_states(n, std::vector<double>(d, 0.0));
    for (std::size_t i = m; i-- > 0;) {
      // Output layer: d logits = (p - onehot) / T.
      std::vector<double> d_logits = probs[i];
      d_logits[targets[e][i]] -= 1.0;
      for (double& x : d_logits) x *= inv_t;
      add_outer(g_out_w, d_logits, states[i + 1]);
      for (std::size_t k = 0; k < v; ++k) g_out_b[k] += d_logits[k];
      matvec_t(model.out_w(), d_logits, tmp);
      for (std::size_t k = 0; k < d; ++k) d_state[k] += tmp[k];

      // Through tanh.
      for (std::size_t k = 0; k < d; ++k) {
        dg[k] = d_state[k] * (1.0 - states[i + 1][k] * states[i + 1][k]);
      }

      add_outer(g_dec_w, dg, model.dec_embeddings().row(inputs[e][i]));
      matvec_t(model.dec_input_w(), dg, tmp);
      axpy(1.0, tmp, g_dec_emb.row(inputs[e][i]));

      add_outer(g_dec_u, dg, states[i]);
      matvec_t(model.dec_recur_w(), dg, d_prev);  // starts the s_{i-1} gradient

      add_outer(g_dec_c, dg, contexts[i]);
      matvec_t(model.dec_attn_w(), dg, dc);
      for (std::size_t k = 0; k < d; ++k) g_dec_b[k] += dg[k];

      if (n > 0) {
        // context = sum_t attn_t h_t with attn = softmax(s_{i-1} . h_t).
        const std::vector<double>& attn = attns[i];
        std::vector<double> d_attn(n);
        for (std::size_t t = 0; t < n; ++t) {
          d_attn[t] = dot(dc, enc.state(t));
          axpy(attn[t], dc, d_enc_states[t]);
        }
        double inner = 0.0;
        for (std::size_t t = 0; t < n; ++t) inner += attn[t] * d_attn[t];
        for (std::size_t t = 0; t < n; ++t) {
          const double dz = attn[t] * (d_attn[t] - inner);
          axpy(dz, enc.state(t), d_prev);          // query side (s_{i-1})
          axpy(dz, states[i], d_enc_states[t]);    // key side
        }
      }
      d_state = d_prev;
      std::fill(d_prev.begin(), d_prev.end(), 0.0);
    }

    // d_state now holds dLoss/ds_0; s_0 aliases the last encoder state.
    if (n > 0) {
      for (std::size_t k = 0; k < d; ++k) d_enc_states[n - 1][k] += d_state[k];
      std::vector<double> da(d);
      for (std::size_t t = n; t-- > 0;) {
        const auto h_t = enc.state(t);
        for (std::size_t k = 0; k < d; ++k) {
          da[k] = d_enc_states[t][k] * (1.0 - h_t[k] * h_t[k]);
        }
        add_outer(g_enc_w, da, model.enc_embeddings().row(msg_ids[e][t]));
        matvec_t(model.enc_input_w(), da, tmp);
        axpy(1.0, tmp, g_enc_emb.row(msg_ids[e][t]));
        std::span<const double> h_prev = t > 0 ? enc.state(t - 1) : std::span<const double>(zero);
        add_outer(g_enc_u, da, h_prev);
        for (std::size_t k = 0; k < d; ++k) g_enc_b[k] += da[k];
        if (t > 0) {
          matvec_t(model.enc_recur_w(), da, tmp);
          for (std::size_t k = 0; k < d; ++k) d_enc_states[t - 1][k] += tmp[k];
        }
      }
    }
  }

  if (freeze_embeddings) {
    std::fill(result.grad.begin() + static_cast<std::ptrdiff_t>(layout.enc_emb),
              result.grad.begin() + static_cast<std::ptrdiff_t>(layout.enc_emb + v * d), 0.0);
    std::fill(result.grad.begin() + static_cast<std::ptrdiff_t>(layout.dec_emb),
              result.grad.begin() + static_cast<std::ptrdiff_t>(layout.dec_emb + v * d), 0.0);
  }
  result.loss = loss_sum * inv_t;
  return result;
}

GenerationTrainer::GenerationTrainer(Seq2SeqModel model, const GenTrainConfig& config,
                                     std::size_t total_steps)
    : model_(std::move(model)),
      config_(config),
      adam_(model_.params.size(),
            AdamConfig{config.lr, config.beta1, config.beta2, 1e-8, config.warmup_fraction},
            total_steps) {}

double GenerationTrainer::train_step(std::span<const GenBatchExample> batch) {
  GenLossAndGrad lg = seq2seq_loss_gradient(model_, batch, config_.freeze_embeddings);
  if (!std::isfinite(lg.loss)) {
    throw NumericalError("generation training diverged (non-finite loss)");
  }
  adam_.step(model_.params, lg.grad);
  return lg.loss;
}

namespace {

metrics::TokenSeq truncated(const metrics::TokenSeq& seq, std::size_t max_len) {
  if (seq.size() <= max_len) return seq;
  metrics::TokenSeq out;
  out.tokens.assign(seq.tokens.begin(), seq.tokens.begin() + static_cast<std::ptrdiff_t>(max_len));
  return out;
}

}  // namespace

GenTrainResult train(std::span<const corpus::MessagePair> pairs, const GenTrainConfig& config) {
  if (pairs.empty()) throw ConfigError("generation train: no pairs");
  if (config.batch_size == 0) throw ConfigError("generation train: batch_size must be >= 1");

  std::vector<GenBatchExample> examples(pairs.size());
  std::vector<metrics::TokenSeq> all;
  all.reserve(pairs.size() * 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    examples[i].message = truncated(metrics::tokenize(pairs[i].message), config.max_len);
    examples[i].reply = truncated(metrics::tokenize(pairs[i].reply), config.max_len);
    all.push_back(examples[i].message);
    all.push_back(examples[i].reply);
  }

  Seq2SeqModel model(build_gen_vocab(all, config.max_vocab), config.embedding_dim);
  Rng rng(config.seed);
  {
    const std::size_t v = model.vocab.size();
    const std::size_t d = model.d;
    const Layout l = layout_of(v, d);
    const double emb_scale = 0.1;
    const double mat_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      if ((i >= l.enc_emb && i < l.enc_emb + v * d) || (i >= l.dec_emb && i < l.dec_emb + v * d)) {
        model.params[i] = emb_scale * rng.gaussian();
      } else if ((i >= l.enc_b && i < l.enc_b + d) || (i >= l.dec_b && i < l.dec_b + d) ||
                 (i >= l.out_b && i < l.out_b + v)) {
        model.params[i] = 0.0;
      } else {
        model.params[i] = mat_scale * rng.gaussian();
      }
    }
  }

  const std::size_t n = examples.size();
  std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  std::size_t total_steps = batches_per_epoch * config.epochs;
  if (config.max_steps > 0 && config.max_steps < total_steps) total_steps = config.max_steps;

  GenerationTrainer trainer(std::move(model), config, total_steps);
  GenTrainResult result;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<GenBatchExample> batch;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && steps < total_steps; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch && steps < total_steps; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, n);
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(examples[order[i]]);
      result.loss_curve.push_back(trainer.train_step(batch));
      ++steps;
    }
  }
  result.model = std::move(trainer.model());
  return result;
}

namespace {

struct BeamNode {
  std::vector<std::size_t> tokens;
  double log_prob = 0.0;
  bool finished = false;
  // State ready to predict the next token, plus that prediction.
  std::vector<double> state;
  std::vector<double> dist;
};

double norm_score(const BeamNode& node, double alpha) {
  if (alpha == 0.0) return node.log_prob;
  const double len = static_cast<double>(node.tokens.empty() ? 1 : node.tokens.size());
  return node.log_prob / std::pow(len, alpha);
}

bool node_before(const BeamNode& a, const BeamNode& b, double alpha) {
  const double sa = norm_score(a, alpha);
  const double sb = norm_score(b, alpha);
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;  // deterministic tie order
}

}  // namespace

std::vector<Hypothesis> beam_search(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                                    const DecodeConfig& config) {
  if (config.beam_width == 0) throw ConfigError("beam_width must be >= 1");
  if (config.max_len == 0) throw ConfigError("max_len must be >= 1");

  const std::vector<std::size_t> msg_ids = to_ids(model.vocab, message);
  const EncoderStates enc = run_encoder(model, msg_ids);
  std::vector<double> zero(model.d, 0.0);

  BeamNode root;
  root.state.assign(model.d, 0.0);
  {
    const std::span<const double> s0 = initial_state(enc, zero);
    decoder_step(model, enc, s0, GenVocab::kBos, root.state, nullptr, nullptr);
  }
  root.dist = output_dist(model, root.state);

  std::vector<BeamNode> live{std::move(root)};
  std::vector<BeamNode> finished;

  // Depth max_len + 1 is the forced finish: only EOS may extend.
  for (std::size_t depth = 1; depth <= config.max_len + 1 && !live.empty(); ++depth) {
    std::vector<BeamNode> pool = finished;
    const bool forced = depth == config.max_len + 1;
    for (const BeamNode& node : live) {
      for (std::size_t tok = 0; tok < model.vocab.size(); ++tok) {
        if (tok == GenVocab::kPad || tok == GenVocab::kBos) continue;
        if (forced && tok != GenVocab::kEos) continue;
        BeamNode child;
        child.tokens = node.tokens;
        child.tokens.push_back(tok);
        child.log_prob = node.log_prob + std::log(node.dist[tok]);
        child.finished = tok == GenVocab::kEos;
        if (!child.finished) child.state = node.state;  // parent state, advanced below
        pool.push_back(std::move(child));
      }
    }
    std::sort(pool.begin(), pool.end(),
              [&](const BeamNode& a, const BeamNode& b) { return node_before(a, b, config.length_norm_alpha); });
    if (pool.size() > config.beam_width) pool.resize(config.beam_width);

    finished.clear();
    live.clear();
    for (BeamNode& node : pool) {
      if (node.finished) {
        finished.push_back(std::move(node));
      } else {
        // Advance the decoder for survivors only.
        std::vector<double> new_state(model.d);
        decoder_step(model, enc, node.state, node.tokens.back(), new_state, nullptr, nullptr);
        node.state = std::move(new_state);
        node.dist = output_dist(model, node.state);
        live.push_back(std::move(node));
      }
    }
  }

  std::sort(finished.begin(), finished.end(),
            [&](const BeamNode& a, const BeamNode& b) { return node_before(a, b, config.length_norm_alpha); });
  std::vector<Hypothesis> out;
  out.reserve(finished.size());
  for (BeamNode& node : finished) {
    Hypothesis h;
    h.token_ids = std::move(node.tokens);
    h.log_prob = node.log_prob;
    h.finished = true;
    out.push_back(std::move(h));
  }
  return out;
}

std::string hypothesis_text(const GenVocab& vocab, const Hypothesis& hypothesis) {
  std::string out;
  for (std::size_t id : hypothesis.token_ids) {
    if (id == GenVocab::kEos) break;
    if (!out.empty()) out.push_back(' ');
    out += vocab.tokens[id];
  }
  return out;
}

std::string serialize(const Seq2SeqModel& model) {
  BinaryWriter w;
  w.magic("RKGEN001");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.d));
  w.u64(model.vocab.size());
  for (const std::string& tok : model.vocab.tokens) w.str(tok);
  w.f64_span(model.params);
  return w.bytes();
}

Seq2SeqModel deserialize_model(const std::string& bytes) {
  BinaryReader r(bytes);
  r.expect_magic("RKGEN001", "generation model");
  const std::uint32_t version = r.u32();
  if (version != 1) throw DataError("unsupported generation model version");
  const std::size_t d = r.u32();
  const std::uint64_t v = r.u64();
  if (v < GenVocab::kSpecials) throw DataError("generation model vocab too small");
  GenVocab vocab;
  vocab.tokens.reserve(v);
  for (std::uint64_t i = 0; i < v; ++i) vocab.tokens.push_back(r.str());
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) vocab.index[vocab.tokens[i]] = i;
  Seq2SeqModel model(std::move(vocab), d);
  r.f64_span(model.params);
  return model;
}

void save(const Seq2SeqModel& model, const std::string& path) {
  write_file_atomic(path, serialize(model));
}

Seq2SeqModel load_model(const std::string& path) {
  return deserialize_model(read_file(path));
}

}  // namespace replykit::generation
