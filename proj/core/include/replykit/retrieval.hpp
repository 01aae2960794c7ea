#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "replykit/corpus.hpp"
#include "replykit/linalg.hpp"
#include "replykit/metrics.hpp"

namespace replykit::retrieval {

struct Vocab {
  std::vector<std::string> tokens;  // index -> token, lexicographically sorted
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tokens.size(); }
  // Out-of-vocabulary tokens share one extra embedding row.
  std::size_t unk_row() const { return tokens.size(); }
  std::size_t row_for(const std::string& token) const {
    auto it = index.find(token);
    return it != index.end() ? it->second : unk_row();
  }
};

// Most frequent tokens (ties broken lexicographically), then re-sorted so
// indices are stable across runs.
Vocab build_vocab(std::span<const metrics::TokenSeq> seqs, std::size_t max_size);

enum class Side { Message, Reply };

// Dual encoder: mean of token embeddings followed by a linear projection,
// separate parameter sets per side, scored by dot product. All weights live
// in one flat block so the optimizer and gradient checks see a single vector.
struct RetrievalModel {
  Vocab vocab;
  std::size_t d = 64;
  std::vector<double> params;

  RetrievalModel() = default;
  RetrievalModel(Vocab vocab, std::size_t dim);

  std::size_t embedding_rows() const { return vocab.size() + 1; }
  MatView embeddings(Side side);
  ConstMatView embeddings(Side side) const;
  MatView projection(Side side);
  ConstMatView projection(Side side) const;

  // Block spans inside a params-shaped vector (used for gradients too).
  std::span<double> block_embeddings(std::span<double> flat, Side side) const;
  std::span<double> block_projection(std::span<double> flat, Side side) const;
};

std::vector<double> encode(const RetrievalModel& model, Side side, const metrics::TokenSeq& tokens);

double relevance(const RetrievalModel& model, const metrics::TokenSeq& message,
                 const metrics::TokenSeq& reply);

// Batch relevance matrix; values[i*n + j] = dot(enc_x(msg_i), enc_y(rep_j)).
struct ScoreMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

ScoreMatrix score_batch(const RetrievalModel& model, std::span<const metrics::TokenSeq> messages,
                        std::span<const metrics::TokenSeq> replies);

// MeanLog optimizes the mean negative log of each in-batch ratio (the stable
// softmax-family form). RawRatio keeps the summed-ratio objective for
// comparison, reported as mean(1 - ratio) so both losses are >= 0 with
// minimum 0 when off-diagonal mass vanishes.
enum class Objective { MeanLog, RawRatio };

// In-batch contrastive loss whose denominator sums scores in both directions,
// minus the shared diagonal term. Computed in log space with max subtraction.
double symmetric_loss(const ScoreMatrix& scores, Objective objective = Objective::MeanLog);

// dLoss/dTheta, same shape as the score matrix.
std::vector<double> symmetric_loss_grad(const ScoreMatrix& scores,
                                        Objective objective = Objective::MeanLog);

struct FreezeMask {
  bool embeddings_message = false;
  bool projection_message = false;
  bool embeddings_reply = false;
  bool projection_reply = false;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // flat, same layout as model.params
};

// Exact analytic gradient of symmetric_loss(score_batch(...)) for one batch.
LossAndGrad loss_gradient(const RetrievalModel& model,
                          std::span<const metrics::TokenSeq> messages,
                          std::span<const metrics::TokenSeq> replies,
                          Objective objective = Objective::MeanLog,
                          const FreezeMask& freeze = {});

struct TrainConfig {
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0 = no cap
  double warmup_fraction = 0.01;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 64;
  std::size_t max_vocab = 50000;
  Objective objective = Objective::MeanLog;
  FreezeMask freeze;
};

struct TrainResult {
  RetrievalModel model;
  std::vector<double> loss_curve;  // one entry per step
};

// Deterministic given the seed: vocab build, init and per-epoch batch order
// all come from it. Aborts with NumericalError if the loss goes non-finite.
TrainResult train(std::span<const corpus::MessagePair> pairs, const TrainConfig& config);

// Precomputed reply-side vectors for a fixed response set, stamped with the
// hash of the parameters that produced them.
struct ResponseIndex {
  corpus::ResponseSet responses;
  std::size_t d = 0;
  std::vector<double> vectors;  // row-major |responses| x d
  std::uint64_t params_hash = 0;

  std::span<const double> row(std::size_t r) const { return {vectors.data() + r * d, d}; }
};

std::uint64_t params_hash(const RetrievalModel& model);

ResponseIndex build_index(const RetrievalModel& model, const corpus::ResponseSet& responses,
                          unsigned threads = 1);

// Exact top-k by brute-force dot products. Ties keep response-set order.
// Throws if the index was built from different parameters.
std::vector<std::pair<std::string, double>> top_k(const RetrievalModel& model,
                                                  const ResponseIndex& index,
                                                  const metrics::TokenSeq& message,
                                                  std::size_t k = 3);

std::string serialize(const RetrievalModel& model);
RetrievalModel deserialize_model(const std::string& bytes);
void save(const RetrievalModel& model, const std::string& path);
RetrievalModel load_model(const std::string& path);

void save_index(const ResponseIndex& index, const std::string& path);
ResponseIndex load_index(const std::string& path);

}  // namespace replykit::retrieval
