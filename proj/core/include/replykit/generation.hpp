#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "replykit/corpus.hpp"
#include "replykit/linalg.hpp"
#include "replykit/metrics.hpp"
#include "replykit/optim.hpp"

namespace replykit::generation {

// Shared vocabulary with the four specials at fixed ids.
struct GenVocab {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kSpecials = 4;

  std::vector<std::string> tokens;  // specials first, then content sorted
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tokens.size(); }
  std::size_t id_for(const std::string& token) const {
    auto it = index.find(token);
    return it != index.end() ? it->second : kUnk;
  }
};

GenVocab build_gen_vocab(std::span<const metrics::TokenSeq> seqs, std::size_t max_content);

std::vector<std::size_t> to_ids(const GenVocab& vocab, const metrics::TokenSeq& seq);

// Single-layer recurrent encoder/decoder with dot-product attention. One flat
// parameter block:
//   enc embeddings | enc W,U,b | dec embeddings | dec W,U,C(attention),b |
//   output W,b
struct Seq2SeqModel {
  GenVocab vocab;
  std::size_t d = 64;
  std::vector<double> params;

  Seq2SeqModel() = default;
  Seq2SeqModel(GenVocab vocab, std::size_t dim);

  MatView enc_embeddings();
  MatView enc_input_w();
  MatView enc_recur_w();
  std::span<double> enc_bias();
  MatView dec_embeddings();
  MatView dec_input_w();
  MatView dec_recur_w();
  MatView dec_attn_w();
  std::span<double> dec_bias();
  MatView out_w();
  std::span<double> out_bias();

  ConstMatView enc_embeddings() const;
  ConstMatView enc_input_w() const;
  ConstMatView enc_recur_w() const;
  std::span<const double> enc_bias() const;
  ConstMatView dec_embeddings() const;
  ConstMatView dec_input_w() const;
  ConstMatView dec_recur_w() const;
  ConstMatView dec_attn_w() const;
  std::span<const double> dec_bias() const;
  ConstMatView out_w() const;
  std::span<const double> out_bias() const;
};

// Softmax output over the vocabulary; sums to 1 within 1e-6.
std::vector<double> next_token_dist(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                                    std::span<const std::size_t> prefix_ids);

// Sum of per-step log probabilities. The target must end with EOS.
double sequence_log_prob(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                         std::span<const std::size_t> target_ids);

// Convenience: log probability of the tokenized reply followed by EOS.
double reply_log_prob(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                      const metrics::TokenSeq& reply);

struct GenLossAndGrad {
  double loss = 0.0;  // mean token cross-entropy over the batch
  std::size_t target_tokens = 0;
  std::vector<double> grad;
};

struct GenBatchExample {
  metrics::TokenSeq message;
  metrics::TokenSeq reply;
};

// Teacher-forced cross-entropy and its exact gradient via backprop through
// time. freeze_embeddings zeroes both embedding blocks.
GenLossAndGrad seq2seq_loss_gradient(const Seq2SeqModel& model,
                                     std::span<const GenBatchExample> batch,
                                     bool freeze_embeddings = false);

struct GenTrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0 = no cap
  double warmup_fraction = 0.01;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 64;
  std::size_t max_vocab = 20000;
  std::size_t max_len = 32;  // training-time truncation of either side
  bool freeze_embeddings = false;
};

struct GenTrainResult {
  Seq2SeqModel model;
  std::vector<double> loss_curve;
};

GenTrainResult train(std::span<const corpus::MessagePair> pairs, const GenTrainConfig& config);

// Incremental trainer when callers drive their own batches; same optimizer
// contract as the retrieval side.
class GenerationTrainer {
 public:
  GenerationTrainer(Seq2SeqModel model, const GenTrainConfig& config, std::size_t total_steps);

  // One update; returns the batch's mean token cross-entropy.
  double train_step(std::span<const GenBatchExample> batch);

  Seq2SeqModel& model() { return model_; }
  const Seq2SeqModel& model() const { return model_; }

 private:
  Seq2SeqModel model_;
  GenTrainConfig config_;
  Adam adam_;
};

struct Hypothesis {
  std::vector<std::size_t> token_ids;  // includes the final EOS once finished
  double log_prob = 0.0;
  bool finished = false;
};

struct DecodeConfig {
  std::size_t beam_width = 3;
  std::size_t max_len = 32;  // content tokens before EOS is forced
  double length_norm_alpha = 0.0;
};

// Standard beam search over every token except PAD and BOS. Finished
// hypotheses compete in the beam; anything still live at max_len gets EOS
// appended with its model probability. Returns up to beam_width finished
// hypotheses, best first.
std::vector<Hypothesis> beam_search(const Seq2SeqModel& model, const metrics::TokenSeq& message,
                                    const DecodeConfig& config);

// Hypothesis tokens as text, EOS stripped, joined with single spaces.
std::string hypothesis_text(const GenVocab& vocab, const Hypothesis& hypothesis);

std::string serialize(const Seq2SeqModel& model);
Seq2SeqModel deserialize_model(const std::string& bytes);
void save(const Seq2SeqModel& model, const std::string& path);
Seq2SeqModel load_model(const std::string& path);

}  // namespace replykit::generation
