#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "replykit/generation.hpp"
#include "replykit/metrics.hpp"
#include "replykit/rng.hpp"

namespace replykit::testsupport {

// Brute-force decoder: enumerates every content-token sequence up to max_len,
// terminates each with EOS at its model probability, and sorts by raw log
// probability. Ground truth for beam search on tiny vocabularies.
inline std::vector<generation::Hypothesis> exhaustive_decode(
    const generation::Seq2SeqModel& model, const metrics::TokenSeq& message,
    std::size_t max_len) {
  using generation::GenVocab;
  std::vector<std::size_t> expandable;
  for (std::size_t tok = 0; tok < model.vocab.size(); ++tok) {
    if (tok != GenVocab::kPad && tok != GenVocab::kBos && tok != GenVocab::kEos) {
      expandable.push_back(tok);
    }
  }

  std::vector<generation::Hypothesis> out;
  std::vector<std::size_t> prefix;

  auto close_with_eos = [&](double prefix_logp) {
    const std::vector<double> p = generation::next_token_dist(model, message, prefix);
    generation::Hypothesis h;
    h.token_ids = prefix;
    h.token_ids.push_back(GenVocab::kEos);
    h.log_prob = prefix_logp + std::log(p[GenVocab::kEos]);
    h.finished = true;
    out.push_back(std::move(h));
  };

  // DFS over content prefixes, scoring each completion.
  auto dfs = [&](auto&& self, double prefix_logp) -> void {
    close_with_eos(prefix_logp);
    if (prefix.size() == max_len) return;
    const std::vector<double> p = generation::next_token_dist(model, message, prefix);
    for (std::size_t tok : expandable) {
      prefix.push_back(tok);
      self(self, prefix_logp + std::log(p[tok]));
      prefix.pop_back();
    }
  };
  dfs(dfs, 0.0);

  std::sort(out.begin(), out.end(), [](const generation::Hypothesis& a, const generation::Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.token_ids < b.token_ids;
  });
  return out;
}

// Random tiny seq2seq model for decoder tests.
inline generation::Seq2SeqModel random_gen_model(std::size_t content_tokens, std::size_t d,
                                                 std::uint64_t seed) {
  std::vector<metrics::TokenSeq> seqs(1);
  for (std::size_t i = 0; i < content_tokens; ++i) {
    seqs[0].tokens.push_back(std::string(1, static_cast<char>('a' + i)));
  }
  generation::Seq2SeqModel model(generation::build_gen_vocab(seqs, content_tokens), d);
  Rng rng(seed);
  for (double& p : model.params) p = 0.6 * rng.gaussian();
  return model;
}

}  // namespace replykit::testsupport
