#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace replykit {

// Adam with linear warmup, shared by the retrieval and generation trainers.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Fraction of total steps ramping the rate linearly from 0 to lr.
  double warmup_fraction = 0.01;
};

class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig cfg, std::size_t total_steps);

  // One update; grad and params must match n_params.
  void step(std::span<double> params, std::span<const double> grad);

  std::size_t steps_taken() const { return t_; }
  double current_lr() const;  // rate the *next* step will use

 private:
  AdamConfig cfg_;
  std::size_t total_steps_;
  std::size_t warmup_steps_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace replykit
