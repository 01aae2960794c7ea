#include "replykit/optim.hpp"

#include <cmath>

#include "replykit/error.hpp"

namespace replykit {

Adam::Adam(std::size_t n_params, AdamConfig cfg, std::size_t total_steps)
    : cfg_(cfg),
      total_steps_(total_steps),
      m_(n_params, 0.0),
      v_(n_params, 0.0) {
  if (cfg_.lr < 0.0) throw ConfigError("learning rate must be >= 0");
  warmup_steps_ = static_cast<std::size_t>(std::ceil(cfg_.warmup_fraction * static_cast<double>(total_steps)));
}

double Adam::current_lr() const {
  const std::size_t next = t_ + 1;
  if (warmup_steps_ > 0 && next <= warmup_steps_) {
    return cfg_.lr * static_cast<double>(next) / static_cast<double>(warmup_steps_);
  }
  return cfg_.lr;
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  const double lr_t = current_lr();
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr_t * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

}  // namespace replykit
