#include "adam.hpp"

#include <cmath>
#include <string>

#include "common.hpp"

namespace rmcl {

AdamState::AdamState(const std::vector<std::span<const double>>& params,
                     const AdamConfig& cfg)
    : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& span : params) {
    m_.emplace_back(span.size(), 0.0);
    v_.emplace_back(span.size(), 0.0);
  }
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw config_error("adam_step: tensor count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != m_[t].size() || grads[t].size() != m_[t].size())
      throw config_error("adam_step: shape mismatch at tensor " +
                         std::to_string(t));
    for (double g : grads[t])
      if (!std::isfinite(g))
        throw numeric_error("adam_step: non-finite gradient in tensor " +
                            std::to_string(t));
  }

  step_ += 1;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* m = m_[t].data();
    double* v = v_[t].data();
    double* p = params[t].data();
    const double* g = grads[t].data();
    const std::size_t n = m_[t].size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / corr1;
      const double v_hat = v[i] / corr2;
      p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace rmcl
