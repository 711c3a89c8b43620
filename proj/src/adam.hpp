#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matrix.hpp"

namespace rmcl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Moment buffers mirror the parameter
// tensors they were built from; step increments by one per update.
class AdamState {
 public:
  AdamState(const std::vector<std::span<const double>>& params,
            const AdamConfig& cfg);

  // params and grads must match the shapes this state was created with.
  // Throws numeric_error naming the offending tensor on non-finite gradients.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Vec>& first_moments() const { return m_; }
  const std::vector<Vec>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
  std::uint64_t step_ = 0;
};

}  // namespace rmcl
