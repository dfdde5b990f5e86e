#pragma once

#include <span>
#include <vector>

#include "mtensor/tensor.hpp"

namespace mtensor {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameter matrices. Moment
/// accumulators are created on the first step and must keep their shapes.
class Adam {
public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix> grads);

  Index steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }
  void reset();

private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  Index t_ = 0;
};

}  // namespace mtensor
