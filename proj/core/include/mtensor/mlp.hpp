#pragma once

// Bias-free sine perceptrons mapping one scalar coordinate to a vector:
//
//   y = H_d sin(w0 H_{d-1} ... sin(w0 H_1 x))
//
// The activation is applied after every layer except the last.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mtensor/tensor.hpp"

namespace mtensor {

struct MlpConfig {
  Index depth = 4;
  Index hidden = 64;
  Index out_dim = 1;
  double omega0 = 5.0;
};

/// Per-layer inputs and pre-activations retained by forward for backward.
struct MlpCache {
  std::vector<Matrix> inputs;  // inputs[i] feeds layer i, one column per sample
  std::vector<Matrix> pre;     // pre[i] = H_i * inputs[i] for hidden layers
};

using MlpGradients = std::vector<Matrix>;

class Mlp {
public:
  Mlp() = default;
  /// Sine-network initialization: uniform(+-sqrt(6 / fan_in) / omega0).
  Mlp(const MlpConfig& config, std::mt19937_64& rng);
  Mlp(std::vector<Matrix> weights, double omega0);

  static Mlp zeros(const MlpConfig& config);

  Index depth() const { return weights_.size(); }
  Index out_dim() const;
  Index hidden() const;
  double omega0() const { return omega0_; }
  Index parameter_count() const;

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }

  /// Output for one coordinate.
  Vector forward(double x, MlpCache* cache = nullptr) const;
  /// Outputs for many coordinates, out_dim x xs.size().
  Matrix forward_batch(std::span<const double> xs, MlpCache* cache = nullptr) const;

  /// Gradients of sum_b cotangent(:, b)^T y_b with respect to every H_i.
  MlpGradients backward(const MlpCache& cache, const Matrix& cotangent) const;
  MlpGradients backward(const MlpCache& cache, const Vector& cotangent) const;

  /// Entrywise l1 norm of every weight matrix.
  std::vector<double> layer_l1_norms() const;

private:
  void validate() const;

  std::vector<Matrix> weights_;
  double omega0_ = 5.0;
};

/// Largest entrywise l1 norm over all weight matrices of all networks.
double weight_l1_max(std::span<const Mlp> nets);

struct LipschitzCert {
  double omega = 0.0;  // weight l1 bound
  double kappa = 0.0;  // activation Lipschitz constant
  double zeta = 0.0;   // sup-norm bound of admissible coordinates
  Index order = 0;
  Index depth = 0;
  double delta = 0.0;
};

/// delta = sqrt(2) * omega^(N d) * kappa^(N d - N) * zeta^(N - 1).
LipschitzCert lipschitz_bound(double omega, double kappa, double zeta, Index order, Index depth);

}  // namespace mtensor
