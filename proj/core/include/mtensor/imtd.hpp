#pragma once

// Implicit Multiple tensor decomposition: factor n is a sine network of the
// single coordinate x_n whose output, reshaped in column-major order over the
// ranks (r_k)_{k != n}, is the factor slice A_n(.., x_n, ..). The tensor
// function value at x is the full contraction of the N slices.
//
// Coordinates are mapped affinely from each domain onto kCoordinateRange
// before entering a network. The range excludes zero: a bias-free sine network
// vanishes at the origin, so a symmetric range would pin one slice of every
// mode to zero.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mtensor/mlp.hpp"
#include "mtensor/multiple.hpp"
#include "mtensor/tensor.hpp"

namespace mtensor {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Interval&) const = default;
};

inline constexpr Interval kCoordinateRange{1.0, 3.0};

struct ImtdConfig {
  Shape ranks;
  std::vector<Interval> domains;
  Index depth = 4;
  Index hidden = 64;
  double omega0 = 5.0;
};

using ImtdGradients = std::vector<MlpGradients>;
using GridCoords = std::vector<std::vector<double>>;

class ImtdModel {
public:
  ImtdModel() = default;
  ImtdModel(Shape ranks, std::vector<Interval> domains, std::vector<Mlp> nets);

  static ImtdModel random(const ImtdConfig& config, std::mt19937_64& rng);
  static ImtdModel zeros(const ImtdConfig& config);

  Index order() const { return ranks_.size(); }
  const Shape& ranks() const { return ranks_; }
  const std::vector<Interval>& domains() const { return domains_; }
  const std::vector<Mlp>& nets() const { return nets_; }
  std::vector<Mlp>& nets() { return nets_; }

  /// prod_{k != mode} r_k, the output length of network `mode`.
  Index slice_size(Index mode) const;

  /// Domain coordinate -> network input.
  double normalize(Index mode, double x) const;
  /// Sup-norm bound of network inputs over the domains.
  double zeta() const;

  std::vector<Matrix*> parameters();
  Index parameter_count() const;

private:
  void validate() const;

  Shape ranks_;
  std::vector<Interval> domains_;
  std::vector<Mlp> nets_;
};

/// Flattens per-network gradients into the order of ImtdModel::parameters().
std::vector<Matrix> flatten(const ImtdGradients& g);

double eval_point(const ImtdModel& m, std::span<const double> x);

/// Evaluates every column of `points` (N x B, domain coordinates).
Vector eval_points(const ImtdModel& m, const Matrix& points);

/// Gradients of sum_b cotangent_b f(points(:, b)).
ImtdGradients points_backward(const ImtdModel& m, const Matrix& points, const Vector& cotangent);

/// Cached forward pass over a coordinate grid.
struct GridForward {
  MultipleFactors factors;
  std::vector<MlpCache> caches;
  DenseTensor value;
};

GridForward forward_grid(const ImtdModel& m, const GridCoords& coords);
ImtdGradients backward_grid(const ImtdModel& m, const GridForward& fwd, const DenseTensor& cotangent);

/// Stacked factor evaluations; their Multiple product is eval_grid.
MultipleFactors eval_factors(const ImtdModel& m, const GridCoords& coords);
DenseTensor eval_grid(const ImtdModel& m, const GridCoords& coords);
/// Gradients of <cotangent, eval_grid(m, coords)>.
ImtdGradients grid_backward(const ImtdModel& m, const GridCoords& coords, const DenseTensor& cotangent);

/// Integer coordinates 1..I_n per mode and the matching domains [1, I_n].
GridCoords index_grid(const Shape& shape);
std::vector<Interval> index_domains(const Shape& shape);

/// Largest |f(x) - f(y)| / ||x - y|| over random pairs of network-input
/// coordinates drawn uniformly from kCoordinateRange^N.
double empirical_lipschitz(const ImtdModel& m, Index n_pairs, std::uint64_t seed);

/// Lipschitz certificate in network-input coordinates: measured weight bound,
/// kappa = omega0 and zeta = sup |coordinate|.
LipschitzCert certificate(const ImtdModel& m);

/// Jacobian of vec(eval_grid) with respect to all weights (numel x params).
/// Intended for toy models only.
Matrix grid_jacobian(const ImtdModel& m, const GridCoords& coords);

/// Numerical rank of a matrix with the usual max(rows, cols) * eps * sigma_max cutoff.
Index numerical_rank(const Matrix& a);

}  // namespace mtensor
