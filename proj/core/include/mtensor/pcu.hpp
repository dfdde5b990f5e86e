#pragma once

// Point-cloud upsampling with an IMTD signed-distance function. Training
// minimizes
//
//   mean_{x in P} |s(x)| + lambda mean_v | ||grad s(v)||^2 - 1 | + gamma mean_w exp(-|s(w)|)
//
// with v uniform in the normalized box and w uniform outside an r_excl ball
// around every observed point. Gradients of s come from a central-difference
// stencil; |.| is Charbonnier-smoothed. Dense clouds are the candidates whose
// SDF magnitude falls below tau.
//
// Planar (2-D) clouds use three factor networks with the third coordinate held
// fixed: with two modes the Multiple product factorizes into a rank-1 function.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "mtensor/adam.hpp"
#include "mtensor/imtd.hpp"
#include "mtensor/tensor.hpp"

namespace mtensor {

/// x_normalized = (x - center) / scale.
struct Normalization {
  Vector center;
  double scale = 1.0;

  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& normalized) const;
};

/// Points are stored column-wise (dim x count) in raw coordinates.
struct PointCloud {
  Matrix points;
  Normalization norm;

  Index dim() const { return static_cast<Index>(points.rows()); }
  Index size() const { return static_cast<Index>(points.cols()); }
  Matrix normalized() const { return norm.apply(points); }
};

inline constexpr double kCloudHalfExtent = 0.8;

/// Centers the bounding box and scales its largest half-side to `half_extent`.
PointCloud make_cloud(Matrix raw, double half_extent = kCloudHalfExtent);

struct PcuConfig {
  double lambda = 0.3;  // eikonal weight
  double gamma = 0.1;   // exterior weight
  double tau = 0.02;
  Index n_eikonal = 128;
  Index n_exterior = 128;
  double fd_step = 1e-3;
  double r_excl = 0.05;
  Index candidates = 100000;
  Index steps = 800;
  AdamConfig adam{};
  Shape ranks;  // empty means default_pcu_ranks
  Index depth = 4;
  Index hidden = 32;
  double omega0 = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// pcu_rank_bound(count) clamped to [4, 16].
Index default_pcu_rank(Index num_points);

/// An SDF over the normalized box [-1, 1]^dim.
struct SdfModel {
  ImtdModel imtd;
  Index dim = 3;

  /// Values at `points` (dim x B, normalized coordinates).
  Vector eval(const Matrix& points) const;
  /// Gradients of sum_b cotangent_b s(points(:, b)).
  ImtdGradients backward(const Matrix& points, const Vector& cotangent) const;
};

/// Domain half-width of the factor networks; a little beyond the box so
/// stencils at the boundary stay inside.
inline constexpr double kSdfDomain = 1.1;
/// Network coordinate of the fixed extra mode of planar models.
inline constexpr double kPlanarCoordinate = 0.0;

SdfModel make_sdf_model(Index dim, const PcuConfig& cfg, Index num_points);

struct SdfLoss {
  double value = 0.0;
  double data = 0.0;
  double eikonal = 0.0;   // already multiplied by lambda
  double exterior = 0.0;  // already multiplied by gamma
  ImtdGradients grads;
};

/// Loss and parameter gradients for normalized observed points (dim x p).
/// Monte Carlo samples are drawn from `sample_seed`.
SdfLoss sdf_loss(const SdfModel& model, const Matrix& observed, const PcuConfig& cfg, std::uint64_t sample_seed);

/// Uniform samples of [-1, 1]^dim farther than r_excl from every observed point.
Matrix exterior_samples(const Matrix& observed, Index count, double r_excl, std::mt19937_64& rng);

struct PcuFit {
  SdfModel model;
  std::vector<double> loss_history;
};

/// Trains an SDF on the normalized points of `cloud`.
PcuFit train_sdf(const PointCloud& cloud, const PcuConfig& cfg);

/// Uniform candidates in the normalized box with |s| < tau, returned in the raw
/// coordinates of `norm`. Throws when nothing survives.
PointCloud extract_points(const SdfModel& model, const Normalization& norm, const PcuConfig& cfg);

/// Mean nearest-neighbour distance from p to q plus from q to p.
double chamfer(const Matrix& p, const Matrix& q);
/// Harmonic mean of precision (p near q) and recall (q near p) at distance d.
double f_score(const Matrix& p, const Matrix& q, double d);

/// Whitespace-separated XYZ (or XY) text, one point per line.
Matrix read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const Matrix& points);

/// Fixtures.
Matrix circle_points(Index count, double radius = 1.0);
/// Polar star r(t) = radius (1 + depth cos(arms t)), sampled uniformly in t.
Matrix star_points(Index count, double radius = 1.0, double depth = 0.3, int arms = 5);
/// Fibonacci lattice on a sphere.
Matrix sphere_points(Index count, double radius = 1.0);
/// Random subset of round(rate * count) columns (at least one).
Matrix subsample(const Matrix& points, double rate, std::uint64_t seed);

}  // namespace mtensor
