#pragma once

// Robust tensor completion with an IMTD model:
//
//   min ||P_mask(A_theta + E - M)||_F^2 + lambda TV(A_theta) + gamma ||E||_1
//
// solved by PALS. TV is the anisotropic first-difference l1 norm, smoothed as
// sqrt(d^2 + eps^2) - eps so the theta block can use plain gradients.

#include <cstdint>
#include <optional>
#include <vector>

#include "mtensor/imtd.hpp"
#include "mtensor/pals.hpp"
#include "mtensor/tensor.hpp"

namespace mtensor {

struct ObservationMask {
  Shape shape;
  MaskBits observed;
  double sampling_rate = 1.0;
  std::uint64_t seed = 0;

  Index observed_count() const;
  double fraction() const;
};

struct Corruption {
  DenseTensor observed;  // entries off the mask are zero
  ObservationMask mask;
  Index noisy_count = 0;
};

/// Keeps round(sr * numel) entries chosen uniformly at random, then replaces
/// round(sigma * kept) of them by 0 or peak with equal probability.
Corruption corrupt(const DenseTensor& x, double sr, double sigma, std::uint64_t seed, double peak = 1.0);

/// multiple_product of random factors at `ranks`, mapped affinely onto [0, 1]
/// (so the Multiple rank grows by at most one per mode). Every factor fiber
/// along the long index is a random three-harmonic trigonometric curve.
DenseTensor planted_tensor(const Shape& shape, const Shape& ranks, std::uint64_t seed);

struct TvValue {
  double value = 0.0;
  DenseTensor gradient;
};

/// Smoothed anisotropic TV: sum over modes and neighbour pairs of
/// sqrt(d^2 + eps^2) - eps, with its exact gradient.
TvValue tv_l1(const DenseTensor& x, double eps);

inline constexpr double kDefaultTvEps = 1e-4;

struct NetShape {
  Index depth = 4;
  Index hidden = 64;
  double omega0 = 5.0;
};

struct RtcProblem {
  DenseTensor observed;
  ObservationMask mask;
  double peak = 1.0;
  PalsConfig config;
  Shape ranks;
  double tv_eps = kDefaultTvEps;
  NetShape net;
};

/// rank_bounds(shape).recommended per mode, clamped to [1, 24].
Shape default_ranks(const Shape& shape);
inline constexpr double kDefaultGammaScale = 1e-1;
/// kDefaultGammaScale * ||M||_F / sqrt(numel), M zero off the mask.
double default_gamma(const DenseTensor& observed, const ObservationMask& mask);

struct RtcResult {
  DenseTensor recovered;  // clamped to [0, peak]
  DenseTensor sparse;
  std::vector<PalsRecord> history;
  ImtdModel model;
  bool converged = false;
};

RtcResult rtc_recover(const RtcProblem& p, const PalsObserver& observer = {});

}  // namespace mtensor
