#include "mtensor/rtc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mtensor/multiple.hpp"

namespace mtensor {

Index ObservationMask::observed_count() const {
  return static_cast<Index>(std::count_if(observed.begin(), observed.end(), [](std::uint8_t b) { return b != 0; }));
}

double ObservationMask::fraction() const {
  return observed.empty() ? 0.0 : static_cast<double>(observed_count()) / static_cast<double>(observed.size());
}

Corruption corrupt(const DenseTensor& x, double sr, double sigma, std::uint64_t seed, double peak) {
  if (!(sr > 0.0 && sr <= 1.0)) throw std::invalid_argument("corrupt: sampling rate must lie in (0, 1]");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("corrupt: noise level must lie in [0, 1]");
  if (!(peak > 0.0)) throw std::invalid_argument("corrupt: peak must be positive");

  std::mt19937_64 rng(seed);
  const Index numel = x.numel();
  std::vector<Index> order(numel);
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  const Index kept = std::clamp<Index>(static_cast<Index>(std::llround(sr * static_cast<double>(numel))), 1, numel);
  Corruption c;
  c.observed = DenseTensor(x.shape());
  c.mask.shape = x.shape();
  c.mask.observed.assign(numel, 0);
  c.mask.sampling_rate = sr;
  c.mask.seed = seed;
  for (Index j = 0; j < kept; ++j) {
    const Index i = order[j];
    c.mask.observed[i] = 1;
    c.observed[i] = x[i];
  }

  // Salt and pepper among the kept entries.
  std::vector<Index> kept_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kept));
  std::shuffle(kept_idx.begin(), kept_idx.end(), rng);
  c.noisy_count = std::min<Index>(kept, static_cast<Index>(std::llround(sigma * static_cast<double>(kept))));
  std::bernoulli_distribution coin(0.5);
  for (Index j = 0; j < c.noisy_count; ++j) c.observed[kept_idx[j]] = coin(rng) ? peak : 0.0;
  return c;
}

DenseTensor planted_tensor(const Shape& shape, const Shape& ranks, std::uint64_t seed) {
  constexpr int kHarmonics = 3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> level(-0.5, 0.5);
  MultipleFactors f = MultipleFactors::zeros(shape, ranks);
  for (Index n = 0; n < f.order(); ++n) {
    Matrix m = unfold(f.factors[n], n);
    const auto len = m.rows();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double a[kHarmonics], b[kHarmonics], bound = 0.0;
      for (int h = 0; h < kHarmonics; ++h) {
        a[h] = coef(rng);
        b[h] = coef(rng);
        bound += 2.0 / (h + 1);
      }
      const double c = level(rng);
      for (Eigen::Index i = 0; i < len; ++i) {
        const double t = len > 1 ? static_cast<double>(i) / static_cast<double>(len - 1) : 0.0;
        double v = 0.0;
        for (int h = 0; h < kHarmonics; ++h) {
          v += (a[h] * std::cos(std::numbers::pi * (h + 1) * t) + b[h] * std::sin(std::numbers::pi * (h + 1) * t)) / (h + 1);
        }
        m(i, j) = c + 0.5 * v / bound;
      }
    }
    f.factors[n] = fold(m, n, f.factors[n].shape());
  }
  DenseTensor x = multiple_product(f);
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  const double base = *lo, span = *hi - *lo;
  for (double& v : x.data()) v = span > 0.0 ? (v - base) / span : 0.0;
  return x;
}

TvValue tv_l1(const DenseTensor& x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("tv_l1: eps must be positive");
  TvValue out{0.0, DenseTensor(x.shape())};
  const Shape& shape = x.shape();
  for (Index n = 0; n < shape.size(); ++n) {
    Index left = 1, right = 1;
    for (Index k = 0; k < n; ++k) left *= shape[k];
    for (Index k = n + 1; k < shape.size(); ++k) right *= shape[k];
    const Index ext = shape[n];
    for (Index r = 0; r < right; ++r) {
      for (Index i = 0; i + 1 < ext; ++i) {
        const Index base0 = left * (i + ext * r);
        const Index base1 = base0 + left;
        for (Index l = 0; l < left; ++l) {
          const double d = x[base1 + l] - x[base0 + l];
          const double root = std::sqrt(d * d + eps * eps);
          out.value += root - eps;
          const double g = d / root;
          out.gradient[base1 + l] += g;
          out.gradient[base0 + l] -= g;
        }
      }
    }
  }
  return out;
}

Shape default_ranks(const Shape& shape) {
  const Index r = std::clamp<Index>(rank_bounds(shape).recommended, 1, 24);
  return Shape(shape.size(), r);
}

double default_gamma(const DenseTensor& observed, const ObservationMask& mask) {
  (void)mask;
  return kDefaultGammaScale * fro_norm(observed) / std::sqrt(static_cast<double>(observed.numel()));
}

RtcResult rtc_recover(const RtcProblem& p, const PalsObserver& observer) {
  if (p.mask.observed.size() != p.observed.numel() || p.mask.shape != p.observed.shape()) {
    throw std::invalid_argument("rtc_recover: mask does not match the observed tensor");
  }
  if (!(p.peak > 0.0)) throw std::invalid_argument("rtc_recover: peak must be positive");
  if (p.observed.order() < 3) throw std::invalid_argument("rtc_recover: data must have at least three modes");
  const Shape ranks = p.ranks.empty() ? default_ranks(p.observed.shape()) : p.ranks;
  if (ranks.size() != p.observed.order()) throw std::invalid_argument("rtc_recover: rank vector length mismatch");

  PalsProblem pp;
  pp.observed = p.observed;
  pp.mask = p.mask.observed;
  pp.coords = index_grid(p.observed.shape());
  const double eps = p.tv_eps;
  pp.regularizer = [eps](const DenseTensor& a, DenseTensor* grad) {
    TvValue tv = tv_l1(a, eps);
    if (grad) *grad = std::move(tv.gradient);
    return tv.value;
  };

  ImtdConfig mc;
  mc.ranks = ranks;
  mc.domains = index_domains(p.observed.shape());
  mc.depth = p.net.depth;
  mc.hidden = p.net.hidden;
  mc.omega0 = p.net.omega0;
  std::mt19937_64 rng(p.config.seed);
  ImtdModel model = ImtdModel::random(mc, rng);

  PalsResult run = pals_run(pp, std::move(model), p.config, observer);

  RtcResult out;
  out.recovered = run.a;
  for (double& v : out.recovered.data()) v = std::clamp(v, 0.0, p.peak);
  out.sparse = std::move(run.e);
  out.history = std::move(run.history);
  out.model = std::move(run.model);
  out.converged = run.converged;
  return out;
}

}  // namespace mtensor
