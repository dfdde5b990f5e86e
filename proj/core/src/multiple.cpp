#include "mtensor/multiple.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mtensor/log.hpp"

namespace mtensor {
namespace {

// Odometer increment over a column-major multi-index. Returns false on wrap.
bool advance(std::vector<Index>& idx, const Shape& extents) {
  for (Index k = 0; k < idx.size(); ++k) {
    if (++idx[k] < extents[k]) return true;
    idx[k] = 0;
  }
  return false;
}

Shape strides_of(const Shape& shape) {
  Shape st(shape.size());
  Index s = 1;
  for (Index k = 0; k < shape.size(); ++k) {
    st[k] = s;
    s *= shape[k];
  }
  return st;
}

void check_mode(const MultipleFactors& f, Index mode, const char* what) {
  if (mode >= f.order()) {
    throw std::out_of_range(std::string(what) + ": mode " + std::to_string(mode) + " out of range for order " +
                            std::to_string(f.order()));
  }
}

}  // namespace

Shape factor_shape(const Shape& long_dims, const Shape& ranks, Index mode) {
  if (long_dims.size() != ranks.size()) throw std::invalid_argument("factor_shape: long_dims/ranks length mismatch");
  if (mode >= long_dims.size()) throw std::out_of_range("factor_shape: mode out of range");
  Shape s = ranks;
  s[mode] = long_dims[mode];
  return s;
}

MultipleFactors MultipleFactors::zeros(Shape long_dims, Shape ranks) {
  MultipleFactors f;
  f.long_dims = std::move(long_dims);
  f.ranks = std::move(ranks);
  if (f.long_dims.size() != f.ranks.size()) throw std::invalid_argument("MultipleFactors: long_dims/ranks length mismatch");
  for (Index n = 0; n < f.long_dims.size(); ++n) f.factors.emplace_back(factor_shape(f.long_dims, f.ranks, n));
  f.validate();
  return f;
}

void MultipleFactors::validate() const {
  const Index n_modes = long_dims.size();
  if (n_modes < 3) throw std::invalid_argument("MultipleFactors: order must be at least 3");
  if (ranks.size() != n_modes) throw std::invalid_argument("MultipleFactors: rank vector length differs from order");
  if (factors.size() != n_modes) throw std::invalid_argument("MultipleFactors: expected one factor per mode");
  for (Index n = 0; n < n_modes; ++n) {
    if (long_dims[n] == 0 || ranks[n] == 0) throw std::invalid_argument("MultipleFactors: extents and ranks must be positive");
  }
  for (Index n = 0; n < n_modes; ++n) {
    const Shape want = factor_shape(long_dims, ranks, n);
    if (factors[n].shape() != want) {
      throw std::invalid_argument("MultipleFactors: factor " + std::to_string(n) + " has shape " +
                                  shape_string(factors[n].shape()) + ", expected " + shape_string(want));
    }
  }
}

Index MultipleFactors::parameter_count() const {
  Index total = 0;
  for (const auto& a : factors) total += a.numel();
  return total;
}

MultipleFactors random_factors(const Shape& long_dims, const Shape& ranks, std::mt19937_64& rng, double lo, double hi) {
  MultipleFactors f = MultipleFactors::zeros(long_dims, ranks);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& a : f.factors) {
    for (double& v : a.data()) v = dist(rng);
  }
  return f;
}

ContractionEnv contraction_env(const MultipleFactors& f, Index mode) {
  f.validate();
  check_mode(f, mode, "contraction_env");
  const Index n_modes = f.order();

  std::vector<Index> others;
  for (Index k = 0; k < n_modes; ++k) {
    if (k != mode) others.push_back(k);
  }
  Index rows = 1;
  Index cols = 1;
  Shape col_stride(n_modes, 0);
  for (Index k : others) {
    rows *= f.long_dims[k];
    col_stride[k] = cols;
    cols *= f.ranks[k];
  }

  std::vector<Shape> fstride(n_modes);
  for (Index k = 0; k < n_modes; ++k) fstride[k] = strides_of(f.factors[k].shape());

  ContractionEnv env{mode, Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))};
  std::vector<double> kron(rows);
  std::vector<double> next(rows);
  std::vector<Index> p(n_modes, 0);

  // Every full rank tuple p contributes the Kronecker product of the mode-k
  // fibers A_k[p_{-k}, :] (k != mode) to column col(p_{-mode}).
  do {
    kron[0] = 1.0;
    Index len = 1;
    for (Index k : others) {
      const auto& st = fstride[k];
      Index base = 0;
      for (Index j = 0; j < n_modes; ++j) {
        if (j != k) base += p[j] * st[j];
      }
      const double* a = f.factors[k].data().data() + base;
      const Index step = st[k];
      const Index extent = f.long_dims[k];
      for (Index i = 0; i < extent; ++i) {
        const double w = a[i * step];
        for (Index l = 0; l < len; ++l) next[l + len * i] = kron[l] * w;
      }
      len *= extent;
      std::swap(kron, next);
    }
    Index col = 0;
    for (Index k : others) col += p[k] * col_stride[k];
    double* dst = env.matrix.col(static_cast<Eigen::Index>(col)).data();
    for (Index r = 0; r < rows; ++r) dst[r] += kron[r];
  } while (advance(p, f.ranks));

  return env;
}

DenseTensor multiple_product(const MultipleFactors& f) {
  const ContractionEnv env = contraction_env(f, 0);
  const Matrix x0 = unfold(f.factors[0], 0) * env.matrix.transpose();
  return fold(x0, 0, f.long_dims);
}

double distribute_check(const MultipleFactors& f, const MultipleFactors& f_hat, Index mode) {
  f.validate();
  f_hat.validate();
  check_mode(f, mode, "distribute_check");
  if (f.long_dims != f_hat.long_dims || f.ranks != f_hat.ranks) {
    throw std::invalid_argument("distribute_check: decompositions have different shapes");
  }
  for (Index k = 0; k < f.order(); ++k) {
    if (k != mode && f.factors[k] != f_hat.factors[k]) {
      throw std::invalid_argument("distribute_check: decompositions differ outside factor " + std::to_string(mode));
    }
  }
  MultipleFactors diff = f;
  diff.factors[mode] -= f_hat.factors[mode];
  const DenseTensor lhs = multiple_product(diff);
  const DenseTensor rhs = multiple_product(f) - multiple_product(f_hat);
  return max_abs_diff(lhs, rhs);
}

double entry_bound(const MultipleFactors& f, std::span<const Index> idx) {
  f.validate();
  if (idx.size() != f.order()) throw std::out_of_range("entry_bound: index arity does not match order");
  double bound = 1.0;
  for (Index n = 0; n < f.order(); ++n) {
    if (idx[n] >= f.long_dims[n]) throw std::out_of_range("entry_bound: index out of range");
    const Matrix slab = unfold(f.factors[n], n);
    bound *= slab.row(static_cast<Eigen::Index>(idx[n])).cwiseAbs().sum();
  }
  return bound;
}

Index submax(std::span<const Index> shape) {
  if (shape.size() < 2) throw std::invalid_argument("submax: need at least two extents");
  std::vector<Index> s(shape.begin(), shape.end());
  std::partial_sort(s.begin(), s.begin() + 2, s.end(), std::greater<>());
  return s[1];
}

std::optional<MultipleFactors> gtri_construct(const DenseTensor& x) {
  const Index n_modes = x.order();
  if (n_modes < 3) throw std::invalid_argument("gtri_construct: order must be at least 3");
  if (max_abs(x) == 0.0) return std::nullopt;

  const Shape& dims = x.shape();
  const Index r = submax(dims);
  const Index big = static_cast<Index>(std::max_element(dims.begin(), dims.end()) - dims.begin());

  // Each remaining mode k gets its index copied into rank slot succ[k], a
  // cyclic derangement of the remaining modes, so every slot is pinned once.
  std::vector<Index> rest;
  for (Index k = 0; k < n_modes; ++k) {
    if (k != big) rest.push_back(k);
  }
  std::vector<Index> succ(n_modes, 0);
  for (Index j = 0; j < rest.size(); ++j) succ[rest[j]] = rest[(j + 1) % rest.size()];

  MultipleFactors f = MultipleFactors::zeros(dims, Shape(n_modes, r));

  // Factor `big` carries the data.
  {
    DenseTensor& a = f.factors[big];
    std::vector<Index> slot(n_modes, 0);
    std::vector<Index> i(n_modes, 0);
    do {
      slot[big] = i[big];
      for (Index k : rest) slot[succ[k]] = i[k];
      a(slot) = x(i);
    } while (advance(i, dims));
  }

  // Selectors: A_k[..] = 1 iff p_big == 0 and p_{succ[k]} == i_k.
  for (Index k : rest) {
    DenseTensor& a = f.factors[k];
    std::vector<Index> idx(n_modes, 0);
    const Shape& fs = a.shape();
    do {
      if (idx[big] == 0 && idx[succ[k]] == idx[k]) a(idx) = 1.0;
    } while (advance(idx, fs));
  }
  return f;
}

MultipleFactors pad_ranks(const MultipleFactors& f, const Shape& new_ranks) {
  f.validate();
  if (new_ranks.size() != f.order()) throw std::invalid_argument("pad_ranks: rank vector length mismatch");
  for (Index k = 0; k < f.order(); ++k) {
    if (new_ranks[k] < f.ranks[k]) throw std::invalid_argument("pad_ranks: ranks can only grow");
  }
  MultipleFactors out = MultipleFactors::zeros(f.long_dims, new_ranks);
  for (Index n = 0; n < f.order(); ++n) {
    const DenseTensor& src = f.factors[n];
    DenseTensor& dst = out.factors[n];
    std::vector<Index> idx(f.order(), 0);
    do {
      dst(idx) = src(idx);
    } while (advance(idx, src.shape()));
  }
  return out;
}

namespace {

Index cp_rank_of(std::span<const Matrix> cp) {
  if (cp.size() < 3) throw std::invalid_argument("CP factors: need at least three factor matrices");
  const auto r = cp[0].cols();
  if (r <= 0) throw std::invalid_argument("CP factors: rank must be positive");
  for (const auto& m : cp) {
    if (m.cols() != r) throw std::invalid_argument("CP factors: inconsistent column counts");
    if (m.rows() <= 0) throw std::invalid_argument("CP factors: empty factor matrix");
  }
  return static_cast<Index>(r);
}

}  // namespace

MultipleFactors cp_to_multiple(std::span<const Matrix> cp) {
  const Index r = cp_rank_of(cp);
  const Index n_modes = cp.size();
  Shape dims(n_modes);
  for (Index n = 0; n < n_modes; ++n) dims[n] = static_cast<Index>(cp[n].rows());
  MultipleFactors f = MultipleFactors::zeros(dims, Shape(n_modes, r));
  std::vector<Index> idx(n_modes);
  for (Index n = 0; n < n_modes; ++n) {
    for (Index q = 0; q < r; ++q) {
      std::fill(idx.begin(), idx.end(), q);
      for (Index i = 0; i < dims[n]; ++i) {
        idx[n] = i;
        f.factors[n](idx) = cp[n](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
      }
    }
  }
  return f;
}

DenseTensor cp_product(std::span<const Matrix> cp) {
  const Index r = cp_rank_of(cp);
  Shape dims;
  for (const auto& m : cp) dims.push_back(static_cast<Index>(m.rows()));
  DenseTensor x(dims);
  std::vector<Index> i(dims.size(), 0);
  Index linear = 0;
  do {
    double s = 0.0;
    for (Index q = 0; q < r; ++q) {
      double term = 1.0;
      for (Index n = 0; n < dims.size(); ++n) {
        term *= cp[n](static_cast<Eigen::Index>(i[n]), static_cast<Eigen::Index>(q));
      }
      s += term;
    }
    x[linear++] = s;
  } while (advance(i, dims));
  return x;
}

namespace {

void check_tucker_inputs(const MultipleFactors& f, std::span<const Matrix> u) {
  f.validate();
  if (u.size() != f.order()) throw std::invalid_argument("tucker: need one matrix per mode");
  for (Index n = 0; n < f.order(); ++n) {
    if (static_cast<Index>(u[n].cols()) != f.long_dims[n]) {
      throw std::invalid_argument("tucker: matrix " + std::to_string(n) + " has " + std::to_string(u[n].cols()) +
                                  " columns, expected " + std::to_string(f.long_dims[n]));
    }
    if (u[n].rows() <= 0) throw std::invalid_argument("tucker: empty matrix");
  }
}

}  // namespace

DenseTensor tucker_compose(const MultipleFactors& f, std::span<const Matrix> u) {
  check_tucker_inputs(f, u);
  MultipleFactors g;
  g.ranks = f.ranks;
  for (Index n = 0; n < f.order(); ++n) {
    g.long_dims.push_back(static_cast<Index>(u[n].rows()));
    g.factors.push_back(mode_n_product(f.factors[n], u[n], n));
  }
  return multiple_product(g);
}

TuckerCommutation tucker_commutation(const MultipleFactors& f, std::span<const Matrix> u) {
  TuckerCommutation out;
  out.factor_side = tucker_compose(f, u);
  DenseTensor core = multiple_product(f);
  for (Index n = 0; n < f.order(); ++n) core = mode_n_product(core, u[n], n);
  out.core_side = std::move(core);
  const double scale = std::max(fro_norm(out.core_side), std::numeric_limits<double>::min());
  out.relative_gap = fro_norm(out.factor_side - out.core_side) / scale;
  return out;
}

AlsResult als_fit(const DenseTensor& x, const Shape& ranks, const AlsOptions& opts) {
  const Index n_modes = x.order();
  if (n_modes < 3) throw std::invalid_argument("als_fit: order must be at least 3");
  if (ranks.size() != n_modes) throw std::invalid_argument("als_fit: rank vector length mismatch");
  for (Index r : ranks) {
    if (r == 0) throw std::invalid_argument("als_fit: ranks must be positive");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("als_fit: input has non-finite entries");
  }
  const double x_norm = fro_norm(x);
  if (x_norm == 0.0) throw std::invalid_argument("als_fit: input tensor is zero");
  const Index bound = submax(x.shape());
  if (std::any_of(ranks.begin(), ranks.end(), [&](Index r) { return r > bound; })) {
    warn("als_fit: rank " + shape_string(ranks) + " exceeds the uniform-rank bound " + std::to_string(bound) +
         " for shape " + shape_string(x.shape()));
  }

  AlsResult result;
  if (opts.init) {
    result.factors = *opts.init;
    result.factors.validate();
    if (result.factors.long_dims != x.shape() || result.factors.ranks != ranks) {
      throw std::invalid_argument("als_fit: initial factors do not match shape/ranks");
    }
  } else {
    std::mt19937_64 rng(opts.seed);
    const double s = std::pow(x_norm / static_cast<double>(x.numel()), 1.0 / static_cast<double>(n_modes));
    result.factors = random_factors(x.shape(), ranks, rng, -s, s);
  }

  std::vector<Matrix> unfolded(n_modes);
  for (Index n = 0; n < n_modes; ++n) unfolded[n] = unfold(x, n);

  auto residual = [&] { return fro_norm(x - multiple_product(result.factors)); };
  result.residual.push_back(residual());

  for (Index sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    for (Index n = 0; n < n_modes; ++n) {
      const Matrix e = contraction_env(result.factors, n).matrix;
      Matrix gram = e.transpose() * e;
      const double trace = gram.trace();
      const double mu = opts.ridge * (trace > 0.0 ? trace / static_cast<double>(gram.rows()) : 1.0);
      gram.diagonal().array() += mu;
      const Matrix rhs = e.transpose() * unfolded[n].transpose();
      const Matrix solved = gram.ldlt().solve(rhs);
      if (!solved.allFinite()) throw std::runtime_error("als_fit: non-finite factor update");
      result.factors.factors[n] = fold(solved.transpose(), n, result.factors.factors[n].shape());
    }
    const double res = residual();
    if (!std::isfinite(res)) throw std::runtime_error("als_fit: objective became non-finite");
    const double prev = result.residual.back();
    result.residual.push_back(res);
    result.sweeps = sweep + 1;
    if (res <= 1e-14 * x_norm || std::abs(prev - res) <= opts.tol * std::max(prev, 1e-300)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

RankBounds rank_bounds(const Shape& shape) {
  if (shape.size() < 2) throw std::invalid_argument("rank_bounds: need at least two modes");
  const double inv = 1.0 / static_cast<double>(shape.size() - 1);
  double max_root = 0.0;
  double prod = 1.0;
  double sum = 0.0;
  for (Index e : shape) {
    if (e == 0) throw std::invalid_argument("rank_bounds: extents must be positive");
    max_root = std::max(max_root, std::pow(static_cast<double>(e), inv));
    prod *= static_cast<double>(e);
    sum += static_cast<double>(e);
  }
  RankBounds b;
  b.r_min = max_root / 3.0;
  b.r_max = 2.0 / 3.0 * std::pow(prod / sum, inv);
  b.recommended = std::max<Index>(1, static_cast<Index>(std::llround(b.r_max)));
  return b;
}

Index pcu_rank_bound(Index num_points) {
  if (num_points == 0) throw std::invalid_argument("pcu_rank_bound: need at least one point");
  return std::max<Index>(1, static_cast<Index>(std::llround(std::cbrt(static_cast<double>(num_points)))));
}

double compression_ratio(const Shape& shape, const Shape& ranks) {
  if (shape.size() != ranks.size() || shape.empty()) throw std::invalid_argument("compression_ratio: length mismatch");
  Index stored = 0;
  for (Index n = 0; n < shape.size(); ++n) stored += shape_numel(factor_shape(shape, ranks, n));
  return static_cast<double>(shape_numel(shape)) / static_cast<double>(stored);
}

}  // namespace mtensor
