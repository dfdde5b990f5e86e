#include "mtensor/imtd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mtensor/log.hpp"

namespace mtensor {
namespace {

// Column strides of each network's output over the ranks it carries.
std::vector<Shape> slice_strides(const Shape& ranks) {
  const Index n_modes = ranks.size();
  std::vector<Shape> cs(n_modes, Shape(n_modes, 0));
  for (Index n = 0; n < n_modes; ++n) {
    Index s = 1;
    for (Index k = 0; k < n_modes; ++k) {
      if (k == n) continue;
      cs[n][k] = s;
      s *= ranks[k];
    }
  }
  return cs;
}

// Full contraction of one slice per mode. When `envs` is non-null, envs[n]
// (length prod_{k!=n} r_k) receives d f / d slice_n.
class PointContractor {
public:
  explicit PointContractor(const Shape& ranks) : ranks_(ranks), cs_(slice_strides(ranks)) {}

  double run(std::span<const double* const> slices, std::span<double* const> envs) const {
    const Index n_modes = ranks_.size();
    std::vector<Index> p(n_modes, 0);
    std::vector<double> vals(n_modes), prefix(n_modes + 1), suffix(n_modes + 1);
    double total = 0.0;
    while (true) {
      for (Index n = 0; n < n_modes; ++n) {
        Index col = 0;
        for (Index k = 0; k < n_modes; ++k) col += p[k] * cs_[n][k];
        vals[n] = slices[n][col];
      }
      prefix[0] = 1.0;
      for (Index n = 0; n < n_modes; ++n) prefix[n + 1] = prefix[n] * vals[n];
      total += prefix[n_modes];
      if (!envs.empty()) {
        suffix[n_modes] = 1.0;
        for (Index n = n_modes; n-- > 0;) suffix[n] = suffix[n + 1] * vals[n];
        for (Index n = 0; n < n_modes; ++n) {
          Index col = 0;
          for (Index k = 0; k < n_modes; ++k) col += p[k] * cs_[n][k];
          envs[n][col] += prefix[n] * suffix[n + 1];
        }
      }
      Index k = 0;
      for (; k < n_modes; ++k) {
        if (++p[k] < ranks_[k]) break;
        p[k] = 0;
      }
      if (k == n_modes) break;
    }
    return total;
  }

private:
  Shape ranks_;
  std::vector<Shape> cs_;
};

void check_points(const ImtdModel& m, const Matrix& points) {
  if (static_cast<Index>(points.rows()) != m.order()) {
    throw std::invalid_argument("imtd: points must have one row per mode");
  }
}

void warn_outside(const ImtdModel& m, Index mode, std::span<const double> xs) {
  const Interval d = m.domains()[mode];
  const double slack = 1e-12 * std::max(1.0, std::abs(d.hi - d.lo));
  Index outside = 0;
  for (double x : xs) {
    if (x < d.lo - slack || x > d.hi + slack) ++outside;
  }
  if (outside > 0) {
    warn("imtd: " + std::to_string(outside) + " coordinate(s) of mode " + std::to_string(mode) +
         " lie outside the domain; extrapolating");
  }
}

std::vector<double> normalized_row(const ImtdModel& m, const Matrix& points, Index mode) {
  std::vector<double> xs(static_cast<Index>(points.cols()));
  for (Index b = 0; b < xs.size(); ++b) xs[b] = points(static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(b));
  warn_outside(m, mode, xs);
  for (double& x : xs) x = m.normalize(mode, x);
  return xs;
}

// Forward over network inputs that are already normalized.
Vector eval_normalized(const ImtdModel& m, const std::vector<std::vector<double>>& inputs) {
  const Index n_modes = m.order();
  const Index batch = inputs.front().size();
  std::vector<Matrix> outs(n_modes);
  for (Index n = 0; n < n_modes; ++n) outs[n] = m.nets()[n].forward_batch(inputs[n]);
  PointContractor pc(m.ranks());
  Vector f(static_cast<Eigen::Index>(batch));
  std::vector<const double*> slices(n_modes);
  for (Index b = 0; b < batch; ++b) {
    for (Index n = 0; n < n_modes; ++n) slices[n] = outs[n].col(static_cast<Eigen::Index>(b)).data();
    f(static_cast<Eigen::Index>(b)) = pc.run(slices, {});
  }
  return f;
}

}  // namespace

ImtdModel::ImtdModel(Shape ranks, std::vector<Interval> domains, std::vector<Mlp> nets)
    : ranks_(std::move(ranks)), domains_(std::move(domains)), nets_(std::move(nets)) {
  validate();
}

void ImtdModel::validate() const {
  const Index n_modes = ranks_.size();
  if (n_modes < 3) throw std::invalid_argument("imtd: order must be at least 3");
  if (domains_.size() != n_modes || nets_.size() != n_modes) {
    throw std::invalid_argument("imtd: need one domain and one network per mode");
  }
  for (Index r : ranks_) {
    if (r == 0) throw std::invalid_argument("imtd: ranks must be positive");
  }
  for (Index n = 0; n < n_modes; ++n) {
    const Interval d = domains_[n];
    if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || d.hi < d.lo) {
      throw std::invalid_argument("imtd: invalid domain for mode " + std::to_string(n));
    }
    if (nets_[n].out_dim() != slice_size(n)) {
      throw std::invalid_argument("imtd: network " + std::to_string(n) + " outputs " +
                                  std::to_string(nets_[n].out_dim()) + " values, expected " +
                                  std::to_string(slice_size(n)));
    }
  }
}

ImtdModel ImtdModel::random(const ImtdConfig& c, std::mt19937_64& rng) {
  std::vector<Mlp> nets;
  for (Index n = 0; n < c.ranks.size(); ++n) {
    Index out = 1;
    for (Index k = 0; k < c.ranks.size(); ++k) {
      if (k != n) out *= c.ranks[k];
    }
    nets.emplace_back(MlpConfig{c.depth, c.hidden, out, c.omega0}, rng);
  }
  return ImtdModel(c.ranks, c.domains, std::move(nets));
}

ImtdModel ImtdModel::zeros(const ImtdConfig& c) {
  std::vector<Mlp> nets;
  for (Index n = 0; n < c.ranks.size(); ++n) {
    Index out = 1;
    for (Index k = 0; k < c.ranks.size(); ++k) {
      if (k != n) out *= c.ranks[k];
    }
    nets.push_back(Mlp::zeros(MlpConfig{c.depth, c.hidden, out, c.omega0}));
  }
  return ImtdModel(c.ranks, c.domains, std::move(nets));
}

Index ImtdModel::slice_size(Index mode) const {
  Index s = 1;
  for (Index k = 0; k < ranks_.size(); ++k) {
    if (k != mode) s *= ranks_[k];
  }
  return s;
}

double ImtdModel::normalize(Index mode, double x) const {
  const Interval d = domains_.at(mode);
  const double width = d.hi - d.lo;
  if (width == 0.0) return 0.5 * (kCoordinateRange.lo + kCoordinateRange.hi);
  return kCoordinateRange.lo + (x - d.lo) / width * (kCoordinateRange.hi - kCoordinateRange.lo);
}

double ImtdModel::zeta() const { return std::max(std::abs(kCoordinateRange.lo), std::abs(kCoordinateRange.hi)); }

std::vector<Matrix*> ImtdModel::parameters() {
  std::vector<Matrix*> out;
  for (auto& net : nets_) {
    for (auto& h : net.weights()) out.push_back(&h);
  }
  return out;
}

Index ImtdModel::parameter_count() const {
  Index n = 0;
  for (const auto& net : nets_) n += net.parameter_count();
  return n;
}

std::vector<Matrix> flatten(const ImtdGradients& g) {
  std::vector<Matrix> out;
  for (const auto& per_net : g) {
    for (const auto& h : per_net) out.push_back(h);
  }
  return out;
}

double eval_point(const ImtdModel& m, std::span<const double> x) {
  if (x.size() != m.order()) throw std::invalid_argument("eval_point: coordinate length must equal the order");
  Matrix pts(static_cast<Eigen::Index>(x.size()), 1);
  for (Index n = 0; n < x.size(); ++n) pts(static_cast<Eigen::Index>(n), 0) = x[n];
  return eval_points(m, pts)(0);
}

Vector eval_points(const ImtdModel& m, const Matrix& points) {
  check_points(m, points);
  if (points.cols() == 0) return Vector();
  std::vector<std::vector<double>> inputs(m.order());
  for (Index n = 0; n < m.order(); ++n) inputs[n] = normalized_row(m, points, n);
  return eval_normalized(m, inputs);
}

ImtdGradients points_backward(const ImtdModel& m, const Matrix& points, const Vector& cotangent) {
  check_points(m, points);
  if (cotangent.size() != points.cols()) throw std::invalid_argument("points_backward: cotangent length mismatch");
  const Index n_modes = m.order();
  const Index batch = static_cast<Index>(points.cols());
  std::vector<MlpCache> caches(n_modes);
  std::vector<Matrix> outs(n_modes);
  std::vector<Matrix> cots(n_modes);
  for (Index n = 0; n < n_modes; ++n) {
    const auto xs = normalized_row(m, points, n);
    outs[n] = m.nets()[n].forward_batch(xs, &caches[n]);
    cots[n] = Matrix::Zero(outs[n].rows(), outs[n].cols());
  }
  PointContractor pc(m.ranks());
  std::vector<const double*> slices(n_modes);
  std::vector<double*> envs(n_modes);
  std::vector<Vector> env_buf(n_modes);
  for (Index b = 0; b < batch; ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    const double c = cotangent(col);
    if (c == 0.0) continue;
    for (Index n = 0; n < n_modes; ++n) {
      slices[n] = outs[n].col(col).data();
      env_buf[n] = Vector::Zero(outs[n].rows());
      envs[n] = env_buf[n].data();
    }
    pc.run(slices, envs);
    for (Index n = 0; n < n_modes; ++n) cots[n].col(col) = c * env_buf[n];
  }
  ImtdGradients grads(n_modes);
  for (Index n = 0; n < n_modes; ++n) grads[n] = m.nets()[n].backward(caches[n], cots[n]);
  return grads;
}

GridForward forward_grid(const ImtdModel& m, const GridCoords& coords) {
  const Index n_modes = m.order();
  if (coords.size() != n_modes) throw std::invalid_argument("eval_grid: need one coordinate list per mode");
  GridForward fwd;
  fwd.caches.resize(n_modes);
  fwd.factors.ranks = m.ranks();
  for (Index n = 0; n < n_modes; ++n) {
    if (coords[n].empty()) throw std::invalid_argument("eval_grid: empty coordinate list");
    fwd.factors.long_dims.push_back(coords[n].size());
  }
  for (Index n = 0; n < n_modes; ++n) {
    warn_outside(m, n, coords[n]);
    std::vector<double> xs = coords[n];
    for (double& x : xs) x = m.normalize(n, x);
    const Matrix out = m.nets()[n].forward_batch(xs, &fwd.caches[n]);
    fwd.factors.factors.push_back(fold(out.transpose(), n, factor_shape(fwd.factors.long_dims, m.ranks(), n)));
  }
  fwd.value = multiple_product(fwd.factors);
  return fwd;
}

ImtdGradients backward_grid(const ImtdModel& m, const GridForward& fwd, const DenseTensor& cotangent) {
  require_same_shape(cotangent, fwd.value, "grid_backward");
  const Index n_modes = m.order();
  ImtdGradients grads(n_modes);
  for (Index n = 0; n < n_modes; ++n) {
    const Matrix env = contraction_env(fwd.factors, n).matrix;
    // d<G, X>/d unfold(A_n, n) = unfold(G, n) * E_n
    const Matrix slab = unfold(cotangent, n) * env;
    grads[n] = m.nets()[n].backward(fwd.caches[n], Matrix(slab.transpose()));
  }
  return grads;
}

MultipleFactors eval_factors(const ImtdModel& m, const GridCoords& coords) { return forward_grid(m, coords).factors; }

DenseTensor eval_grid(const ImtdModel& m, const GridCoords& coords) { return forward_grid(m, coords).value; }

ImtdGradients grid_backward(const ImtdModel& m, const GridCoords& coords, const DenseTensor& cotangent) {
  return backward_grid(m, forward_grid(m, coords), cotangent);
}

GridCoords index_grid(const Shape& shape) {
  GridCoords coords;
  for (Index e : shape) {
    std::vector<double> c(e);
    for (Index i = 0; i < e; ++i) c[i] = static_cast<double>(i + 1);
    coords.push_back(std::move(c));
  }
  return coords;
}

std::vector<Interval> index_domains(const Shape& shape) {
  std::vector<Interval> d;
  for (Index e : shape) d.push_back({1.0, static_cast<double>(e)});
  return d;
}

double empirical_lipschitz(const ImtdModel& m, Index n_pairs, std::uint64_t seed) {
  const Index n_modes = m.order();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(kCoordinateRange.lo, kCoordinateRange.hi);
  std::vector<std::vector<double>> xs(n_modes, std::vector<double>(n_pairs));
  std::vector<std::vector<double>> ys(n_modes, std::vector<double>(n_pairs));
  for (Index b = 0; b < n_pairs; ++b) {
    for (Index n = 0; n < n_modes; ++n) {
      xs[n][b] = dist(rng);
      ys[n][b] = dist(rng);
    }
  }
  const Vector fx = eval_normalized(m, xs);
  const Vector fy = eval_normalized(m, ys);
  double best = 0.0;
  for (Index b = 0; b < n_pairs; ++b) {
    double d2 = 0.0;
    for (Index n = 0; n < n_modes; ++n) d2 += (xs[n][b] - ys[n][b]) * (xs[n][b] - ys[n][b]);
    if (d2 == 0.0) continue;
    const auto i = static_cast<Eigen::Index>(b);
    best = std::max(best, std::abs(fx(i) - fy(i)) / std::sqrt(d2));
  }
  return best;
}

LipschitzCert certificate(const ImtdModel& m) {
  const double omega = weight_l1_max(m.nets());
  const double kappa = m.nets().front().omega0();
  for (const auto& net : m.nets()) {
    if (net.omega0() != kappa || net.depth() != m.nets().front().depth()) {
      throw std::invalid_argument("certificate: networks must share depth and activation");
    }
  }
  return lipschitz_bound(omega, kappa, m.zeta(), m.order(), m.nets().front().depth());
}

Matrix grid_jacobian(const ImtdModel& m, const GridCoords& coords) {
  const GridForward fwd = forward_grid(m, coords);
  const Index rows = fwd.value.numel();
  Matrix jac(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m.parameter_count()));
  DenseTensor onehot(fwd.value.shape());
  for (Index e = 0; e < rows; ++e) {
    onehot.fill(0.0);
    onehot[e] = 1.0;
    const auto flat = flatten(backward_grid(m, fwd, onehot));
    Eigen::Index col = 0;
    for (const auto& g : flat) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) {
        for (Eigen::Index r = 0; r < g.rows(); ++r) jac(static_cast<Eigen::Index>(e), col++) = g(r, c);
      }
    }
  }
  return jac;
}

Index numerical_rank(const Matrix& a) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff =
      static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon() * s(0);
  Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return rank;
}

}  // namespace mtensor
