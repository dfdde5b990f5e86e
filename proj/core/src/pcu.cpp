#include "mtensor/pcu.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mtensor/multiple.hpp"

namespace mtensor {
namespace {

constexpr double kCharbonnierEps = 1e-6;

double charb(double x) { return std::sqrt(x * x + kCharbonnierEps * kCharbonnierEps) - kCharbonnierEps; }
double charb_grad(double x) { return x / std::sqrt(x * x + kCharbonnierEps * kCharbonnierEps); }

void check_cloud(const Matrix& p, const char* what) {
  if (p.cols() == 0) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

void check_dims(const Matrix& p, const Matrix& q, const char* what) {
  check_cloud(p, what);
  check_cloud(q, what);
  if (p.rows() != q.rows()) throw std::invalid_argument(std::string(what) + ": clouds differ in dimension");
}

// Nearest-neighbour distance from every column of `from` to the columns of `to`.
Vector nn_distances(const Matrix& from, const Matrix& to) {
  Vector out(from.cols());
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    out(i) = std::sqrt((to.colwise() - from.col(i)).colwise().squaredNorm().minCoeff());
  }
  return out;
}

Matrix uniform_box(Index dim, Index count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = u(rng);
  }
  return out;
}

Matrix lift(const SdfModel& m, const Matrix& points) {
  if (static_cast<Index>(points.rows()) != m.dim) throw std::invalid_argument("sdf: points have the wrong dimension");
  if (m.imtd.order() == m.dim) return points;
  Matrix out(points.rows() + 1, points.cols());
  out.topRows(points.rows()) = points;
  out.bottomRows(1).setConstant(kPlanarCoordinate);
  return out;
}

}  // namespace

Matrix Normalization::apply(const Matrix& raw) const { return (raw.colwise() - center) / scale; }
Matrix Normalization::invert(const Matrix& normalized) const { return (normalized * scale).colwise() + center; }

PointCloud make_cloud(Matrix raw, double half_extent) {
  check_cloud(raw, "make_cloud");
  if (!raw.allFinite()) throw std::invalid_argument("make_cloud: non-finite coordinates");
  if (!(half_extent > 0.0 && half_extent <= 1.0)) throw std::invalid_argument("make_cloud: half extent must lie in (0, 1]");
  const Vector lo = raw.rowwise().minCoeff();
  const Vector hi = raw.rowwise().maxCoeff();
  PointCloud c;
  c.norm.center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo).maxCoeff();
  c.norm.scale = half > 0.0 ? half / half_extent : 1.0;
  c.points = std::move(raw);
  return c;
}

void PcuConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("pcu: tau must be positive");
  if (!(fd_step > 0.0)) throw std::invalid_argument("pcu: fd_step must be positive");
  if (!(r_excl >= 0.0)) throw std::invalid_argument("pcu: r_excl must be nonnegative");
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("pcu: loss weights must be nonnegative");
  if (n_eikonal == 0 || n_exterior == 0 || candidates == 0) throw std::invalid_argument("pcu: sample counts must be >= 1");
}

Index default_pcu_rank(Index num_points) { return std::clamp<Index>(pcu_rank_bound(num_points), 4, 16); }

Vector SdfModel::eval(const Matrix& points) const { return eval_points(imtd, lift(*this, points)); }

ImtdGradients SdfModel::backward(const Matrix& points, const Vector& cotangent) const {
  return points_backward(imtd, lift(*this, points), cotangent);
}

SdfModel make_sdf_model(Index dim, const PcuConfig& cfg, Index num_points) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("pcu: point clouds must be 2-D or 3-D");
  const Index order = 3;
  ImtdConfig mc;
  mc.ranks = cfg.ranks.empty() ? Shape(order, default_pcu_rank(num_points)) : cfg.ranks;
  if (mc.ranks.size() != order) throw std::invalid_argument("pcu: need three ranks");
  mc.domains.assign(order, Interval{-kSdfDomain, kSdfDomain});
  mc.depth = cfg.depth;
  mc.hidden = cfg.hidden;
  mc.omega0 = cfg.omega0;
  std::mt19937_64 rng(cfg.seed);
  return SdfModel{ImtdModel::random(mc, rng), dim};
}

Matrix exterior_samples(const Matrix& observed, Index count, double r_excl, std::mt19937_64& rng) {
  const auto dim = static_cast<Index>(observed.rows());
  Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  const double r2 = r_excl * r_excl;
  const Index max_draws = 1000 * count + 1000;
  Index kept = 0;
  for (Index draws = 0; kept < count; ++draws) {
    if (draws == max_draws) throw std::runtime_error("exterior_samples: exclusion balls cover the box");
    const Matrix v = uniform_box(dim, 1, rng);
    if (observed.cols() > 0 && (observed.colwise() - v.col(0)).colwise().squaredNorm().minCoeff() <= r2) continue;
    out.col(static_cast<Eigen::Index>(kept++)) = v.col(0);
  }
  return out;
}

SdfLoss sdf_loss(const SdfModel& model, const Matrix& observed, const PcuConfig& cfg, std::uint64_t sample_seed) {
  cfg.validate();
  const Index dim = model.dim;
  if (static_cast<Index>(observed.rows()) != dim) throw std::invalid_argument("sdf_loss: observed points have the wrong dimension");
  check_cloud(observed, "sdf_loss");
  std::mt19937_64 rng(sample_seed);
  const auto p = observed.cols();
  const auto ne = static_cast<Eigen::Index>(cfg.n_eikonal);
  const auto nx = static_cast<Eigen::Index>(cfg.n_exterior);
  const double h = cfg.fd_step;
  const Matrix v = uniform_box(dim, cfg.n_eikonal, rng);
  const Matrix w = exterior_samples(observed, cfg.n_exterior, cfg.r_excl, rng);

  // Columns: observed | v + h e_0 | v - h e_0 | ... | exterior.
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix pts(d, p + 2 * d * ne + nx);
  pts.leftCols(p) = observed;
  for (Eigen::Index j = 0; j < d; ++j) {
    Matrix plus = v, minus = v;
    plus.row(j).array() += h;
    minus.row(j).array() -= h;
    pts.middleCols(p + (2 * j) * ne, ne) = plus;
    pts.middleCols(p + (2 * j + 1) * ne, ne) = minus;
  }
  pts.rightCols(nx) = w;

  const Vector s = model.eval(pts);
  Vector cot = Vector::Zero(s.size());
  SdfLoss out;
  const double wd = 1.0 / static_cast<double>(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    out.data += wd * charb(s(i));
    cot(i) = wd * charb_grad(s(i));
  }
  const double we = cfg.lambda / static_cast<double>(ne);
  std::vector<double> g(dim);
  for (Eigen::Index b = 0; b < ne; ++b) {
    double q = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      g[j] = (s(p + 2 * j * ne + b) - s(p + (2 * j + 1) * ne + b)) / (2.0 * h);
      q += g[j] * g[j];
    }
    out.eikonal += we * charb(q);
    const double dq = we * charb_grad(q);
    for (Eigen::Index j = 0; j < d; ++j) {
      cot(p + 2 * j * ne + b) += dq * g[j] / h;
      cot(p + (2 * j + 1) * ne + b) -= dq * g[j] / h;
    }
  }
  const double wx = cfg.gamma / static_cast<double>(nx);
  const Eigen::Index base = p + 2 * d * ne;
  for (Eigen::Index b = 0; b < nx; ++b) {
    const double sv = s(base + b);
    const double e = std::exp(-charb(sv));
    out.exterior += wx * e;
    cot(base + b) = -wx * e * charb_grad(sv);
  }
  out.value = out.data + out.eikonal + out.exterior;
  if (!std::isfinite(out.value)) throw std::runtime_error("sdf_loss: non-finite loss");
  out.grads = model.backward(pts, cot);
  return out;
}

PcuFit train_sdf(const PointCloud& cloud, const PcuConfig& cfg) {
  cfg.validate();
  check_cloud(cloud.points, "train_sdf");
  PcuFit fit{make_sdf_model(cloud.dim(), cfg, cloud.size()), {}};
  const Matrix observed = cloud.normalized();
  Adam adam(cfg.adam);
  std::mt19937_64 seeds(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index step = 0; step < cfg.steps; ++step) {
    const SdfLoss loss = sdf_loss(fit.model, observed, cfg, seeds());
    fit.loss_history.push_back(loss.value);
    auto params = fit.model.imtd.parameters();
    adam.step(params, flatten(loss.grads));
  }
  return fit;
}

PointCloud extract_points(const SdfModel& model, const Normalization& norm, const PcuConfig& cfg) {
  if (!(cfg.tau >= 0.0)) throw std::invalid_argument("extract_points: tau must be nonnegative");
  if (cfg.candidates == 0) throw std::invalid_argument("extract_points: need at least one candidate");
  std::mt19937_64 rng(cfg.seed + 1);
  constexpr Index kChunk = 8192;
  std::vector<Vector> kept;
  for (Index done = 0; done < cfg.candidates; done += kChunk) {
    const Matrix c = uniform_box(model.dim, std::min(kChunk, cfg.candidates - done), rng);
    const Vector s = model.eval(c);
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (std::abs(s(j)) < cfg.tau) kept.push_back(c.col(j));
    }
  }
  if (kept.empty()) {
    throw std::runtime_error("extract_points: no candidate has |s| < tau; try a larger tau or more candidates");
  }
  Matrix pts(static_cast<Eigen::Index>(model.dim), static_cast<Eigen::Index>(kept.size()));
  for (Index j = 0; j < kept.size(); ++j) pts.col(static_cast<Eigen::Index>(j)) = kept[j];
  return PointCloud{norm.invert(pts), norm};
}

double chamfer(const Matrix& p, const Matrix& q) {
  check_dims(p, q, "chamfer");
  return nn_distances(p, q).mean() + nn_distances(q, p).mean();
}

double f_score(const Matrix& p, const Matrix& q, double d) {
  check_dims(p, q, "f_score");
  if (!(d > 0.0)) throw std::invalid_argument("f_score: distance threshold must be positive");
  const double precision = (nn_distances(p, q).array() <= d).cast<double>().mean();
  const double recall = (nn_distances(q, p).array() <= d).cast<double>().mean();
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Matrix read_xyz(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  Index dim = 0;
  Index line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double x = 0.0;
    while (ls >> x) row.push_back(x);
    if (!ls.eof()) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": not a number");
    if (row.empty()) continue;
    if (dim == 0) dim = row.size();
    if (row.size() != dim) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    values.insert(values.end(), row.begin(), row.end());
  }
  if (dim == 0) throw std::runtime_error(path.string() + ": no points");
  if (dim != 2 && dim != 3) throw std::runtime_error(path.string() + ": expected 2 or 3 columns");
  Matrix out = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(dim),
                                  static_cast<Eigen::Index>(values.size() / dim));
  if (!out.allFinite()) throw std::runtime_error(path.string() + ": non-finite coordinate");
  return out;
}

void write_xyz(const std::filesystem::path& path, const Matrix& points) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) os << (i ? " " : "") << points(i, j);
    os << '\n';
  }
}

Matrix circle_points(Index count, double radius) {
  Matrix out(2, static_cast<Eigen::Index>(count));
  for (Index j = 0; j < count; ++j) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
    out.col(static_cast<Eigen::Index>(j)) << radius * std::cos(t), radius * std::sin(t);
  }
  return out;
}

Matrix star_points(Index count, double radius, double depth, int arms) {
  Matrix out(2, static_cast<Eigen::Index>(count));
  for (Index j = 0; j < count; ++j) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
    const double r = radius * (1.0 + depth * std::cos(arms * t));
    out.col(static_cast<Eigen::Index>(j)) << r * std::cos(t), r * std::sin(t);
  }
  return out;
}

Matrix sphere_points(Index count, double radius) {
  Matrix out(3, static_cast<Eigen::Index>(count));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (Index j = 0; j < count; ++j) {
    const double z = 1.0 - 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(1.0 - z * z);
    const double t = golden * static_cast<double>(j);
    out.col(static_cast<Eigen::Index>(j)) << radius * r * std::cos(t), radius * r * std::sin(t), radius * z;
  }
  return out;
}

Matrix subsample(const Matrix& points, double rate, std::uint64_t seed) {
  check_cloud(points, "subsample");
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("subsample: rate must lie in (0, 1]");
  const auto n = static_cast<Index>(points.cols());
  const Index k = std::clamp<Index>(static_cast<Index>(std::llround(rate * static_cast<double>(n))), 1, n);
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  Matrix out(points.rows(), static_cast<Eigen::Index>(k));
  for (Index j = 0; j < k; ++j) out.col(static_cast<Eigen::Index>(j)) = points.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace mtensor
