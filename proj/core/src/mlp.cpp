#include "mtensor/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mtensor {
namespace {

void require_finite(const Matrix& m, Index layer) {
  if (!m.allFinite()) {
    throw std::runtime_error("mlp: non-finite value after layer " + std::to_string(layer));
  }
}

std::vector<Index> layer_dims(const MlpConfig& c) {
  if (c.depth == 0) throw std::invalid_argument("mlp: depth must be at least 1");
  if (c.out_dim == 0) throw std::invalid_argument("mlp: output dimension must be positive");
  if (c.depth > 1 && c.hidden == 0) throw std::invalid_argument("mlp: hidden width must be positive");
  std::vector<Index> dims{1};
  for (Index i = 1; i < c.depth; ++i) dims.push_back(c.hidden);
  dims.push_back(c.out_dim);
  return dims;
}

}  // namespace

Mlp::Mlp(const MlpConfig& config, std::mt19937_64& rng) : omega0_(config.omega0) {
  const auto dims = layer_dims(config);
  for (Index i = 0; i + 1 < dims.size(); ++i) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[i])) / omega0_;
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix h(static_cast<Eigen::Index>(dims[i + 1]), static_cast<Eigen::Index>(dims[i]));
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      for (Eigen::Index r = 0; r < h.rows(); ++r) h(r, c) = dist(rng);
    }
    weights_.push_back(std::move(h));
  }
  validate();
}

Mlp::Mlp(std::vector<Matrix> weights, double omega0) : weights_(std::move(weights)), omega0_(omega0) { validate(); }

Mlp Mlp::zeros(const MlpConfig& config) {
  const auto dims = layer_dims(config);
  std::vector<Matrix> w;
  for (Index i = 0; i + 1 < dims.size(); ++i) {
    w.push_back(Matrix::Zero(static_cast<Eigen::Index>(dims[i + 1]), static_cast<Eigen::Index>(dims[i])));
  }
  return Mlp(std::move(w), config.omega0);
}

void Mlp::validate() const {
  if (weights_.empty()) throw std::invalid_argument("mlp: need at least one layer");
  if (!(omega0_ > 0.0) || !std::isfinite(omega0_)) throw std::invalid_argument("mlp: omega0 must be positive");
  if (weights_.front().cols() != 1) throw std::invalid_argument("mlp: first layer must take a scalar input");
  for (Index i = 0; i < weights_.size(); ++i) {
    if (weights_[i].rows() == 0) throw std::invalid_argument("mlp: empty layer");
    if (i > 0 && weights_[i].cols() != weights_[i - 1].rows()) {
      throw std::invalid_argument("mlp: layer " + std::to_string(i) + " input width mismatch");
    }
  }
}

Index Mlp::out_dim() const { return static_cast<Index>(weights_.back().rows()); }

Index Mlp::hidden() const { return depth() > 1 ? static_cast<Index>(weights_.front().rows()) : 0; }

Index Mlp::parameter_count() const {
  Index n = 0;
  for (const auto& h : weights_) n += static_cast<Index>(h.size());
  return n;
}

Vector Mlp::forward(double x, MlpCache* cache) const {
  const Matrix y = forward_batch(std::span<const double>(&x, 1), cache);
  return y.col(0);
}

Matrix Mlp::forward_batch(std::span<const double> xs, MlpCache* cache) const {
  Matrix a(1, static_cast<Eigen::Index>(xs.size()));
  for (Index b = 0; b < xs.size(); ++b) {
    if (!std::isfinite(xs[b])) throw std::invalid_argument("mlp: non-finite input coordinate");
    a(0, static_cast<Eigen::Index>(b)) = xs[b];
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const Index last = depth() - 1;
  for (Index i = 0; i < depth(); ++i) {
    Matrix z = weights_[i] * a;
    require_finite(z, i);
    if (cache) cache->inputs.push_back(std::move(a));
    if (i == last) return z;
    a = (omega0_ * z.array()).sin().matrix();
    if (cache) cache->pre.push_back(std::move(z));
  }
  return a;  // unreachable
}

MlpGradients Mlp::backward(const MlpCache& cache, const Matrix& cotangent) const {
  if (cache.inputs.size() != depth() || cache.pre.size() + 1 != depth()) {
    throw std::invalid_argument("mlp backward: cache does not match network depth");
  }
  if (static_cast<Index>(cotangent.rows()) != out_dim() || cotangent.cols() != cache.inputs.front().cols()) {
    throw std::invalid_argument("mlp backward: cotangent shape does not match forward batch");
  }
  MlpGradients grads(depth());
  Matrix g = cotangent;
  for (Index i = depth(); i-- > 0;) {
    if (cache.inputs[i].rows() != weights_[i].cols()) throw std::invalid_argument("mlp backward: stale cache");
    grads[i] = g * cache.inputs[i].transpose();
    if (i > 0) {
      Matrix back = weights_[i].transpose() * g;
      g = (back.array() * (omega0_ * (omega0_ * cache.pre[i - 1].array()).cos())).matrix();
    }
  }
  return grads;
}

MlpGradients Mlp::backward(const MlpCache& cache, const Vector& cotangent) const {
  return backward(cache, Matrix(cotangent));
}

std::vector<double> Mlp::layer_l1_norms() const {
  std::vector<double> out;
  for (const auto& h : weights_) out.push_back(h.cwiseAbs().sum());
  return out;
}

double weight_l1_max(std::span<const Mlp> nets) {
  if (nets.empty()) throw std::invalid_argument("weight_l1_max: no networks");
  double m = 0.0;
  for (const auto& net : nets) {
    for (double v : net.layer_l1_norms()) m = std::max(m, v);
  }
  return m;
}

LipschitzCert lipschitz_bound(double omega, double kappa, double zeta, Index order, Index depth) {
  if (!(omega > 0.0) || !(kappa > 0.0) || !(zeta > 0.0)) {
    throw std::invalid_argument("lipschitz_bound: omega, kappa and zeta must be positive");
  }
  if (order == 0 || depth == 0) throw std::invalid_argument("lipschitz_bound: order and depth must be positive");
  LipschitzCert c{omega, kappa, zeta, order, depth, 0.0};
  const double nd = static_cast<double>(order * depth);
  const double n = static_cast<double>(order);
  c.delta = std::sqrt(2.0) * std::pow(omega, nd) * std::pow(kappa, nd - n) * std::pow(zeta, n - 1.0);
  return c;
}

}  // namespace mtensor
