#include "mtensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mtensor {

Index shape_numel(std::span<const Index> shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(std::span<const Index> shape) {
  std::ostringstream os;
  os << '(';
  for (Index k = 0; k < shape.size(); ++k) {
    if (k) os << ", ";
    os << shape[k];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one mode");
  for (Index e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_string(shape));
  }
}

// (left, extent, right) view of a tensor around one mode.
struct ModeSplit {
  Index left = 1;
  Index extent = 1;
  Index right = 1;
};

ModeSplit split_at(const Shape& shape, Index mode) {
  ModeSplit s;
  for (Index k = 0; k < mode; ++k) s.left *= shape[k];
  s.extent = shape[mode];
  for (Index k = mode + 1; k < shape.size(); ++k) s.right *= shape[k];
  return s;
}

}  // namespace

DenseTensor::DenseTensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

Index DenseTensor::extent(Index mode) const {
  if (mode >= shape_.size()) throw std::out_of_range("mode out of range");
  return shape_[mode];
}

Index DenseTensor::linear_index(std::span<const Index> idx) const {
  if (idx.size() != shape_.size()) throw std::out_of_range("index arity does not match tensor order");
  Index linear = 0;
  for (Index k = shape_.size(); k-- > 0;) {
    if (idx[k] >= shape_[k]) throw std::out_of_range("tensor index out of range");
    linear = linear * shape_[k] + idx[k];
  }
  return linear;
}

std::vector<Index> DenseTensor::multi_index(Index linear) const {
  if (linear >= data_.size()) throw std::out_of_range("linear index out of range");
  std::vector<Index> idx(shape_.size());
  for (Index k = 0; k < shape_.size(); ++k) {
    idx[k] = linear % shape_[k];
    linear /= shape_[k];
  }
  return idx;
}

double& DenseTensor::at(std::initializer_list<Index> idx) {
  return data_[linear_index(std::span<const Index>(idx.begin(), idx.size()))];
}

double DenseTensor::at(std::initializer_list<Index> idx) const {
  return data_[linear_index(std::span<const Index>(idx.begin(), idx.size()))];
}

void DenseTensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  require_same_shape(*this, other, "tensor addition");
  for (Index i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  require_same_shape(*this, other, "tensor subtraction");
  for (Index i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

Matrix unfold(const DenseTensor& t, Index mode) {
  if (mode >= t.order()) {
    throw std::out_of_range("unfold: mode " + std::to_string(mode) + " out of range for order " +
                            std::to_string(t.order()));
  }
  const ModeSplit s = split_at(t.shape(), mode);
  Matrix m(s.extent, s.left * s.right);
  const double* src = t.data().data();
  for (Index r = 0; r < s.right; ++r) {
    for (Index i = 0; i < s.extent; ++i) {
      const double* fiber = src + s.left * (i + s.extent * r);
      for (Index l = 0; l < s.left; ++l) m(i, l + s.left * r) = fiber[l];
    }
  }
  return m;
}

DenseTensor fold(const Matrix& m, Index mode, const Shape& shape) {
  check_shape(shape);
  if (mode >= shape.size()) throw std::out_of_range("fold: mode out of range");
  const ModeSplit s = split_at(shape, mode);
  if (static_cast<Index>(m.rows()) != s.extent || static_cast<Index>(m.cols()) != s.left * s.right) {
    throw std::invalid_argument("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                " incompatible with shape " + shape_string(shape) + " at mode " +
                                std::to_string(mode));
  }
  DenseTensor t(shape);
  double* dst = t.data().data();
  for (Index r = 0; r < s.right; ++r) {
    for (Index i = 0; i < s.extent; ++i) {
      double* fiber = dst + s.left * (i + s.extent * r);
      for (Index l = 0; l < s.left; ++l) fiber[l] = m(i, l + s.left * r);
    }
  }
  return t;
}

DenseTensor mode_n_product(const DenseTensor& t, const Matrix& u, Index mode) {
  if (mode >= t.order()) throw std::out_of_range("mode_n_product: mode out of range");
  if (static_cast<Index>(u.cols()) != t.extent(mode)) {
    throw std::invalid_argument("mode_n_product: matrix has " + std::to_string(u.cols()) +
                                " columns but mode extent is " + std::to_string(t.extent(mode)));
  }
  Shape out_shape = t.shape();
  out_shape[mode] = static_cast<Index>(u.rows());
  const Matrix prod = u * unfold(t, mode);
  return fold(prod, mode, out_shape);
}

double fro_norm(const DenseTensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

double l1_norm(const DenseTensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += std::abs(v);
  return s;
}

double max_abs(const DenseTensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (Index i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double soft_threshold(double x, double tau) {
  if (tau < 0.0 || std::isnan(tau)) throw std::invalid_argument("soft_threshold: tau must be nonnegative");
  const double mag = std::abs(x) - tau;
  if (!(mag > 0.0)) return 0.0;
  return x > 0.0 ? mag : -mag;
}

DenseTensor soft_threshold(const DenseTensor& t, double tau) {
  if (tau < 0.0 || std::isnan(tau)) throw std::invalid_argument("soft_threshold: tau must be nonnegative");
  DenseTensor out = t;
  for (double& v : out.data()) v = soft_threshold(v, tau);
  return out;
}

double psnr(const DenseTensor& x, const DenseTensor& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  double sse = 0.0;
  for (Index i = 0; i < x.numel(); ++i) {
    const double d = x[i] - ref[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(x.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace mtensor
