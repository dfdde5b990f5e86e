#pragma once

// Dense N-dimensional tensors in column-major (first index fastest) layout.
//
// A tensor with extents (I_0, ..., I_{N-1}) stores entry (i_0, ..., i_{N-1})
// at linear offset
//
//     i_0 + I_0 * (i_1 + I_1 * (i_2 + ... + I_{N-2} * i_{N-1}))
//
// Every routine in the library (unfolding, serialization, reshapes of factor
// slices) uses this single convention. Modes are numbered from zero.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtensor {

using Index = std::size_t;
using Shape = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Product of all extents (1 for an empty shape).
Index shape_numel(std::span<const Index> shape);

/// Human readable "(2, 3, 4)" form used in error messages.
std::string shape_string(std::span<const Index> shape);

class DenseTensor {
public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, double fill = 0.0);
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor zeros(Shape shape) { return DenseTensor(std::move(shape), 0.0); }
  static DenseTensor ones(Shape shape) { return DenseTensor(std::move(shape), 1.0); }

  Index order() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  Index extent(Index mode) const;
  Index numel() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](Index linear) { return data_[linear]; }
  double operator[](Index linear) const { return data_[linear]; }

  double& operator()(std::span<const Index> idx) { return data_[linear_index(idx)]; }
  double operator()(std::span<const Index> idx) const { return data_[linear_index(idx)]; }
  double& at(std::initializer_list<Index> idx);
  double at(std::initializer_list<Index> idx) const;

  /// Bounds-checked conversion of a multi-index to a linear offset.
  Index linear_index(std::span<const Index> idx) const;
  /// Inverse of linear_index.
  std::vector<Index> multi_index(Index linear) const;

  void fill(double v);

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double s);

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(DenseTensor a, double s) { return a *= s; }
  friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

  bool operator==(const DenseTensor& other) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Mode-n unfolding: an I_n x (prod_{k != n} I_k) matrix whose columns run over
/// the remaining indices in column-major order.
Matrix unfold(const DenseTensor& t, Index mode);

/// Inverse of unfold for the given target shape.
DenseTensor fold(const Matrix& m, Index mode, const Shape& shape);

/// t x_n u, i.e. unfold(result, n) == u * unfold(t, n).
DenseTensor mode_n_product(const DenseTensor& t, const Matrix& u, Index mode);

double fro_norm(const DenseTensor& t);
double l1_norm(const DenseTensor& t);
double max_abs(const DenseTensor& t);
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

/// Elementwise sign(x) * max(|x| - tau, 0). tau may be +infinity.
DenseTensor soft_threshold(const DenseTensor& t, double tau);
double soft_threshold(double x, double tau);

/// PSNR cap returned when the two tensors coincide exactly.
inline constexpr double kPsnrCap = 200.0;

/// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const DenseTensor& x, const DenseTensor& ref, double peak);

/// Throws std::invalid_argument when the shapes differ.
void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what);

}  // namespace mtensor
