#pragma once

// Multiple decomposition of an N-th order tensor.
//
// Factor n has shape (r_0, ..., r_{n-1}, I_n, r_{n+1}, ..., r_{N-1}) and
//
//   X[i_0..i_{N-1}] = sum_{p_0..p_{N-1}} prod_n A_n[p_0..p_{n-1}, i_n, p_{n+1}..p_{N-1}]
//
// Every factor is missing exactly one rank index (its own), so each rank index
// p_k is shared by all factors except A_k.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mtensor/tensor.hpp"

namespace mtensor {

/// Shape of factor `mode` for the given long dimensions and ranks.
Shape factor_shape(const Shape& long_dims, const Shape& ranks, Index mode);

struct MultipleFactors {
  Shape long_dims;
  Shape ranks;
  std::vector<DenseTensor> factors;

  Index order() const { return long_dims.size(); }

  /// All-zero factors for the given dimensions.
  static MultipleFactors zeros(Shape long_dims, Shape ranks);

  /// Throws std::invalid_argument if the factor shapes disagree with
  /// long_dims/ranks or the order is below 3.
  void validate() const;

  /// Number of stored parameters, sum of the factor sizes.
  Index parameter_count() const;
};

/// Factors with entries drawn i.i.d. uniform(lo, hi).
MultipleFactors random_factors(const Shape& long_dims, const Shape& ranks, std::mt19937_64& rng, double lo = -1.0,
                               double hi = 1.0);

/// E_{n} collapsed to a (prod_{k!=n} I_k) x (prod_{k!=n} r_k) matrix such that
/// unfold(X, n) == unfold(A_n, n) * matrix^T. Rows follow the column order of
/// unfold(X, n); columns follow the column order of unfold(A_n, n).
struct ContractionEnv {
  Index mode = 0;
  Matrix matrix;
};

ContractionEnv contraction_env(const MultipleFactors& f, Index mode);

DenseTensor multiple_product(const MultipleFactors& f);

/// max |[..(A_n - Â_n)..] - ([..A_n..] - [..Â_n..])| for decompositions that
/// differ only in factor `mode`.
double distribute_check(const MultipleFactors& f, const MultipleFactors& f_hat, Index mode);

/// prod_n ||A_n(.., i_n, ..)||_1, an upper bound on |X[idx]|.
double entry_bound(const MultipleFactors& f, std::span<const Index> idx);

/// Second largest extent (counting repeats).
Index submax(std::span<const Index> shape);

/// Exact generalized triple decomposition with uniform rank submax(shape).
/// Returns std::nullopt for the zero tensor, whose rank is zero.
std::optional<MultipleFactors> gtri_construct(const DenseTensor& x);

/// Zero-pads every factor to the larger rank vector; the product is unchanged.
MultipleFactors pad_ranks(const MultipleFactors& f, const Shape& new_ranks);

/// Embeds a CP decomposition (N factor matrices I_n x r) as Multiple factors
/// of uniform rank r with diagonal support.
MultipleFactors cp_to_multiple(std::span<const Matrix> cp_factors);

/// Direct CP evaluation sum_p a^(0)_p o a^(1)_p o ... (for reference use).
DenseTensor cp_product(std::span<const Matrix> cp_factors);

/// [(F_0 x_0 U_0)...(F_{N-1} x_{N-1} U_{N-1})], i.e. the product of the
/// transformed factors.
DenseTensor tucker_compose(const MultipleFactors& f, std::span<const Matrix> u);

struct TuckerCommutation {
  DenseTensor factor_side;  // [(F_n x_n U_n)...]
  DenseTensor core_side;    // [F_0...F_{N-1}] x_0 U_0 ... x_{N-1} U_{N-1}
  double relative_gap = 0.0;
};

TuckerCommutation tucker_commutation(const MultipleFactors& f, std::span<const Matrix> u);

struct AlsOptions {
  Index max_sweeps = 100;
  double tol = 1e-10;
  /// Ridge weight relative to trace(E^T E) / cols(E).
  double ridge = 1e-10;
  std::uint64_t seed = 0;
  /// Starting point; random when empty.
  std::optional<MultipleFactors> init;
};

struct AlsResult {
  MultipleFactors factors;
  /// ||x - product||_F after each sweep; entry 0 is the initial residual.
  std::vector<double> residual;
  Index sweeps = 0;
  bool converged = false;
};

/// Block coordinate descent over the factors, each block solved in closed form
/// through the contraction environment and ridge-regularized normal equations.
AlsResult als_fit(const DenseTensor& x, const Shape& ranks, const AlsOptions& opts = {});

struct RankBounds {
  double r_min = 0.0;
  double r_max = 0.0;
  Index recommended = 1;
};

/// Heuristic range for the uniform rank of a tensor with the given shape.
RankBounds rank_bounds(const Shape& shape);

/// Rank heuristic for point clouds: round(num_points^(1/3)).
Index pcu_rank_bound(Index num_points);

/// numel(x) / sum_n numel(factor_n).
double compression_ratio(const Shape& shape, const Shape& ranks);

}  // namespace mtensor
