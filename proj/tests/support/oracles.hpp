#pragma once

// Reference implementations used only by the tests. They trade speed for
// obviousness and deliberately avoid the library's unfold/contraction code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "mtensor/multiple.hpp"
#include "mtensor/tensor.hpp"

namespace oracle {

using mtensor::DenseTensor;
using mtensor::Index;
using mtensor::Matrix;
using mtensor::Shape;

inline DenseTensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseTensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  return m;
}

// Odometer over a box of extents; returns false after the last tuple.
inline bool next_index(std::vector<Index>& idx, const Shape& ext) {
  for (Index k = 0; k < ext.size(); ++k) {
    if (++idx[k] < ext[k]) return true;
    idx[k] = 0;
  }
  return false;
}

// Column-major offset computed from scratch.
inline Index offset(const std::vector<Index>& idx, const Shape& ext) {
  Index off = 0, stride = 1;
  for (Index k = 0; k < ext.size(); ++k) {
    off += idx[k] * stride;
    stride *= ext[k];
  }
  return off;
}

// Nested sum over every output index and every rank tuple.
inline DenseTensor naive_multiple_product(const mtensor::MultipleFactors& f) {
  const Index n_modes = f.order();
  DenseTensor x(f.long_dims);
  std::vector<Index> i(n_modes, 0);
  do {
    double total = 0.0;
    std::vector<Index> p(n_modes, 0);
    do {
      double prod = 1.0;
      for (Index n = 0; n < n_modes; ++n) {
        std::vector<Index> fi = p;
        fi[n] = i[n];
        prod *= f.factors[n].data()[offset(fi, f.factors[n].shape())];
      }
      total += prod;
    } while (next_index(p, f.ranks));
    x.data()[offset(i, f.long_dims)] = total;
  } while (next_index(i, f.long_dims));
  return x;
}

// X[i,j,k] = sum_{p,q,s} A[i,q,s] B[p,j,s] C[p,q,k].
inline DenseTensor triple_product(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c) {
  const Index I = a.extent(0), J = b.extent(1), K = c.extent(2);
  const Index P = b.extent(0), Q = a.extent(1), S = a.extent(2);
  DenseTensor x({I, J, K});
  for (Index i = 0; i < I; ++i)
    for (Index j = 0; j < J; ++j)
      for (Index k = 0; k < K; ++k) {
        double s = 0.0;
        for (Index p = 0; p < P; ++p)
          for (Index q = 0; q < Q; ++q)
            for (Index r = 0; r < S; ++r) s += a.at({i, q, r}) * b.at({p, j, r}) * c.at({p, q, k});
        x.at({i, j, k}) = s;
      }
  return x;
}

// Naive mode-n product: result[.., a, ..] = sum_b u(a, b) t[.., b, ..].
inline DenseTensor naive_mode_product(const DenseTensor& t, const Matrix& u, Index mode) {
  Shape out_shape = t.shape();
  out_shape[mode] = static_cast<Index>(u.rows());
  DenseTensor out(out_shape);
  std::vector<Index> idx(out_shape.size(), 0);
  do {
    double s = 0.0;
    std::vector<Index> src = idx;
    for (Index b = 0; b < t.extent(mode); ++b) {
      src[mode] = b;
      s += u(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(b)) * t.data()[offset(src, t.shape())];
    }
    out.data()[offset(idx, out_shape)] = s;
  } while (next_index(idx, out_shape));
  return out;
}

// Central difference of a scalar function with respect to one entry of a
// matrix that the function reads by reference.
inline double central_difference(const std::function<double()>& f, double& entry, double h) {
  const double saved = entry;
  entry = saved + h;
  const double up = f();
  entry = saved - h;
  const double down = f();
  entry = saved;
  return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Minimizer of gamma|e| + w (a + e - m)^2 + eta/2 (e - e_prev)^2 by
// exhaustive search: a coarse grid over [lo, hi], then a fine grid around the
// coarse winner.
inline double e_step_grid(double a, double e_prev, double m, bool observed, double gamma, double eta, double lo = -3.0,
                          double hi = 3.0, double coarse = 1e-3, double fine = 1e-6) {
  const double w = observed ? 1.0 : 0.0;
  auto obj = [&](double e) {
    const double r = a + e - m;
    const double d = e - e_prev;
    return gamma * std::abs(e) + w * r * r + 0.5 * eta * d * d;
  };
  auto scan = [&](double from, double to, double step) {
    double best = from, best_v = std::numeric_limits<double>::infinity();
    const auto n = static_cast<long>(std::floor((to - from) / step + 0.5));
    for (long s = 0; s <= n; ++s) {
      const double e = from + static_cast<double>(s) * step;
      const double v = obj(e);
      if (v < best_v) {
        best_v = v;
        best = e;
      }
    }
    // zero is the kink of the l1 term; make sure it is always a candidate
    if (from <= 0.0 && to >= 0.0 && obj(0.0) <= best_v) best = 0.0;
    return best;
  };
  const double c = scan(lo, hi, coarse);
  return scan(std::max(lo, c - 2.0 * coarse), std::min(hi, c + 2.0 * coarse), fine);
}

}  // namespace oracle
