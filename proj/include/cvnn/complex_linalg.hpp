#pragma once

// Dense complex matrices and the matrix norms used throughout the library.
//
// Norm conventions: every entrywise norm of a complex matrix is the norm of
// the real matrix of entry moduli, so the Frobenius norm is
// sqrt(sum |a_ij|^2) and the (p,q) norm is the q-norm of the vector of column
// p-norms taken on moduli. The spectral norm is sqrt(lambda_max(A^H A)).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cvnn/errors.hpp"

namespace cvnn {

using Complex = std::complex<double>;

template <typename T>
inline constexpr bool is_complex_v = false;
template <typename T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

/// Row-major dense matrix over double or std::complex<double>.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using CMatrix = Matrix<Complex>;
using RMatrix = Matrix<double>;

inline bool all_finite(const CMatrix& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline CMatrix hermitian_transpose(const CMatrix& a) {
  CMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
  return t;
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " times " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

/// y = A x
template <typename T>
void matvec(const Matrix<T>& a, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc{};
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
}

/// y = A^H x (plain transpose for real T)
template <typename T>
void matvec_adjoint(const Matrix<T>& a, std::span<const T> x, std::span<T> y) {
  std::fill(y.begin(), y.end(), T{});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    const T xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if constexpr (is_complex_v<T>) {
        y[j] += std::conj(r[j]) * xi;
      } else {
        y[j] += r[j] * xi;
      }
    }
  }
}

inline RMatrix entrywise_modulus_matrix(const CMatrix& a) {
  RMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) m.storage()[i] = std::abs(a.storage()[i]);
  return m;
}

/// Block form [[C, -D], [D, C]] for A = C + iD: the real linear map acting on
/// stacked (re; im) coordinates.
inline RMatrix real_embedding(const CMatrix& a) {
  const std::size_t r = a.rows();
  const std::size_t c = a.cols();
  RMatrix e(2 * r, 2 * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const Complex z = a(i, j);
      e(i, j) = z.real();
      e(i, j + c) = -z.imag();
      e(i + r, j) = z.imag();
      e(i + r, j + c) = z.real();
    }
  }
  return e;
}

template <typename T>
double frobenius_norm(const Matrix<T>& a) {
  double s = 0.0;
  for (const T& v : a.values()) s += std::norm(v);
  return std::sqrt(s);
}

namespace detail {

inline double vector_p_norm(std::span<const double> v, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  if (p == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

}  // namespace detail

/// q-norm of the vector of column p-norms, computed on entry moduli.
template <typename T>
double pq_norm(const Matrix<T>& a, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw DomainError("pq_norm requires p, q >= 1");
  std::vector<double> column(a.rows());
  std::vector<double> column_norms(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t i = 0; i < a.rows(); ++i) column[i] = std::abs(a(i, j));
    column_norms[j] = detail::vector_p_norm(column, p);
  }
  return detail::vector_p_norm(column_norms, q);
}

struct PowerIterationOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  std::uint64_t seed = 0;
};

struct PowerIterationResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Largest singular value of a linear map, given the action of its Gram
/// operator G = A^H A on a vector of length `dim`. Iterates v <- Gv/|Gv| from
/// a seeded Gaussian start and stops once the Rayleigh quotient changes by
/// less than tol (relative) between two iterations.
template <typename T, typename GramApply>
PowerIterationResult power_iteration(std::size_t dim, GramApply&& gram,
                                     const PowerIterationOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("power iteration tolerance must be positive");
  PowerIterationResult res;
  if (dim == 0) return res;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> v(dim), w(dim);
  for (auto& x : v) {
    if constexpr (is_complex_v<T>) {
      const double re = normal(rng);
      const double im = normal(rng);
      x = T(re, im);
    } else {
      x = normal(rng);
    }
  }
  auto norm2 = [](const std::vector<T>& x) {
    double s = 0.0;
    for (const T& e : x) s += std::norm(e);
    return std::sqrt(s);
  };
  const double n0 = norm2(v);
  for (auto& x : v) x /= n0;

  double lambda_prev = 0.0;
  res.converged = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    gram(std::span<const T>(v), std::span<T>(w));
    double lambda = 0.0;
    for (std::size_t i = 0; i < dim; ++i) lambda += std::real(std::conj(v[i]) * w[i]);
    const double wn = norm2(w);
    res.iterations = it;
    if (wn == 0.0) {
      // v landed in the null space; with a Gaussian start this only happens
      // for the zero map.
      res.value = 0.0;
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / wn;
    lambda = std::max(lambda, 0.0);
    if (it > 1 && std::abs(lambda - lambda_prev) <= opt.tol * lambda) {
      res.value = std::sqrt(lambda);
      res.converged = true;
      return res;
    }
    lambda_prev = lambda;
  }
  res.value = std::sqrt(lambda_prev);
  return res;
}

/// Spectral norm via power iteration on A^H A. The zero matrix short-circuits
/// to 0 without iterating.
template <typename T>
PowerIterationResult spectral_norm(const Matrix<T>& a,
                                   const PowerIterationOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("spectral_norm: tol must be positive");
  const bool zero = std::all_of(a.values().begin(), a.values().end(),
                                [](const T& x) { return x == T{}; });
  if (zero || a.empty()) return {};
  std::vector<T> tmp(a.rows());
  auto gram = [&](std::span<const T> x, std::span<T> y) {
    matvec(a, x, std::span<T>(tmp));
    matvec_adjoint(a, std::span<const T>(tmp), y);
  };
  return power_iteration<T>(a.cols(), gram, opt);
}

}  // namespace cvnn
