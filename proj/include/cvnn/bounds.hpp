#pragma once

// Closed-form generalization, Rademacher, covering-number and sample-size
// bounds in terms of the spectral complexity R_A.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cvnn/errors.hpp"

namespace cvnn {

struct BoundInputs {
  double M = 1.0;       // loss ceiling
  double n = 1.0;       // sample count
  double W = 1.0;       // max layer width
  double z_norm = 1.0;  // Frobenius norm of the data matrix
  double r_a = 0.0;     // spectral complexity
  double delta = 0.05;  // confidence parameter
};

namespace detail {

inline void check_common(double M, double n, double W, double z_norm, double r_a) {
  if (!(M > 0.0) || !std::isfinite(M)) throw DomainError("M must be positive and finite");
  if (!(n >= 1.0) || !std::isfinite(n)) throw DomainError("n must be at least 1");
  if (!(W >= 1.0) || !std::isfinite(W)) throw DomainError("W must be at least 1");
  if (!(z_norm > 0.0) || !std::isfinite(z_norm)) throw DomainError("z_norm must be positive");
  if (!(r_a >= 0.0) || !std::isfinite(r_a)) throw DomainError("r_a must be non-negative");
}

inline void check(const BoundInputs& in) {
  check_common(in.M, in.n, in.W, in.z_norm, in.r_a);
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

/// c * z * sqrt(2 ln 2W) * ln n * R / n, always evaluated in this order so
/// that coefficient ratios carry over exactly.
inline double complexity_term(double c, double z_norm, double W, double n, double r_a) {
  return c * z_norm * std::sqrt(2.0 * std::log(2.0 * W)) * std::log(n) * r_a / n;
}

inline double confidence_term(double M, double n, double delta) {
  return M * std::sqrt(std::log(2.0 / delta) / (2.0 * n));
}

}  // namespace detail

/// 4M/n^{3/2} + 18 z sqrt(2 ln 2W) ln(n) R_A / n
inline double rademacher_bound(double M, double n, double W, double z_norm, double r_a) {
  detail::check_common(M, n, W, z_norm, r_a);
  return 4.0 * M / std::pow(n, 1.5) + detail::complexity_term(18.0, z_norm, W, n, r_a);
}

/// i.i.d. data: 8M/n^{3/2} + 36 z sqrt(2 ln 2W) ln(n) R_A / n + 3M sqrt(ln(2/delta) / 2n)
inline double bound_iid(const BoundInputs& in) {
  detail::check(in);
  return 8.0 * in.M / std::pow(in.n, 1.5) +
         detail::complexity_term(36.0, in.z_norm, in.W, in.n, in.r_a) +
         3.0 * detail::confidence_term(in.M, in.n, in.delta);
}

/// Sequential data: 8M/n + 24 z sqrt(2 ln 2W) ln(n) R_A / n + M sqrt(ln(2/delta) / 2n)
inline double bound_sequential(const BoundInputs& in) {
  detail::check(in);
  return 8.0 * in.M / in.n + detail::complexity_term(24.0, in.z_norm, in.W, in.n, in.r_a) +
         detail::confidence_term(in.M, in.n, in.delta);
}

struct LayerBoundTerms {
  double s = 1.0;    // spectral norm
  double b = 1.0;    // (2,1) norm of the transpose
  double rho = 1.0;  // Lipschitz constant
};

/// ln N <= (z^2 ln(4W^2) / eps^2) * prod(s_j^2 rho_j^2) * (sum (b_i/s_i)^{2/3})^3
inline double covering_bound_network(double z_norm, double W, double eps,
                                     const std::vector<LayerBoundTerms>& layers) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (!(W >= 1.0)) throw DomainError("W must be at least 1");
  if (layers.empty()) throw DomainError("need at least one layer");
  double prod = 1.0;
  double sum = 0.0;
  for (const auto& l : layers) {
    if (!(l.s > 0.0)) throw DomainError("covering bound needs every spectral norm positive");
    prod *= l.s * l.s * l.rho * l.rho;
    sum += std::cbrt((l.b / l.s) * (l.b / l.s));
  }
  return z_norm * z_norm * std::log(4.0 * W * W) / (eps * eps) * prod * (sum * sum * sum);
}

/// ln N <= ceil(a^2 b^2 m^{2/r} / eps^2) * ln(4dm); r = infinity gives m^{2/r} = 1.
inline double covering_bound_linear(double a, double b, std::uint64_t m, double r, double eps,
                                    std::uint64_t d) {
  if (!(a > 0.0) || !(b > 0.0) || !(eps > 0.0)) throw DomainError("a, b, eps must be positive");
  if (m == 0 || d == 0) throw DomainError("m and d must be positive");
  if (!(r >= 1.0)) throw DomainError("r must lie in [1, inf]");
  const double mr = std::isinf(r) ? 1.0 : std::pow(double(m), 2.0 / r);
  const double k = std::ceil(a * a * b * b * mr / (eps * eps));
  return k * std::log(4.0 * double(d) * double(m));
}

/// Smallest n with n >= (8/eps^3) (8M + 36 z sqrt(2 ln 2W) R_A + 3M sqrt(ln(2/delta)/2))^3.
inline std::uint64_t pac_sample_size(double eps, double delta, double M, double z_norm, double W,
                                     double r_a) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  detail::check_common(M, 1.0, W, z_norm, r_a);
  const double inner = 8.0 * M + 36.0 * z_norm * std::sqrt(2.0 * std::log(2.0 * W)) * r_a +
                       3.0 * M * std::sqrt(std::log(2.0 / delta) / 2.0);
  const double rhs = 8.0 / (eps * eps * eps) * (inner * inner * inner);
  if (!(rhs < 18446744073709551616.0)) throw DomainError("required sample size overflows 64 bits");
  return static_cast<std::uint64_t>(std::ceil(rhs));
}

}  // namespace cvnn
