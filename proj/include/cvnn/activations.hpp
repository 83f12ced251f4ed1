#pragma once

// Complex activation functions, their real 2x2 Jacobians, declared Lipschitz
// constants and an empirical Lipschitz probe.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "cvnn/complex_linalg.hpp"
#include "cvnn/errors.hpp"

namespace cvnn {

enum class ActivationType { SplitTanh, CReLU, ModReLU, AmplitudeTanh };

struct Activation {
  ActivationType type = ActivationType::SplitTanh;
  /// ModReLU threshold b; unused by the other kinds.
  double bias = 0.0;

  static Activation split_tanh() { return {ActivationType::SplitTanh, 0.0}; }
  static Activation crelu() { return {ActivationType::CReLU, 0.0}; }
  static Activation amplitude_tanh() { return {ActivationType::AmplitudeTanh, 0.0}; }
  static Activation modrelu(double b) {
    if (!std::isfinite(b)) throw DomainError("modReLU threshold must be finite");
    return {ActivationType::ModReLU, b};
  }

  bool operator==(const Activation&) const = default;
};

/// Partials of (Re out, Im out) with respect to (Re in, Im in):
/// j[row][col], rows are outputs, columns are inputs.
using Jacobian2 = std::array<std::array<double, 2>, 2>;

inline Complex apply(const Activation& act, Complex z) {
  switch (act.type) {
    case ActivationType::SplitTanh:
      return {std::tanh(z.real()), std::tanh(z.imag())};
    case ActivationType::CReLU:
      return {std::max(z.real(), 0.0), std::max(z.imag(), 0.0)};
    case ActivationType::ModReLU: {
      const double r = std::abs(z);
      const double m = r + act.bias;
      if (m <= 0.0) return {0.0, 0.0};
      // arg(0) = 0 picks the positive real axis when b > 0.
      if (r == 0.0) return {m, 0.0};
      return z * (m / r);
    }
    case ActivationType::AmplitudeTanh: {
      const double r = std::abs(z);
      if (r == 0.0) return {0.0, 0.0};
      return z * (std::tanh(r) / r);
    }
  }
  return z;
}

/// Kinks (CReLU axes, ModReLU circle |z| = -b, ModReLU at z = 0) get zero
/// rows for the inactive coordinate.
inline Jacobian2 jacobian(const Activation& act, Complex z) {
  const double x = z.real();
  const double y = z.imag();
  switch (act.type) {
    case ActivationType::SplitTanh: {
      const double tx = std::tanh(x);
      const double ty = std::tanh(y);
      return {{{1.0 - tx * tx, 0.0}, {0.0, 1.0 - ty * ty}}};
    }
    case ActivationType::CReLU:
      return {{{x > 0.0 ? 1.0 : 0.0, 0.0}, {0.0, y > 0.0 ? 1.0 : 0.0}}};
    case ActivationType::ModReLU: {
      const double r = std::abs(z);
      if (r == 0.0 || r + act.bias <= 0.0) return {{{0.0, 0.0}, {0.0, 0.0}}};
      // d/dz of z + b z/|z|
      const double c = act.bias / (r * r * r);
      return {{{1.0 + c * y * y, -c * x * y}, {-c * x * y, 1.0 + c * x * x}}};
    }
    case ActivationType::AmplitudeTanh: {
      const double r = std::abs(z);
      if (r == 0.0) return {{{1.0, 0.0}, {0.0, 1.0}}};
      const double t = std::tanh(r);
      const double g = t / r;
      // d(g(r))/dr / r, with g(r) = tanh(r)/r
      const double h = ((1.0 - t * t) / r - t / (r * r)) / r;
      return {{{g + h * x * x, h * x * y}, {h * x * y, g + h * y * y}}};
    }
  }
  return {{{1.0, 0.0}, {0.0, 1.0}}};
}

/// Lipschitz constants established analytically: 1 for SplitTanh and CReLU,
/// 2*alpha + 1 for AmplitudeTanh on {|Re z|, |Im z| <= alpha}. ModReLU has no
/// declared constant (nullopt).
inline std::optional<double> declared_lipschitz(const Activation& act,
                                                std::optional<double> domain_bound) {
  switch (act.type) {
    case ActivationType::SplitTanh:
    case ActivationType::CReLU:
      return 1.0;
    case ActivationType::ModReLU:
      return std::nullopt;
    case ActivationType::AmplitudeTanh:
      if (!domain_bound || !std::isfinite(*domain_bound) || *domain_bound <= 0.0) {
        throw DomainError("amplitude-tanh Lipschitz constant needs a finite positive domain bound");
      }
      return 2.0 * *domain_bound + 1.0;
  }
  return std::nullopt;
}

/// Empirical lower bound on the Lipschitz constant over the box
/// {|Re z|, |Im z| <= domain_bound}: the largest observed
/// |f(z1) - f(z2)| / |z1 - z2|. Half of the pairs are independent uniform
/// draws, half are local perturbations that probe the derivative.
inline double lipschitz_probe(const Activation& act, double domain_bound, std::size_t n_pairs,
                              std::uint64_t seed) {
  if (n_pairs < 1) throw DomainError("lipschitz_probe needs at least one pair");
  if (!(domain_bound > 0.0)) throw DomainError("lipschitz_probe needs a positive domain bound");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-domain_bound, domain_bound);
  std::uniform_real_distribution<double> local(-1e-3 * domain_bound, 1e-3 * domain_bound);
  auto clamp = [&](double v) { return std::clamp(v, -domain_bound, domain_bound); };
  double best = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Complex z1(box(rng), box(rng));
    Complex z2;
    if (i % 2 == 0) {
      z2 = Complex(box(rng), box(rng));
    } else {
      z2 = Complex(clamp(z1.real() + local(rng)), clamp(z1.imag() + local(rng)));
    }
    const double dz = std::abs(z1 - z2);
    if (dz == 0.0) continue;
    best = std::max(best, std::abs(apply(act, z1) - apply(act, z2)) / dz);
  }
  return best;
}

inline std::string to_string(const Activation& act) {
  switch (act.type) {
    case ActivationType::SplitTanh: return "splittanh";
    case ActivationType::CReLU: return "crelu";
    case ActivationType::AmplitudeTanh: return "amptanh";
    case ActivationType::ModReLU: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "modrelu(%.17g)", act.bias);
      return buf;
    }
  }
  return "?";
}

/// Accepts splittanh, crelu, amptanh and modrelu(<b>).
inline Activation parse_activation(std::string_view s) {
  if (s == "splittanh") return Activation::split_tanh();
  if (s == "crelu") return Activation::crelu();
  if (s == "amptanh") return Activation::amplitude_tanh();
  if (s.starts_with("modrelu(") && s.ends_with(")")) {
    const std::string inner(s.substr(8, s.size() - 9));
    std::size_t used = 0;
    double b = 0.0;
    try {
      b = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != inner.size() || inner.empty()) {
      throw DomainError("bad modrelu threshold: " + std::string(s));
    }
    return Activation::modrelu(b);
  }
  throw DomainError("unknown activation: " + std::string(s));
}

}  // namespace cvnn
