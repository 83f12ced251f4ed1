#pragma once

// Maurey sparsification over complex convex hulls and a pointwise check of
// the matrix cover {ZA : ||A||_{2,1} <= a} built from the 4dm signed atoms.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cvnn/bounds.hpp"
#include "cvnn/complex_linalg.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/spectral.hpp"

namespace cvnn {

struct MaureyInstance {
  std::vector<CMatrix> elements;
  std::vector<double> weights;
  std::size_t k = 1;

  double alpha() const {
    double a = 0.0;
    for (double w : weights) a += w;
    return a;
  }

  void validate() const {
    if (elements.empty()) throw DomainError("Maurey instance has no elements");
    if (elements.size() != weights.size()) throw ShapeError("one weight per element required");
    if (k == 0) throw DomainError("sample budget k must be positive");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be non-negative");
    if (!(alpha() > 0.0)) throw DomainError("total weight must be positive");
    for (const auto& g : elements)
      if (g.rows() != elements[0].rows() || g.cols() != elements[0].cols())
        throw ShapeError("all elements must share one shape");
  }

  /// f = sum alpha_i g_i
  CMatrix target() const {
    CMatrix f(elements[0].rows(), elements[0].cols());
    for (std::size_t i = 0; i < elements.size(); ++i)
      for (std::size_t e = 0; e < f.size(); ++e)
        f.storage()[e] += weights[i] * elements[i].storage()[e];
    return f;
  }
};

struct MaureyResult {
  std::vector<std::size_t> counts;
  CMatrix approximant;
  double error = 0.0;
};

/// (alpha / k) sum_i counts_i g_i
inline CMatrix maurey_approximant(const MaureyInstance& inst, std::span<const std::size_t> counts) {
  const double scale = inst.alpha() / double(inst.k);
  CMatrix out(inst.elements[0].rows(), inst.elements[0].cols());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const double c = scale * double(counts[i]);
    for (std::size_t e = 0; e < out.size(); ++e) out.storage()[e] += c * inst.elements[i].storage()[e];
  }
  return out;
}

/// Draws k atoms i.i.d. with P(i) = alpha_i / alpha and keeps the best of
/// `trials` draws by Frobenius error against f.
inline MaureyResult maurey_sparsify(const MaureyInstance& inst, std::size_t trials,
                                    std::uint64_t seed) {
  inst.validate();
  if (trials == 0) throw DomainError("trials must be at least 1");
  const CMatrix f = inst.target();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(inst.weights.begin(), inst.weights.end());
  MaureyResult best;
  best.error = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> counts(inst.elements.size());
  for (std::size_t t = 0; t < trials; ++t) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < inst.k; ++j) ++counts[pick(rng)];
    CMatrix approx = maurey_approximant(inst, counts);
    double s = 0.0;
    for (std::size_t e = 0; e < f.size(); ++e) s += std::norm(f.storage()[e] - approx.storage()[e]);
    const double err = std::sqrt(s);
    if (err < best.error) {
      best.error = err;
      best.counts = counts;
      best.approximant = std::move(approx);
    }
  }
  return best;
}

/// Y with every column scaled to unit Euclidean norm; zero columns stay zero.
inline CMatrix normalize_columns(const CMatrix& z) {
  CMatrix y = z;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) s += std::norm(z(i, j));
    const double n = std::sqrt(s);
    if (n == 0.0) continue;
    for (std::size_t i = 0; i < z.rows(); ++i) y(i, j) /= n;
  }
  return y;
}

/// Index of the atom sigma * phase * Y e_i e_j^T in the list built by
/// lemma1_construct_basis (phase 1 or sqrt(-1), sigma = +1 or -1).
inline std::size_t lemma1_atom_index(std::size_t i, std::size_t j, bool imaginary, bool negative,
                                     std::size_t m) {
  return ((i * m + j) * 2 + (imaginary ? 1 : 0)) * 2 + (negative ? 1 : 0);
}

/// The 4dm atoms {+-Y e_i e_j^T, +-sqrt(-1) Y e_i e_j^T}, each n x m.
inline std::vector<CMatrix> lemma1_construct_basis(const CMatrix& y, std::size_t m) {
  if (m == 0 || y.cols() == 0 || y.rows() == 0) throw ShapeError("basis needs d, m, n >= 1");
  const std::size_t d = y.cols();
  std::vector<CMatrix> basis(4 * d * m, CMatrix(y.rows(), m));
  const Complex phases[2] = {Complex(1.0, 0.0), Complex(0.0, 1.0)};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (int im = 0; im < 2; ++im) {
        for (int neg = 0; neg < 2; ++neg) {
          CMatrix& v = basis[lemma1_atom_index(i, j, im, neg, m)];
          const Complex c = (neg ? -1.0 : 1.0) * phases[im];
          for (std::size_t r = 0; r < y.rows(); ++r) v(r, j) = c * y(r, i);
        }
      }
    }
  }
  return basis;
}

/// Signed-atom weights reconstructing Y S exactly, with S = M (.) A
/// (S_ij = ||Z_{:,i}|| A_ij). Their total is sum |Re S| + |Im S|; when that
/// falls short of `alpha` the remainder is split evenly over the canceling
/// pair (+Y e_0 e_0^T, -Y e_0 e_0^T).
inline std::vector<double> lemma1_weights(const CMatrix& s, double alpha) {
  const std::size_t d = s.rows();
  const std::size_t m = s.cols();
  std::vector<double> w(4 * d * m, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double re = s(i, j).real();
      const double im = s(i, j).imag();
      w[lemma1_atom_index(i, j, false, re < 0.0, m)] = std::abs(re);
      w[lemma1_atom_index(i, j, true, im < 0.0, m)] = std::abs(im);
      total += std::abs(re) + std::abs(im);
    }
  }
  if (total < alpha) {
    const double pad = 0.5 * (alpha - total);
    w[lemma1_atom_index(0, 0, false, false, m)] += pad;
    w[lemma1_atom_index(0, 0, false, true, m)] += pad;
  }
  return w;
}

struct CoverReport {
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t n = 0;
  double a = 0.0;
  double eps = 0.0;
  double r = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  std::size_t trials = 0;
  std::size_t k = 0;
  double alpha = 0.0;
  double z_norm = 0.0;
  /// Worst best-of-trials error over all samples.
  double achieved_error = 0.0;
  /// alpha * max ||V_i|| / sqrt(k), the guaranteed expected error.
  double theoretical_error = 0.0;
  double fraction_within_eps = 0.0;
  double fraction_within_sqrt2_eps = 0.0;
  /// Largest |sum w_i V_i - ZA| before sparsification.
  double max_reconstruction_error = 0.0;
  /// Largest ||S||_1 / alpha over samples (never above 1).
  double max_s1_over_alpha = 0.0;
  /// Largest (atom mass) / alpha; above 1 when the re/im split inflates the mass.
  double max_mass_over_alpha = 0.0;
  std::size_t distinct_cover_points_used = 0;
  double bound_ln_cover = 0.0;
};

/// n x d matrix with i.i.d. complex Gaussian entries of unit variance.
inline CMatrix random_data_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  CMatrix z(n, d);
  for (auto& e : z.storage()) {
    const double re = half(rng);
    const double im = half(rng);
    e = Complex(re, im);
  }
  return z;
}

/// For `n_samples` random A (d x m, ||A||_{2,1} = a u with u ~ U(0,1)),
/// writes ZA over the signed atoms and sparsifies with
/// k = ceil(a^2 ||Z||_F^2 / eps^2) atoms (r = infinity).
inline CoverReport lemma1_cover_check(const CMatrix& z, std::size_t m, double a, double eps,
                                      std::size_t n_samples, std::size_t trials,
                                      std::uint64_t seed) {
  if (z.empty()) throw ShapeError("Z must be non-empty");
  if (!(a > 0.0) || !(eps > 0.0)) throw DomainError("a and eps must be positive");
  if (m == 0 || n_samples == 0 || trials == 0) throw DomainError("m, samples, trials must be >= 1");
  const double z_norm = frobenius_norm(z);
  if (!(z_norm > 0.0)) throw DomainError("Z must be nonzero");

  CoverReport rep;
  rep.n = z.rows();
  rep.d = z.cols();
  rep.m = m;
  rep.a = a;
  rep.eps = eps;
  rep.samples = n_samples;
  rep.trials = trials;
  rep.z_norm = z_norm;
  rep.alpha = a * z_norm;
  rep.k = static_cast<std::size_t>(std::ceil(a * a * z_norm * z_norm / (eps * eps)));
  rep.bound_ln_cover = covering_bound_linear(a, z_norm, m, rep.r, eps, rep.d);

  const CMatrix y = normalize_columns(z);
  const auto basis = lemma1_construct_basis(y, m);
  double max_v = 0.0;
  for (const auto& v : basis) max_v = std::max(max_v, frobenius_norm(v));
  rep.theoretical_error = rep.alpha * max_v / std::sqrt(double(rep.k));

  std::vector<double> col_norm(rep.d);
  for (std::size_t i = 0; i < rep.d; ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < rep.n; ++r) s += std::norm(z(r, i));
    col_norm[i] = std::sqrt(s);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::set<std::vector<std::size_t>> distinct;
  std::size_t within = 0;
  std::size_t within_sqrt2 = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    CMatrix amat(rep.d, m);
    for (auto& e : amat.storage()) {
      const double re = normal(rng);
      const double im = normal(rng);
      e = Complex(re, im);
    }
    const double target_norm = a * unit(rng);
    const double cur = pq_norm(amat, 2.0, 1.0);
    for (auto& e : amat.storage()) e *= target_norm / cur;

    const CMatrix za = matmul(z, amat);
    CMatrix smat(rep.d, m);
    double s1 = 0.0;
    for (std::size_t i = 0; i < rep.d; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        smat(i, j) = col_norm[i] * amat(i, j);
        s1 += std::abs(smat(i, j));
      }
    rep.max_s1_over_alpha = std::max(rep.max_s1_over_alpha, s1 / rep.alpha);

    MaureyInstance inst;
    inst.elements = basis;
    inst.weights = lemma1_weights(smat, rep.alpha);
    inst.k = rep.k;
    rep.max_mass_over_alpha = std::max(rep.max_mass_over_alpha, inst.alpha() / rep.alpha);

    const CMatrix recon = inst.target();
    double rerr = 0.0;
    for (std::size_t e = 0; e < za.size(); ++e) rerr += std::norm(recon.storage()[e] - za.storage()[e]);
    rep.max_reconstruction_error = std::max(rep.max_reconstruction_error, std::sqrt(rerr));

    const auto res = maurey_sparsify(inst, trials, seed + 1 + s);
    rep.achieved_error = std::max(rep.achieved_error, res.error);
    if (res.error <= eps) ++within;
    if (res.error <= std::sqrt(2.0) * eps) ++within_sqrt2;
    distinct.insert(res.counts);
  }
  rep.fraction_within_eps = double(within) / double(n_samples);
  rep.fraction_within_sqrt2_eps = double(within_sqrt2) / double(n_samples);
  rep.distinct_cover_points_used = distinct.size();
  return rep;
}

inline std::string to_key_values(const CoverReport& r) {
  using detail::fmt17;
  std::ostringstream out;
  out << "d = " << r.d << "\n";
  out << "m = " << r.m << "\n";
  out << "n = " << r.n << "\n";
  out << "a = " << fmt17(r.a) << "\n";
  out << "eps = " << fmt17(r.eps) << "\n";
  out << "r = " << (std::isinf(r.r) ? std::string("inf") : fmt17(r.r)) << "\n";
  out << "samples = " << r.samples << "\n";
  out << "trials = " << r.trials << "\n";
  out << "k = " << r.k << "\n";
  out << "alpha = " << fmt17(r.alpha) << "\n";
  out << "z_norm = " << fmt17(r.z_norm) << "\n";
  out << "achieved_error = " << fmt17(r.achieved_error) << "\n";
  out << "theoretical_error = " << fmt17(r.theoretical_error) << "\n";
  out << "fraction_within_eps = " << fmt17(r.fraction_within_eps) << "\n";
  out << "fraction_within_sqrt2_eps = " << fmt17(r.fraction_within_sqrt2_eps) << "\n";
  out << "max_reconstruction_error = " << fmt17(r.max_reconstruction_error) << "\n";
  out << "max_s1_over_alpha = " << fmt17(r.max_s1_over_alpha) << "\n";
  out << "max_mass_over_alpha = " << fmt17(r.max_mass_over_alpha) << "\n";
  out << "distinct_cover_points_used = " << r.distinct_cover_points_used << "\n";
  out << "bound_ln_cover = " << fmt17(r.bound_ln_cover) << "\n";
  return out.str();
}

}  // namespace cvnn
