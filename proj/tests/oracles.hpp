#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "cvnn/activations.hpp"
#include "cvnn/complex_linalg.hpp"
#include "cvnn/network.hpp"

namespace oracle {

using cvnn::CMatrix;
using cvnn::Complex;
using cvnn::RMatrix;

inline CMatrix random_cmatrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  CMatrix m(r, c);
  for (auto& z : m.storage()) {
    const double re = n(rng);
    const double im = n(rng);
    z = Complex(re, im);
  }
  return m;
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(RMatrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  return ev;
}

/// Largest singular value of a real matrix: sqrt(lambda_max(E^T E)).
inline double dense_sigma_max(const RMatrix& e) {
  RMatrix g(e.cols(), e.cols());
  for (std::size_t i = 0; i < e.cols(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < e.rows(); ++k) s += e(k, i) * e(k, j);
      g(i, j) = s;
    }
  const auto ev = jacobi_eigenvalues(g);
  return std::sqrt(std::max(0.0, *std::max_element(ev.begin(), ev.end())));
}

/// Largest singular value of a complex matrix through its real embedding,
/// built here independently of cvnn::real_embedding.
inline double complex_sigma_max(const CMatrix& a) {
  RMatrix e(2 * a.rows(), 2 * a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      e(2 * i, 2 * j) = a(i, j).real();
      e(2 * i, 2 * j + 1) = -a(i, j).imag();
      e(2 * i + 1, 2 * j) = a(i, j).imag();
      e(2 * i + 1, 2 * j + 1) = a(i, j).real();
    }
  return dense_sigma_max(e);
}

/// Direct convolution, one output entry at a time.
inline std::vector<Complex> direct_conv(const std::vector<Complex>& kernel, std::size_t kh, std::size_t kw,
                                        std::size_t cin, std::size_t cout, std::size_t h, std::size_t w,
                                        const std::vector<Complex>& x) {
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  std::vector<Complex> y(cout * oh * ow);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        Complex acc{};
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t u = 0; u < kh; ++u)
            for (std::size_t v = 0; v < kw; ++v)
              acc += kernel[((o * cin + c) * kh + u) * kw + v] * x[(c * h + i + u) * w + j + v];
        y[(o * oh + i) * ow + j] = acc;
      }
  return y;
}

/// Ranks by counting: 1 + #smaller + (#equal - 1)/2.
inline std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, eq = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++eq;
    }
    r[i] = 1.0 + less + (eq - 1.0) / 2.0;
  }
  return r;
}

/// Pearson correlation by the raw-moment formula.
inline double pearson_raw(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

inline double spearman_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_raw(counting_ranks(x), counting_ranks(y));
}

/// Two-sided permutation p over all n! reorderings of y.
inline double permutation_p_enumerate(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = counting_ranks(x);
  const auto ry = counting_ranks(y);
  const double obs = std::abs(pearson_raw(rx, ry));
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::uint64_t hit = 0, total = 0;
  std::vector<double> py(y.size());
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) py[i] = ry[perm[i]];
    if (std::abs(pearson_raw(rx, py)) >= obs - 1e-12) ++hit;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return double(hit) / double(total);
}

/// Forward pass of a dense-only network via real embeddings: every layer acts
/// on stacked (re; im) vectors, activations on (re_k, im_k) pairs.
inline std::vector<Complex> real_embedding_forward(const cvnn::Network& net, const std::vector<Complex>& x) {
  std::vector<double> v(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    v[i] = x[i].real();
    v[i + x.size()] = x[i].imag();
  }
  for (const auto& l : net.layers()) {
    const CMatrix a = CMatrix(l.out_shape.size(), l.in_shape.size(), l.weights);
    const RMatrix e = cvnn::real_embedding(a);
    std::vector<double> w(e.rows());
    const std::size_t m = a.rows();
    for (std::size_t i = 0; i < e.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < e.cols(); ++j) s += e(i, j) * v[j];
      w[i] = s;
    }
    for (std::size_t i = 0; i < m; ++i) {
      w[i] += l.thresholds[i].real();
      w[i + m] += l.thresholds[i].imag();
    }
    if (l.spec.activation) {
      for (std::size_t i = 0; i < m; ++i) {
        const Complex z = cvnn::apply(*l.spec.activation, Complex(w[i], w[i + m]));
        w[i] = z.real();
        w[i + m] = z.imag();
      }
    }
    v = std::move(w);
  }
  const std::size_t m = v.size() / 2;
  std::vector<Complex> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = Complex(v[i], v[i + m]);
  return out;
}

/// Minimum error over every composition (k_1..k_N) of k, by recursion.
inline double maurey_exhaustive(const std::vector<CMatrix>& g, const std::vector<double>& w, std::size_t k) {
  const double alpha = std::accumulate(w.begin(), w.end(), 0.0);
  CMatrix f(g[0].rows(), g[0].cols());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t e = 0; e < f.size(); ++e) f.storage()[e] += w[i] * g[i].storage()[e];
  double best = INFINITY;
  std::vector<std::size_t> counts(g.size(), 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == g.size()) {
      counts[i] = left;
      double s = 0.0;
      for (std::size_t e = 0; e < f.size(); ++e) {
        Complex a{};
        for (std::size_t j = 0; j < g.size(); ++j) a += (alpha / double(k)) * double(counts[j]) * g[j].storage()[e];
        s += std::norm(f.storage()[e] - a);
      }
      best = std::min(best, std::sqrt(s));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, k);
  return best;
}

}  // namespace oracle
