#pragma once

// Excess risk, Spearman rank correlation with exact and asymptotic p-values,
// and the training-trace CSV format.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "cvnn/errors.hpp"

namespace cvnn {

inline double excess_risk(double train_acc, double test_acc) {
  if (!(train_acc >= 0.0 && train_acc <= 1.0) || !(test_acc >= 0.0 && test_acc <= 1.0))
    throw DomainError("accuracies must lie in [0, 1]");
  return train_acc - test_acc;
}

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double rank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = rank;
    i = j;
  }
  return r;
}

enum class PValueMethod { ExactPermutation, StudentT };

struct SpearmanResult {
  double scc = 0.0;
  double p = 1.0;
  PValueMethod method = PValueMethod::ExactPermutation;
};

/// Sample sizes below this use the exact permutation distribution.
inline constexpr std::size_t kExactPermutationLimit = 20;

namespace detail {

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sxy += da * db;
    sxx += da * da;
    syy += db * db;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("rank variance is zero (constant sequence)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided permutation p-value of sum_i a_i b_pi(i) for integer scores
/// (midranks doubled). Counts distinct assignments of b's tie classes to
/// positions; each carries the same number of underlying permutations, so
/// ratios equal probabilities over all n! orderings.
inline double exact_permutation_p(const std::vector<std::int64_t>& a_in,
                                  const std::vector<std::int64_t>& b) {
  const std::size_t n = a_in.size();
  std::vector<std::int64_t> a = a_in;
  std::sort(a.begin(), a.end());

  // Tie classes of b, ascending by value.
  std::map<std::int64_t, std::size_t> classes;
  for (auto v : b) ++classes[v];
  std::vector<std::int64_t> value;
  std::vector<std::size_t> mult;
  for (const auto& [v, c] : classes) {
    value.push_back(v);
    mult.push_back(c);
  }
  const std::size_t nc = value.size();

  std::int64_t ga = 0, gb = 0;
  for (auto v : a) ga = std::gcd(ga, v);
  for (auto v : value) gb = std::gcd(gb, v);
  const std::int64_t unit = std::max<std::int64_t>(ga, 1) * std::max<std::int64_t>(gb, 1);

  // Mixed-radix encoding of per-class usage counts.
  std::vector<std::size_t> radix(nc + 1, 1);
  for (std::size_t c = 0; c < nc; ++c) radix[c + 1] = radix[c] * (mult[c] + 1);
  const std::size_t n_states = radix[nc];
  std::vector<std::vector<std::uint32_t>> by_layer(n + 1);
  std::vector<std::int64_t> lo(n_states), hi(n_states);
  std::vector<std::int64_t> used;
  for (std::size_t s = 0; s < n_states; ++s) {
    used.clear();
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t u = (s / radix[c]) % (mult[c] + 1);
      used.insert(used.end(), u, value[c]);
    }
    const std::size_t k = used.size();
    by_layer[k].push_back(std::uint32_t(s));
    // Rearrangement inequality: the partial sum over the first k positions
    // lies between the anti-sorted and sorted pairings.
    std::int64_t mx = 0, mn = 0;
    for (std::size_t i = 0; i < k; ++i) {
      mx += a[i] * used[i];
      mn += a[i] * used[k - 1 - i];
    }
    lo[s] = mn / unit;
    hi[s] = mx / unit;
  }

  std::vector<std::size_t> offset(n_states, 0);
  auto layout = [&](std::size_t k) {
    std::size_t total = 0;
    for (auto s : by_layer[k]) {
      offset[s] = total;
      total += std::size_t(hi[s] - lo[s] + 1);
    }
    return std::vector<std::uint64_t>(total, 0);
  };

  std::vector<std::uint64_t> cur = layout(0);
  cur[0] = 1;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::uint64_t> next = layout(k + 1);
    const std::int64_t ak = a[k];
    for (auto s : by_layer[k]) {
      const std::size_t width = std::size_t(hi[s] - lo[s] + 1);
      const std::uint64_t* src = cur.data() + offset[s];
      for (std::size_t c = 0; c < nc; ++c) {
        if ((s / radix[c]) % (mult[c] + 1) == mult[c]) continue;
        const std::size_t t = s + radix[c];
        // Source sum lo[s] + w lands at lo[s] + w + step; clip to t's window.
        const std::int64_t start = lo[s] + ak * value[c] / unit;
        const std::int64_t w0 = std::max<std::int64_t>(0, lo[t] - start);
        const std::int64_t w1 = std::min<std::int64_t>(std::int64_t(width) - 1, hi[t] - start);
        std::uint64_t* dst = next.data() + offset[t];
        for (std::int64_t w = w0; w <= w1; ++w) dst[start + w - lo[t]] += src[w];
      }
    }
    cur.swap(next);
  }

  const std::size_t full = n_states - 1;
  std::int64_t sum_a = 0, sum_b = 0, s_obs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_a += a_in[i];
    sum_b += b[i];
    s_obs += a_in[i] * b[i];
  }
  const __int128 centre = __int128(sum_a) * sum_b;
  auto dev = [&](__int128 s) {
    const __int128 d = __int128(n) * s - centre;
    return d < 0 ? -d : d;
  };
  const __int128 obs = dev(s_obs);
  std::uint64_t hit = 0, total = 0;
  for (std::int64_t q = lo[full]; q <= hi[full]; ++q) {
    const std::uint64_t cnt = cur[offset[full] + std::size_t(q - lo[full])];
    if (cnt == 0) continue;
    total += cnt;
    if (dev(__int128(q) * unit) >= obs) hit += cnt;
  }
  return std::min(1.0, double(hit) / double(total));
}

inline double student_t_p(double r, std::size_t n) {
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = double(n - 2);
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

}  // namespace detail

/// Pearson correlation of midranks; two-sided p from the exact permutation
/// distribution for n < 20, otherwise from t = r sqrt((n-2)/(1-r^2)) with
/// n-2 degrees of freedom.
inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman: sequences differ in length");
  if (x.size() < 3) throw DomainError("spearman needs at least 3 pairs");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("spearman: non-finite value");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  SpearmanResult res;
  res.scc = detail::pearson(rx, ry);
  const std::size_t n = x.size();
  if (n < kExactPermutationLimit) {
    std::vector<std::int64_t> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::llround(2.0 * rx[i]);
      b[i] = std::llround(2.0 * ry[i]);
    }
    res.p = detail::exact_permutation_p(a, b);
    res.method = PValueMethod::ExactPermutation;
  } else {
    res.p = detail::student_t_p(res.scc, n);
    res.method = PValueMethod::StudentT;
  }
  return res;
}

struct TraceRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// Absent for regression (L2) runs.
  std::optional<double> train_acc;
  std::optional<double> test_acc;
  double excess_risk = 0.0;
  double sn_product = 0.0;
  std::optional<double> r_a;
  std::vector<double> layer_norms;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
};

inline constexpr const char* kTraceHeader =
    "epoch,train_loss,train_acc,test_acc,excess_risk,sn_product,r_a,layer_norms";

inline std::string format_trace_row(const TraceRow& r) {
  auto f = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? f(*v) : std::string(); };
  std::string s = std::to_string(r.epoch) + "," + f(r.train_loss) + "," + opt(r.train_acc) + "," +
                  opt(r.test_acc) + "," + f(r.excess_risk) + "," + f(r.sn_product) + "," +
                  opt(r.r_a) + ",";
  for (std::size_t i = 0; i < r.layer_norms.size(); ++i) {
    if (i) s += ";";
    s += f(r.layer_norms[i]);
  }
  return s;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double csv_double(const std::string& field, const std::string& what, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size())
    throw FormatError("trace line " + std::to_string(line) + ": bad " + what + " '" + field + "'");
  return v;
}

}  // namespace detail

inline TrainingTrace parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw FormatError("trace header mismatch: '" + line + "'");
  TrainingTrace t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 8)
      throw FormatError("trace line " + std::to_string(lineno) + ": expected 8 fields, got " +
                        std::to_string(f.size()));
    TraceRow r;
    const double ep = detail::csv_double(f[0], "epoch", lineno);
    if (ep < 0 || ep != std::floor(ep)) throw FormatError("trace line " + std::to_string(lineno) + ": bad epoch");
    r.epoch = std::size_t(ep);
    r.train_loss = detail::csv_double(f[1], "train_loss", lineno);
    if (!f[2].empty()) r.train_acc = detail::csv_double(f[2], "train_acc", lineno);
    if (!f[3].empty()) r.test_acc = detail::csv_double(f[3], "test_acc", lineno);
    r.excess_risk = detail::csv_double(f[4], "excess_risk", lineno);
    r.sn_product = detail::csv_double(f[5], "sn_product", lineno);
    if (!f[6].empty()) r.r_a = detail::csv_double(f[6], "r_a", lineno);
    if (!f[7].empty())
      for (const auto& s : detail::split(f[7], ';'))
        r.layer_norms.push_back(detail::csv_double(s, "layer norm", lineno));
    if (!t.rows.empty() && r.epoch <= t.rows.back().epoch)
      throw FormatError("trace line " + std::to_string(lineno) + ": epochs must increase");
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline TrainingTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trace " + path);
  return parse_trace(in);
}

/// Spearman correlation between the sn_product and excess_risk columns.
inline SpearmanResult correlate_trace(const TrainingTrace& trace) {
  if (trace.rows.size() < 3) throw DomainError("trace needs at least 3 epochs");
  std::vector<double> sn, er;
  for (const auto& r : trace.rows) {
    sn.push_back(r.sn_product);
    er.push_back(r.excess_risk);
  }
  return spearman(sn, er);
}

}  // namespace cvnn
