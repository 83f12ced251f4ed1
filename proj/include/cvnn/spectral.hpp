#pragma once

// Per-layer norms of a network, the spectral complexity R_A, conv-layer
// spectral norms (implicit and lowered), and the flat key-value report format.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cvnn/activations.hpp"
#include "cvnn/complex_linalg.hpp"
#include "cvnn/conv.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/network.hpp"

namespace cvnn {

/// Default ceiling on the bytes an explicitly lowered conv matrix may occupy.
inline constexpr std::size_t kDefaultLoweringBudget = std::size_t(256) << 20;

/// Dense matrix M (out x in) of a valid, stride-1 convolution, so that
/// M vec(x) = vec(conv(x)) with CHW vectorization.
inline CMatrix conv_matrix(const ConvGeometry& g, const Shape& in, std::span<const Complex> kernel,
                           std::size_t budget_bytes = kDefaultLoweringBudget) {
  const Shape out = g.output_shape(in);
  const double bytes = double(out.size()) * double(in.size()) * double(sizeof(Complex));
  if (bytes > double(budget_bytes)) {
    throw BudgetExceeded("lowering a " + to_string(in) + " -> " + to_string(out) +
                         " conv needs " + std::to_string(std::uint64_t(bytes)) +
                         " bytes, budget is " + std::to_string(budget_bytes));
  }
  CMatrix m(out.size(), in.size());
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t i = 0; i < out.height; ++i) {
      for (std::size_t j = 0; j < out.width; ++j) {
        const std::size_t r = (o * out.height + i) * out.width + j;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          const Complex* kc = kernel.data() + (o * g.in_channels + c) * g.kernel_h * g.kernel_w;
          for (std::size_t u = 0; u < g.kernel_h; ++u)
            for (std::size_t v = 0; v < g.kernel_w; ++v)
              m(r, (c * in.height + i + u) * in.width + j + v) = kc[u * g.kernel_w + v];
        }
      }
    }
  }
  return m;
}

/// Operator matrix of a weighted layer (dense weights or lowered conv).
inline CMatrix layer_matrix(const Layer& l, std::size_t budget_bytes = kDefaultLoweringBudget) {
  if (const auto* d = std::get_if<layer::Dense>(&l.spec.op)) return CMatrix(d->out, d->in, l.weights);
  if (const auto* c = std::get_if<layer::Conv>(&l.spec.op))
    return conv_matrix(*c, l.in_shape, l.weights, budget_bytes);
  throw ShapeError("layer carries no weight matrix");
}

/// Largest singular value of the conv map, by power iteration on
/// conv^H conv without forming the matrix.
inline PowerIterationResult conv_spectral_norm(const ConvGeometry& g, const Shape& in,
                                               std::span<const Complex> kernel,
                                               const PowerIterationOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw DomainError("conv_spectral_norm: tol must be positive");
  const Shape out = g.output_shape(in);
  if (kernel.size() != g.kernel_size()) throw ShapeError("kernel size does not match geometry");
  if (std::all_of(kernel.begin(), kernel.end(), [](Complex k) { return k == Complex{}; }))
    return {};
  std::vector<Complex> tmp(out.size());
  auto gram = [&](std::span<const Complex> x, std::span<Complex> y) {
    conv_forward(g, in, kernel, x, tmp);
    std::fill(y.begin(), y.end(), Complex{});
    conv_adjoint_accumulate(g, in, kernel, tmp, y);
  };
  return power_iteration<Complex>(in.size(), gram, opt);
}

/// ||A^T||_{2,1}: the sum of the Euclidean norms of the rows of A.
inline double transpose_two_one_norm(const CMatrix& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (const Complex& z : a.row(i)) s += std::norm(z);
    total += std::sqrt(s);
  }
  return total;
}

struct LayerNorms {
  std::size_t index = 0;  // position in Network::layers()
  std::string kind;       // "dense" or "conv"
  double s = 0.0;
  std::optional<double> b;
  double rho = 1.0;
  bool rho_empirical = false;
  bool converged = true;
  int iterations = 0;
};

struct SpectralReport {
  std::vector<LayerNorms> layers;
  double sn_product = 0.0;
  double lipschitz_product = 0.0;
  std::optional<double> r_a;
  /// Some b_i could not be computed; R_A-based bounds must not be emitted.
  bool sn_product_only = false;
  /// Some rho_i came from the Lipschitz probe rather than an analytic constant.
  bool empirical_rho = false;
  bool thresholds_nonzero = false;
  bool converged = true;
  std::size_t max_width = 0;

  bool has_warnings() const { return sn_product_only || empirical_rho || thresholds_nonzero || !converged; }
};

struct AnalyzeOptions {
  PowerIterationOptions power;
  std::size_t lowering_budget_bytes = kDefaultLoweringBudget;
  /// Box half-width for the amplitude-tanh constant 2*alpha + 1. Unset means
  /// the probe value is used instead.
  std::optional<double> amplitude_tanh_alpha;
  double probe_domain_bound = 10.0;
  std::size_t probe_pairs = 100000;
  std::uint64_t probe_seed = 0;
};

/// R_A = (prod rho_i s_i) * (sum (b_i / s_i)^{2/3})^{3/2}; zero when any s_i is.
inline double spectral_complexity(const std::vector<LayerNorms>& layers) {
  double prod = 1.0;
  double sum = 0.0;
  for (const auto& l : layers) {
    if (!l.b) throw DomainError("spectral complexity needs every (2,1) norm");
    if (l.s == 0.0) return 0.0;
    prod *= l.rho * l.s;
    sum += std::cbrt((*l.b / l.s) * (*l.b / l.s));
  }
  return prod * std::pow(sum, 1.5);
}

inline SpectralReport analyze(const Network& net, const AnalyzeOptions& opt = {}) {
  SpectralReport rep;
  rep.max_width = net.max_width();
  rep.thresholds_nonzero = net.thresholds_nonzero();
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (!l.weighted()) continue;
    LayerNorms ln;
    ln.index = i;
    PowerIterationOptions po = opt.power;
    po.seed = opt.power.seed + i;
    PowerIterationResult pr;
    if (l.is_dense()) {
      ln.kind = "dense";
      const CMatrix a = net.dense_matrix(i);
      pr = spectral_norm(a, po);
      ln.b = transpose_two_one_norm(a);
    } else {
      ln.kind = "conv";
      const auto& g = std::get<layer::Conv>(l.spec.op);
      pr = conv_spectral_norm(g, l.in_shape, l.weights, po);
      try {
        ln.b = transpose_two_one_norm(conv_matrix(g, l.in_shape, l.weights, opt.lowering_budget_bytes));
      } catch (const BudgetExceeded&) {
        rep.sn_product_only = true;
      }
    }
    ln.s = pr.value;
    ln.converged = pr.converged;
    ln.iterations = pr.iterations;
    rep.converged = rep.converged && pr.converged;

    if (l.spec.activation) {
      const Activation& act = *l.spec.activation;
      std::optional<double> declared;
      if (act.type == ActivationType::AmplitudeTanh) {
        if (opt.amplitude_tanh_alpha) declared = declared_lipschitz(act, opt.amplitude_tanh_alpha);
      } else {
        declared = declared_lipschitz(act, std::nullopt);
      }
      if (declared) {
        ln.rho = *declared;
      } else {
        ln.rho = lipschitz_probe(act, opt.probe_domain_bound, opt.probe_pairs, opt.probe_seed + i);
        ln.rho_empirical = true;
        rep.empirical_rho = true;
      }
    }
    rep.layers.push_back(std::move(ln));
  }

  rep.sn_product = 1.0;
  rep.lipschitz_product = 1.0;
  for (const auto& ln : rep.layers) {
    rep.sn_product *= ln.s;
    rep.lipschitz_product *= ln.rho * ln.s;
  }
  if (!rep.sn_product_only) rep.r_a = spectral_complexity(rep.layers);
  return rep;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second)
      throw FormatError("line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return kv;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw FormatError(key + ": not a number: '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw FormatError(key + ": not a non-negative integer: '" + v + "'");
  return std::stoull(v);
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw FormatError(key + ": expected 0 or 1, got '" + v + "'");
}

inline const std::string& require(const std::map<std::string, std::string>& kv,
                                  const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("missing key " + key);
  return it->second;
}

}  // namespace detail

inline std::string to_key_values(const SpectralReport& r) {
  using detail::fmt17;
  std::ostringstream out;
  out << "layers = " << r.layers.size() << "\n";
  out << "max_width = " << r.max_width << "\n";
  out << "sn_product = " << fmt17(r.sn_product) << "\n";
  out << "lipschitz_product = " << fmt17(r.lipschitz_product) << "\n";
  out << "r_a = " << (r.r_a ? fmt17(*r.r_a) : std::string("none")) << "\n";
  out << "sn_product_only = " << r.sn_product_only << "\n";
  out << "empirical_rho = " << r.empirical_rho << "\n";
  out << "thresholds_nonzero = " << r.thresholds_nonzero << "\n";
  out << "converged = " << r.converged << "\n";
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    const auto& l = r.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    out << p << "index = " << l.index << "\n";
    out << p << "kind = " << l.kind << "\n";
    out << p << "s = " << fmt17(l.s) << "\n";
    if (l.b) out << p << "b = " << fmt17(*l.b) << "\n";
    out << p << "rho = " << fmt17(l.rho) << "\n";
    out << p << "rho_empirical = " << l.rho_empirical << "\n";
    out << p << "converged = " << l.converged << "\n";
    out << p << "iterations = " << l.iterations << "\n";
  }
  return out.str();
}

inline SpectralReport parse_spectral_report(const std::string& text) {
  using namespace detail;
  const auto kv = parse_key_values(text);
  SpectralReport r;
  const std::size_t n = parse_uint("layers", require(kv, "layers"));
  r.max_width = parse_uint("max_width", require(kv, "max_width"));
  r.sn_product = parse_double("sn_product", require(kv, "sn_product"));
  r.lipschitz_product = parse_double("lipschitz_product", require(kv, "lipschitz_product"));
  const auto& ra = require(kv, "r_a");
  if (ra != "none") r.r_a = parse_double("r_a", ra);
  r.sn_product_only = parse_flag("sn_product_only", require(kv, "sn_product_only"));
  r.empirical_rho = parse_flag("empirical_rho", require(kv, "empirical_rho"));
  r.thresholds_nonzero = parse_flag("thresholds_nonzero", require(kv, "thresholds_nonzero"));
  r.converged = parse_flag("converged", require(kv, "converged"));
  std::size_t known = 9;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    LayerNorms l;
    l.index = parse_uint(p + "index", require(kv, p + "index"));
    l.kind = require(kv, p + "kind");
    if (l.kind != "dense" && l.kind != "conv") throw FormatError(p + "kind: unknown '" + l.kind + "'");
    l.s = parse_double(p + "s", require(kv, p + "s"));
    if (const auto it = kv.find(p + "b"); it != kv.end()) {
      l.b = parse_double(p + "b", it->second);
      ++known;
    }
    l.rho = parse_double(p + "rho", require(kv, p + "rho"));
    l.rho_empirical = parse_flag(p + "rho_empirical", require(kv, p + "rho_empirical"));
    l.converged = parse_flag(p + "converged", require(kv, p + "converged"));
    l.iterations = int(parse_uint(p + "iterations", require(kv, p + "iterations")));
    known += 7;
    r.layers.push_back(std::move(l));
  }
  if (known != kv.size()) throw FormatError("report contains unknown keys");
  return r;
}

}  // namespace cvnn
