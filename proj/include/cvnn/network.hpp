#pragma once

// Layered complex-valued network: construction, forward pass, backprop via the
// real chain rule on (re, im) pairs, losses and SGD with momentum.
//
// Gradients of complex parameters are stored as complex numbers
// g = dL/dRe(p) + i dL/dIm(p). With that convention a linear map y = W x has
// dL/dW = g_y x^H and dL/dx = W^H g_y.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cvnn/activations.hpp"
#include "cvnn/complex_linalg.hpp"
#include "cvnn/conv.hpp"
#include "cvnn/errors.hpp"

namespace cvnn {

namespace layer {

struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  bool operator==(const Dense&) const = default;
};

using Conv = ConvGeometry;

/// 2x2 window, stride 2; picks the entry of largest modulus (first index on
/// ties, row-major within the window).
struct MaxPoolModulus {
  bool operator==(const MaxPoolModulus&) const = default;
};

/// Entry moduli followed by softmax. Only valid as the final layer.
struct AbsHead {
  std::size_t classes = 0;
  bool operator==(const AbsHead&) const = default;
};

}  // namespace layer

using LayerOp = std::variant<layer::Dense, layer::Conv, layer::MaxPoolModulus, layer::AbsHead>;

struct LayerSpec {
  LayerOp op;
  std::optional<Activation> activation;
  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  /// Dense: out x in row-major. Conv: [out_ch][in_ch][kh][kw].
  std::vector<Complex> weights;
  /// One per output unit (Dense) or output channel (Conv).
  std::vector<Complex> thresholds;

  bool weighted() const noexcept { return !weights.empty(); }
  bool is_dense() const noexcept { return std::holds_alternative<layer::Dense>(spec.op); }
  bool is_conv() const noexcept { return std::holds_alternative<layer::Conv>(spec.op); }
  std::size_t fan_in() const {
    if (const auto* d = std::get_if<layer::Dense>(&spec.op)) return d->in;
    if (const auto* c = std::get_if<layer::Conv>(&spec.op))
      return c->in_channels * c->kernel_h * c->kernel_w;
    return 0;
  }
};

/// Zero: thresholds pinned at 0 (the bias-free network the bounds assume).
/// Trainable: thresholds are learned like weights.
enum class ThresholdMode { Zero, Trainable };

class Network {
 public:
  Network() = default;

  Network(Shape input, std::vector<LayerSpec> specs, ThresholdMode mode = ThresholdMode::Zero)
      : input_(input), mode_(mode) {
    if (specs.empty()) throw ShapeError("network needs at least one layer");
    if (input.size() == 0) throw ShapeError("input shape must be positive");
    Shape cur = input;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      Layer l;
      l.spec = std::move(specs[i]);
      l.in_shape = cur;
      std::visit([&](const auto& op) { configure(l, op, i + 1 == specs.size()); }, l.spec.op);
      cur = l.out_shape;
      layers_.push_back(std::move(l));
    }
  }

  const Shape& input_shape() const noexcept { return input_; }
  std::size_t input_dim() const noexcept { return input_.size(); }
  std::size_t output_dim() const { return layers_.back().out_shape.size(); }
  ThresholdMode threshold_mode() const noexcept { return mode_; }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Number of weighted layers (L).
  std::size_t depth() const {
    return static_cast<std::size_t>(
        std::count_if(layers_.begin(), layers_.end(), [](const Layer& l) { return l.weighted(); }));
  }

  /// W = max{d_0, ..., d_L} over flattened layer widths.
  std::size_t max_width() const {
    std::size_t w = input_.size();
    for (const auto& l : layers_) w = std::max(w, l.out_shape.size());
    return w;
  }

  bool has_abs_head() const {
    return std::holds_alternative<layer::AbsHead>(layers_.back().spec.op);
  }

  bool thresholds_nonzero() const {
    for (const auto& l : layers_)
      for (const auto& h : l.thresholds)
        if (h != Complex{}) return true;
    return false;
  }

  /// Operator matrix (out x in) of a dense layer.
  CMatrix dense_matrix(std::size_t i) const {
    const auto& l = layers_.at(i);
    const auto* d = std::get_if<layer::Dense>(&l.spec.op);
    if (!d) throw ShapeError("layer " + std::to_string(i) + " is not dense");
    return CMatrix(d->out, d->in, l.weights);
  }

 private:
  static void configure(Layer& l, const layer::Dense& d, bool) {
    if (d.in == 0 || d.out == 0) throw ShapeError("dense layer dimensions must be positive");
    if (d.in != l.in_shape.size()) {
      throw ShapeError("dense layer expects " + std::to_string(d.in) + " inputs, got " +
                       to_string(l.in_shape));
    }
    l.out_shape = {d.out, 1, 1};
    l.weights.assign(d.in * d.out, Complex{});
    l.thresholds.assign(d.out, Complex{});
  }
  static void configure(Layer& l, const layer::Conv& c, bool) {
    if (c.kernel_h == 0 || c.kernel_w == 0 || c.in_channels == 0 || c.out_channels == 0)
      throw ShapeError("conv layer dimensions must be positive");
    l.out_shape = c.output_shape(l.in_shape);
    l.weights.assign(c.kernel_size(), Complex{});
    l.thresholds.assign(c.out_channels, Complex{});
  }
  static void configure(Layer& l, const layer::MaxPoolModulus&, bool) {
    if (l.spec.activation) throw ShapeError("pooling layers take no activation");
    if (l.in_shape.height < 2 || l.in_shape.width < 2)
      throw ShapeError("2x2 pooling needs spatial size >= 2, got " + to_string(l.in_shape));
    l.out_shape = {l.in_shape.channels, l.in_shape.height / 2, l.in_shape.width / 2};
  }
  static void configure(Layer& l, const layer::AbsHead& a, bool last) {
    if (!last) throw ShapeError("abs head must be the final layer");
    if (l.spec.activation) throw ShapeError("abs head takes no activation");
    if (a.classes != l.in_shape.size()) {
      throw ShapeError("abs head declares " + std::to_string(a.classes) + " classes but receives " +
                       std::to_string(l.in_shape.size()) + " values");
    }
    l.out_shape = {a.classes, 1, 1};
  }

  Shape input_;
  ThresholdMode mode_ = ThresholdMode::Zero;
  std::vector<Layer> layers_;
};

/// Re and im parts i.i.d. N(0, 1/(2 fan_in)); thresholds zero.
inline void initialize_weights(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers()) {
    if (!l.weighted()) continue;
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / (2.0 * double(l.fan_in()))));
    for (auto& w : l.weights) {
      const double re = normal(rng);
      const double im = normal(rng);
      w = Complex(re, im);
    }
    std::fill(l.thresholds.begin(), l.thresholds.end(), Complex{});
  }
}

enum class OutputKind { Complex, Probabilities };

/// One row per sample. With an abs head the entries are real class
/// probabilities (imaginary part zero).
struct Output {
  CMatrix values;
  OutputKind kind = OutputKind::Complex;
};

enum class LossType { L2, CrossEntropy };

struct LossKind {
  LossType type = LossType::L2;
  /// Running maximum of per-sample losses seen so far (the loss ceiling M).
  double ceiling = 0.0;
};

struct LayerGradient {
  std::vector<Complex> weights;
  std::vector<Complex> thresholds;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  /// Mean batch loss at the parameters the gradient was taken at.
  double loss = 0.0;
};

namespace detail {

struct Tape {
  std::vector<std::vector<Complex>> inputs;
  std::vector<std::vector<Complex>> pre;
  std::vector<std::vector<std::size_t>> argmax;
  std::vector<double> scores;
};

inline void dense_forward(const Layer& l, std::span<const Complex> x, std::span<Complex> y) {
  const auto& d = std::get<layer::Dense>(l.spec.op);
  for (std::size_t o = 0; o < d.out; ++o) {
    const Complex* w = l.weights.data() + o * d.in;
    Complex acc = l.thresholds[o];
    for (std::size_t i = 0; i < d.in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

inline void pool_forward(const Shape& in, std::span<const Complex> x, std::span<Complex> y,
                         std::vector<std::size_t>* argmax) {
  const std::size_t oh = in.height / 2;
  const std::size_t ow = in.width / 2;
  if (argmax) argmax->resize(in.channels * oh * ow);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = c * in.height * in.width + (2 * i) * in.width + 2 * j;
        double best_mod = std::norm(x[best]);
        for (std::size_t u = 0; u < 2; ++u) {
          for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t idx = c * in.height * in.width + (2 * i + u) * in.width + 2 * j + v;
            const double m = std::norm(x[idx]);
            if (m > best_mod) {
              best_mod = m;
              best = idx;
            }
          }
        }
        const std::size_t o = (c * oh + i) * ow + j;
        y[o] = x[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
}

inline std::vector<double> softmax(std::span<const double> s) {
  std::vector<double> p(s.size());
  const double mx = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(s[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// Runs one sample through the network; when `tape` is set, records what
/// backprop needs.
inline std::vector<Complex> forward_sample(const Network& net, std::span<const Complex> x0,
                                           Tape* tape) {
  const auto& layers = net.layers();
  if (tape) {
    tape->inputs.resize(layers.size());
    tape->pre.resize(layers.size());
    tape->argmax.resize(layers.size());
  }
  std::vector<Complex> cur(x0.begin(), x0.end());
  std::vector<Complex> next;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const Layer& l = layers[li];
    next.assign(l.out_shape.size(), Complex{});
    if (l.is_dense()) {
      dense_forward(l, cur, next);
    } else if (l.is_conv()) {
      const auto& g = std::get<layer::Conv>(l.spec.op);
      conv_forward(g, l.in_shape, l.weights, cur, next);
      const std::size_t plane = l.out_shape.height * l.out_shape.width;
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const Complex h = l.thresholds[o];
        if (h == Complex{}) continue;
        for (std::size_t k = 0; k < plane; ++k) next[o * plane + k] += h;
      }
    } else if (std::holds_alternative<layer::MaxPoolModulus>(l.spec.op)) {
      pool_forward(l.in_shape, cur, next, tape ? &tape->argmax[li] : nullptr);
    } else {
      std::vector<double> s(cur.size());
      for (std::size_t i = 0; i < cur.size(); ++i) s[i] = std::abs(cur[i]);
      const auto p = softmax(s);
      for (std::size_t i = 0; i < p.size(); ++i) next[i] = Complex(p[i], 0.0);
      if (tape) tape->scores = std::move(s);
    }
    if (tape) {
      tape->inputs[li] = cur;
      tape->pre[li] = next;
    }
    if (l.spec.activation) {
      for (auto& z : next) z = apply(*l.spec.activation, z);
    }
    cur.swap(next);
  }
  return cur;
}

/// Backprop from `g` = dL/d(output of the last weighted stage). For an abs
/// head, `score_grad` holds dL/d|z| instead and `g` is ignored.
inline void backward_sample(const Network& net, const Tape& tape, std::vector<Complex> g,
                            std::span<const double> score_grad, double scale,
                            Gradients& grads) {
  const auto& layers = net.layers();
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& l = layers[li];
    const auto& x = tape.inputs[li];
    const auto& pre = tape.pre[li];
    std::vector<Complex> gin(l.in_shape.size(), Complex{});

    if (std::holds_alternative<layer::AbsHead>(l.spec.op)) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = std::abs(x[i]);
        gin[i] = r == 0.0 ? Complex{} : x[i] * (score_grad[i] / r);
      }
      g.swap(gin);
      continue;
    }

    if (l.spec.activation) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        const Jacobian2 j = jacobian(*l.spec.activation, pre[k]);
        const double gr = g[k].real();
        const double gi = g[k].imag();
        g[k] = Complex(j[0][0] * gr + j[1][0] * gi, j[0][1] * gr + j[1][1] * gi);
      }
    }

    auto& lg = grads.layers[li];
    if (l.is_dense()) {
      const auto& d = std::get<layer::Dense>(l.spec.op);
      for (std::size_t o = 0; o < d.out; ++o) {
        const Complex go = g[o] * scale;
        Complex* gw = lg.weights.data() + o * d.in;
        const Complex* w = l.weights.data() + o * d.in;
        for (std::size_t i = 0; i < d.in; ++i) {
          gw[i] += go * std::conj(x[i]);
          gin[i] += std::conj(w[i]) * g[o];
        }
        lg.thresholds[o] += go;
      }
    } else if (l.is_conv()) {
      const auto& cg = std::get<layer::Conv>(l.spec.op);
      std::vector<Complex> gs(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) gs[k] = g[k] * scale;
      conv_kernel_grad_accumulate(cg, l.in_shape, x, gs, lg.weights);
      const std::size_t plane = l.out_shape.height * l.out_shape.width;
      for (std::size_t o = 0; o < cg.out_channels; ++o) {
        Complex acc{};
        for (std::size_t k = 0; k < plane; ++k) acc += gs[o * plane + k];
        lg.thresholds[o] += acc;
      }
      conv_adjoint_accumulate(cg, l.in_shape, l.weights, g, gin);
    } else {
      const auto& am = tape.argmax[li];
      for (std::size_t o = 0; o < am.size(); ++o) gin[am[o]] += g[o];
    }
    g.swap(gin);
  }
}

inline Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.layers.resize(net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    g.layers[i].weights.assign(net.layers()[i].weights.size(), Complex{});
    g.layers[i].thresholds.assign(net.layers()[i].thresholds.size(), Complex{});
  }
  return g;
}

inline void check_batch(const Network& net, const CMatrix& batch) {
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
}

}  // namespace detail

inline Output forward(const Network& net, const CMatrix& batch) {
  detail::check_batch(net, batch);
  Output out;
  out.kind = net.has_abs_head() ? OutputKind::Probabilities : OutputKind::Complex;
  out.values = CMatrix(batch.rows(), net.output_dim());
  for (std::size_t n = 0; n < batch.rows(); ++n) {
    const auto y = detail::forward_sample(net, batch.row(n), nullptr);
    std::copy(y.begin(), y.end(), out.values.row(n).begin());
  }
  return out;
}

/// Mean over the batch of |F(z_n) - y_n|_2.
inline double compute_loss(const Output& output, const CMatrix& targets, LossKind& loss) {
  if (loss.type != LossType::L2) throw DomainError("complex targets require the L2 loss");
  if (output.values.rows() != targets.rows() || output.values.cols() != targets.cols())
    throw ShapeError("output and target shapes differ");
  if (targets.rows() == 0) throw ShapeError("empty batch");
  double total = 0.0;
  for (std::size_t n = 0; n < targets.rows(); ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < targets.cols(); ++k)
      s += std::norm(output.values(n, k) - targets(n, k));
    const double l = std::sqrt(s);
    loss.ceiling = std::max(loss.ceiling, l);
    total += l;
  }
  return total / double(targets.rows());
}

/// Mean negative log-likelihood of the softmax probabilities of an abs head.
inline double compute_loss(const Output& output, std::span<const int> labels, LossKind& loss) {
  if (loss.type != LossType::CrossEntropy) throw DomainError("class labels require cross-entropy");
  if (output.kind != OutputKind::Probabilities)
    throw DomainError("cross-entropy needs an abs-head (softmax) output");
  if (output.values.rows() != labels.size()) throw ShapeError("output and label counts differ");
  if (labels.empty()) throw ShapeError("empty batch");
  double total = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int y = labels[n];
    if (y < 0 || std::size_t(y) >= output.values.cols()) throw ShapeError("label out of range");
    const double p = std::max(output.values(n, std::size_t(y)).real(),
                              std::numeric_limits<double>::min());
    const double l = -std::log(p);
    loss.ceiling = std::max(loss.ceiling, l);
    total += l;
  }
  return total / double(labels.size());
}

/// Gradient of the mean L2 loss over the batch.
inline Gradients backward(const Network& net, const CMatrix& batch, const CMatrix& targets,
                          LossKind& loss) {
  detail::check_batch(net, batch);
  if (loss.type != LossType::L2) throw DomainError("complex targets require the L2 loss");
  if (targets.rows() != batch.rows() || targets.cols() != net.output_dim())
    throw ShapeError("target shape does not match network output");
  Gradients grads = detail::zero_gradients(net);
  const double scale = 1.0 / double(batch.rows());
  detail::Tape tape;
  for (std::size_t n = 0; n < batch.rows(); ++n) {
    const auto y = detail::forward_sample(net, batch.row(n), &tape);
    std::vector<Complex> diff(y.size());
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      diff[k] = y[k] - targets(n, k);
      s += std::norm(diff[k]);
    }
    const double l = std::sqrt(s);
    loss.ceiling = std::max(loss.ceiling, l);
    grads.loss += l * scale;
    if (l == 0.0) continue;
    for (auto& d : diff) d /= l;
    std::vector<double> score_grad;
    if (net.has_abs_head()) {
      // Through the softmax Jacobian: dL/ds_j = p_j (g_j - sum_k p_k g_k).
      score_grad.resize(y.size());
      double dot = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) dot += y[k].real() * diff[k].real();
      for (std::size_t k = 0; k < y.size(); ++k)
        score_grad[k] = y[k].real() * (diff[k].real() - dot);
    }
    detail::backward_sample(net, tape, std::move(diff), score_grad, scale, grads);
  }
  return grads;
}

/// Gradient of the mean cross-entropy of an abs-head network.
inline Gradients backward(const Network& net, const CMatrix& batch, std::span<const int> labels,
                          LossKind& loss) {
  detail::check_batch(net, batch);
  if (loss.type != LossType::CrossEntropy) throw DomainError("class labels require cross-entropy");
  if (!net.has_abs_head()) throw DomainError("cross-entropy needs an abs-head (softmax) output");
  if (labels.size() != batch.rows()) throw ShapeError("label count does not match batch");
  Gradients grads = detail::zero_gradients(net);
  const double scale = 1.0 / double(batch.rows());
  detail::Tape tape;
  for (std::size_t n = 0; n < batch.rows(); ++n) {
    const auto p = detail::forward_sample(net, batch.row(n), &tape);
    const int y = labels[n];
    if (y < 0 || std::size_t(y) >= p.size()) throw ShapeError("label out of range");
    const auto& s = tape.scores;
    const double mx = *std::max_element(s.begin(), s.end());
    double lse = 0.0;
    for (double v : s) lse += std::exp(v - mx);
    const double l = mx + std::log(lse) - s[std::size_t(y)];
    loss.ceiling = std::max(loss.ceiling, l);
    grads.loss += l * scale;
    std::vector<double> score_grad(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) score_grad[k] = p[k].real();
    score_grad[std::size_t(y)] -= 1.0;
    detail::backward_sample(net, tape, {}, score_grad, scale, grads);
  }
  return grads;
}

struct SgdState {
  std::vector<LayerGradient> velocity;
};

/// v <- momentum v + g;  p <- p - lr v, on re and im parts independently.
/// Thresholds stay untouched in ThresholdMode::Zero.
inline void sgd_step(Network& net, const Gradients& grads, double lr, double momentum,
                     SgdState& state) {
  if (!(lr > 0.0)) throw DomainError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size()) throw ShapeError("gradient/network layer mismatch");
  if (state.velocity.empty()) state.velocity = detail::zero_gradients(net).layers;
  const bool train_thresholds = net.threshold_mode() == ThresholdMode::Trainable;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& l = layers[li];
    auto& v = state.velocity[li];
    const auto& g = grads.layers[li];
    for (std::size_t k = 0; k < l.weights.size(); ++k) {
      v.weights[k] = momentum * v.weights[k] + g.weights[k];
      l.weights[k] -= lr * v.weights[k];
    }
    if (!train_thresholds) continue;
    for (std::size_t k = 0; k < l.thresholds.size(); ++k) {
      v.thresholds[k] = momentum * v.thresholds[k] + g.thresholds[k];
      l.thresholds[k] -= lr * v.thresholds[k];
    }
  }
}

/// Number of rows whose argmax probability (first index on ties) is the label.
inline std::size_t count_correct(const Output& output, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t n = 0; n < output.values.rows(); ++n) {
    const auto row = output.values.row(n);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k].real() > row[best].real()) best = k;
    if (int(best) == labels[n]) ++correct;
  }
  return correct;
}

}  // namespace cvnn
