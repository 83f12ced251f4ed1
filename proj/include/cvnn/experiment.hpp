#pragma once

// Experiment configuration, the architecture mini-language, and the
// deterministic training loop that writes the trace CSV and checkpoint.
//
// Architecture syntax: stages separated by ';', each one of
//   conv<KH>x<KW>,<C>[:act]   valid stride-1 convolution with C output channels
//   maxpool2x2                modulus max pooling
//   fc-<N>[:act]              dense layer with N outputs
//   abs                       entry moduli + softmax (final stage only)
// where act is splittanh, crelu, amptanh or modrelu(<b>).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cvnn/checkpoint.hpp"
#include "cvnn/datasets.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/network.hpp"
#include "cvnn/spectral.hpp"
#include "cvnn/stats.hpp"

namespace cvnn {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::size_t parse_count(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(what + ": expected a positive integer, got '" + s + "'");
  const auto v = std::stoull(s);
  if (v == 0) throw ConfigError(what + ": must be positive");
  return std::size_t(v);
}

}  // namespace detail

/// Stage list with input-dependent sizes left at 0; see build_network.
inline std::vector<LayerSpec> parse_architecture(const std::string& text) {
  std::vector<LayerSpec> specs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    LayerSpec spec;
    std::string body = item;
    if (const auto colon = item.find(':'); colon != std::string::npos) {
      body = detail::trim(item.substr(0, colon));
      try {
        spec.activation = parse_activation(detail::trim(item.substr(colon + 1)));
      } catch (const DomainError& e) {
        throw ConfigError("architecture stage '" + item + "': " + e.what());
      }
    }
    if (body == "abs") {
      spec.op = layer::AbsHead{};
    } else if (body == "maxpool2x2") {
      spec.op = layer::MaxPoolModulus{};
    } else if (body.rfind("fc-", 0) == 0) {
      spec.op = layer::Dense{0, detail::parse_count(body.substr(3), "fc width")};
    } else if (body.rfind("conv", 0) == 0) {
      const auto x = body.find('x');
      const auto comma = body.find(',');
      if (x == std::string::npos || comma == std::string::npos || comma < x)
        throw ConfigError("conv stage must read conv<KH>x<KW>,<C>: '" + item + "'");
      layer::Conv c;
      c.kernel_h = detail::parse_count(body.substr(4, x - 4), "kernel height");
      c.kernel_w = detail::parse_count(body.substr(x + 1, comma - x - 1), "kernel width");
      c.out_channels = detail::parse_count(body.substr(comma + 1), "conv channels");
      spec.op = c;
    } else {
      throw ConfigError("unknown architecture stage '" + item + "'");
    }
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw ConfigError("architecture is empty");
  return specs;
}

/// Fills in the input-dependent sizes (dense fan-in, conv input channels,
/// abs class count) and builds the network.
inline Network build_network(const Shape& input, std::vector<LayerSpec> specs, ThresholdMode mode) {
  Shape cur = input;
  for (auto& s : specs) {
    if (auto* d = std::get_if<layer::Dense>(&s.op)) {
      d->in = cur.size();
      cur = {d->out, 1, 1};
    } else if (auto* c = std::get_if<layer::Conv>(&s.op)) {
      c->in_channels = cur.channels;
      try {
        cur = c->output_shape(cur);
      } catch (const ShapeError& e) {
        throw ConfigError(e.what());
      }
    } else if (std::holds_alternative<layer::MaxPoolModulus>(s.op)) {
      cur = {cur.channels, cur.height / 2, cur.width / 2};
    } else {
      std::get<layer::AbsHead>(s.op).classes = cur.size();
    }
  }
  try {
    return Network(input, std::move(specs), mode);
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("architecture does not fit the input: ") + e.what());
  }
}

struct ExperimentConfig {
  std::string dataset = "idx";  // "idx" or "synthetic"
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t train_size = 0;  // 0 keeps everything
  std::size_t test_size = 0;
  std::uint64_t subsample_seed = 0;

  std::size_t synthetic_train = 256;
  std::size_t synthetic_test = 256;
  std::size_t synthetic_dim = 8;
  double synthetic_noise = 0.1;
  std::string teacher_architecture;  // empty: same as architecture

  std::string architecture;
  ThresholdMode thresholds = ThresholdMode::Zero;
  LossType loss = LossType::CrossEntropy;

  double lr = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::size_t lr_decay_step = 0;  // 0 disables decay
  double lr_decay_factor = 0.1;

  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t analysis_every = 1;

  double power_tol = 1e-10;
  int power_max_iter = 1000;
  std::size_t lowering_budget_mb = 256;
  std::optional<double> amplitude_tanh_alpha;
};

/// Every key accepted by parse_config, in documentation order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "dataset",        "train_images",     "train_labels",      "test_images",
      "test_labels",    "train_size",       "test_size",         "subsample_seed",
      "synthetic_train", "synthetic_test",  "synthetic_dim",     "synthetic_noise",
      "teacher_architecture", "architecture", "thresholds",      "loss",
      "lr",             "momentum",         "epochs",            "batch_size",
      "lr_decay_step",  "lr_decay_factor",  "seed",              "output_dir",
      "analysis_every", "power_tol",        "power_max_iter",    "lowering_budget_mb",
      "amplitude_tanh_alpha"};
  return keys;
}

namespace detail {

inline double config_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t config_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range");
  }
}

}  // namespace detail

/// `key = value` lines, '#' starts a comment. Relative paths are resolved
/// against `base_dir`. Unknown or repeated keys are errors.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  const std::set<std::string> known(config_keys().begin(), config_keys().end());
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string v = detail::trim(t.substr(eq + 1));
    if (!known.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    using detail::config_double;
    using detail::config_uint;
    if (key == "dataset") {
      if (v != "idx" && v != "synthetic") throw ConfigError("dataset must be idx or synthetic");
      c.dataset = v;
    } else if (key == "train_images") c.train_images = path(v);
    else if (key == "train_labels") c.train_labels = path(v);
    else if (key == "test_images") c.test_images = path(v);
    else if (key == "test_labels") c.test_labels = path(v);
    else if (key == "train_size") c.train_size = config_uint(key, v);
    else if (key == "test_size") c.test_size = config_uint(key, v);
    else if (key == "subsample_seed") c.subsample_seed = config_uint(key, v);
    else if (key == "synthetic_train") c.synthetic_train = config_uint(key, v);
    else if (key == "synthetic_test") c.synthetic_test = config_uint(key, v);
    else if (key == "synthetic_dim") c.synthetic_dim = config_uint(key, v);
    else if (key == "synthetic_noise") c.synthetic_noise = config_double(key, v);
    else if (key == "teacher_architecture") c.teacher_architecture = v;
    else if (key == "architecture") c.architecture = v;
    else if (key == "thresholds") {
      if (v == "zero") c.thresholds = ThresholdMode::Zero;
      else if (v == "trainable") c.thresholds = ThresholdMode::Trainable;
      else throw ConfigError("thresholds must be zero or trainable");
    } else if (key == "loss") {
      if (v == "l2") c.loss = LossType::L2;
      else if (v == "cross_entropy") c.loss = LossType::CrossEntropy;
      else throw ConfigError("loss must be l2 or cross_entropy");
    } else if (key == "lr") c.lr = config_double(key, v);
    else if (key == "momentum") c.momentum = config_double(key, v);
    else if (key == "epochs") c.epochs = config_uint(key, v);
    else if (key == "batch_size") c.batch_size = config_uint(key, v);
    else if (key == "lr_decay_step") c.lr_decay_step = config_uint(key, v);
    else if (key == "lr_decay_factor") c.lr_decay_factor = config_double(key, v);
    else if (key == "seed") c.seed = config_uint(key, v);
    else if (key == "output_dir") c.output_dir = path(v);
    else if (key == "analysis_every") c.analysis_every = config_uint(key, v);
    else if (key == "power_tol") c.power_tol = config_double(key, v);
    else if (key == "power_max_iter") c.power_max_iter = int(config_uint(key, v));
    else if (key == "lowering_budget_mb") c.lowering_budget_mb = config_uint(key, v);
    else if (key == "amplitude_tanh_alpha") c.amplitude_tanh_alpha = config_double(key, v);
  }

  if (c.architecture.empty()) throw ConfigError("architecture is required");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.analysis_every < 1) throw ConfigError("analysis_every must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(c.lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  if (!(c.power_tol > 0.0) || c.power_max_iter < 1) throw ConfigError("power iteration settings must be positive");
  if (c.dataset == "idx") {
    for (const auto* p : {&c.train_images, &c.train_labels, &c.test_images, &c.test_labels}) {
      if (p->empty()) throw ConfigError("idx datasets need train/test image and label paths");
      if (!std::filesystem::exists(*p)) throw ConfigError("file not found: " + *p);
    }
  } else {
    if (c.loss != LossType::L2) throw ConfigError("synthetic regression data requires loss = l2");
    if (c.synthetic_train < 1 || c.synthetic_test < 1 || c.synthetic_dim < 1)
      throw ConfigError("synthetic sizes must be positive");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

struct ExperimentData {
  Dataset train;
  Dataset test;
};

/// Loads (or generates) both splits. IDX loading failures propagate as IdxError.
inline ExperimentData load_experiment_data(const ExperimentConfig& c) {
  ExperimentData d;
  if (c.dataset == "idx") {
    d.train = load_idx(c.train_images, c.train_labels, Split::Train);
    d.test = load_idx(c.test_images, c.test_labels, Split::Test);
    if (c.train_size > d.train.size() || c.test_size > d.test.size())
      throw ConfigError("requested subsample is larger than the dataset");
    if (c.train_size) d.train = subsample(d.train, c.train_size, c.subsample_seed);
    if (c.test_size) d.test = subsample(d.test, c.test_size, c.subsample_seed + 1);
    d.train.split = Split::Train;
    d.test.split = Split::Test;
  } else {
    const Shape in{1, 1, c.synthetic_dim};
    const std::string arch = c.teacher_architecture.empty() ? c.architecture : c.teacher_architecture;
    Network teacher = build_network(in, parse_architecture(arch), ThresholdMode::Zero);
    initialize_weights(teacher, c.seed ^ 0x7465616368657200ULL);
    const std::size_t n = c.synthetic_train + c.synthetic_test;
    Dataset all = synthetic_regression(n, c.synthetic_dim, teacher, c.synthetic_noise, c.seed + 17);
    std::vector<std::size_t> tr(c.synthetic_train), te(c.synthetic_test);
    std::iota(tr.begin(), tr.end(), std::size_t{0});
    std::iota(te.begin(), te.end(), c.synthetic_train);
    d.train = select_rows(all, tr);
    d.test = select_rows(all, te);
    d.test.split = Split::Test;
  }
  return d;
}

struct EpochSummary {
  TraceRow row;
  SpectralReport report;
  double lr = 0.0;
};

struct TrainingResult {
  Network net;
  TrainingTrace trace;
  SpectralReport final_report;
  double loss_ceiling = 0.0;
  double z_norm = 0.0;
  std::size_t n_train = 0;
};

struct EvalResult {
  double loss = 0.0;
  std::optional<double> accuracy;
};

inline EvalResult evaluate(const Network& net, const Dataset& ds, LossKind& loss) {
  const Output out = forward(net, ds.inputs);
  EvalResult r;
  if (loss.type == LossType::CrossEntropy) {
    r.loss = compute_loss(out, ds.labels, loss);
  } else {
    r.loss = compute_loss(out, ds.targets, loss);
  }
  if (ds.is_classification() && out.kind == OutputKind::Probabilities)
    r.accuracy = double(count_correct(out, ds.labels)) / double(ds.size());
  return r;
}

/// Appends one complete line with a single write followed by a flush.
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) : f_(std::fopen(path.c_str(), "wb")) {
    if (!f_) throw ConfigError("cannot create trace " + path);
    write_line(kTraceHeader);
  }
  ~TraceWriter() {
    if (f_) std::fclose(f_);
  }
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  void write_line(const std::string& s) {
    const std::string line = s + "\n";
    if (std::fwrite(line.data(), 1, line.size(), f_) != line.size() || std::fflush(f_) != 0)
      throw std::runtime_error("write to trace failed");
  }

 private:
  std::FILE* f_;
};

struct TrainingCallbacks {
  std::function<void(const EpochSummary&)> on_epoch;
};

/// Trains per the config, writing <output_dir>/trace.csv, final.ckpt.json,
/// report.txt and summary.txt. Fully determined by the config (and seed).
inline TrainingResult run_training(const ExperimentConfig& c, const ExperimentData& data,
                                   const TrainingCallbacks& cb = {}) {
  const bool classification = c.loss == LossType::CrossEntropy;
  if (classification && !data.train.is_classification())
    throw ConfigError("cross_entropy needs labelled data");
  Network net = build_network(data.train.input_shape, parse_architecture(c.architecture), c.thresholds);
  if (classification && !net.has_abs_head()) throw ConfigError("cross_entropy needs an abs final stage");
  if (!classification && net.has_abs_head()) throw ConfigError("l2 regression needs a complex output");
  if (!classification && data.train.targets.cols() != net.output_dim())
    throw ConfigError("network output width does not match the regression targets");
  initialize_weights(net, c.seed);

  std::filesystem::create_directories(c.output_dir);
  const std::filesystem::path out_dir(c.output_dir);
  TraceWriter writer((out_dir / "trace.csv").string());

  AnalyzeOptions aopt;
  aopt.power.tol = c.power_tol;
  aopt.power.max_iter = c.power_max_iter;
  aopt.power.seed = c.seed;
  aopt.lowering_budget_bytes = c.lowering_budget_mb << 20;
  aopt.amplitude_tanh_alpha = c.amplitude_tanh_alpha;
  aopt.probe_seed = c.seed;

  TrainingResult res;
  res.n_train = data.train.size();
  res.z_norm = frobenius_norm(data.train.inputs);
  LossKind loss{c.loss, 0.0};
  SgdState state;
  std::mt19937_64 rng(c.seed + 1);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t d = data.train.inputs.cols();

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    double lr = c.lr;
    if (c.lr_decay_step) lr *= std::pow(c.lr_decay_factor, double((epoch - 1) / c.lr_decay_step));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += c.batch_size) {
      const std::size_t len = std::min(c.batch_size, order.size() - start);
      CMatrix batch(len, d);
      std::vector<int> labels;
      CMatrix targets;
      if (!classification) targets = CMatrix(len, data.train.targets.cols());
      for (std::size_t r = 0; r < len; ++r) {
        const std::size_t idx = order[start + r];
        const auto src = data.train.inputs.row(idx);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
        if (classification) {
          labels.push_back(data.train.labels[idx]);
        } else {
          const auto t = data.train.targets.row(idx);
          std::copy(t.begin(), t.end(), targets.row(r).begin());
        }
      }
      const Gradients g = classification ? backward(net, batch, labels, loss)
                                         : backward(net, batch, targets, loss);
      sgd_step(net, g, lr, c.momentum, state);
    }

    if (epoch % c.analysis_every != 0 && epoch != c.epochs) continue;

    EpochSummary s;
    s.lr = lr;
    const EvalResult tr = evaluate(net, data.train, loss);
    LossKind test_loss{c.loss, 0.0};
    const EvalResult te = evaluate(net, data.test, test_loss);
    s.report = analyze(net, aopt);
    s.row.epoch = epoch;
    s.row.train_loss = tr.loss;
    s.row.train_acc = tr.accuracy;
    s.row.test_acc = te.accuracy;
    s.row.excess_risk = (tr.accuracy && te.accuracy) ? excess_risk(*tr.accuracy, *te.accuracy) : te.loss - tr.loss;
    s.row.sn_product = s.report.sn_product;
    s.row.r_a = s.report.r_a;
    for (const auto& l : s.report.layers) s.row.layer_norms.push_back(l.s);
    writer.write_line(format_trace_row(s.row));
    res.trace.rows.push_back(s.row);
    res.final_report = s.report;
    if (cb.on_epoch) cb.on_epoch(s);
  }

  res.loss_ceiling = loss.ceiling;
  save_checkpoint(net, (out_dir / "final.ckpt.json").string());
  {
    std::ofstream rep(out_dir / "report.txt", std::ios::binary | std::ios::trunc);
    rep << to_key_values(res.final_report);
  }
  {
    std::ofstream sum(out_dir / "summary.txt", std::ios::binary | std::ios::trunc);
    sum << "n_train = " << res.n_train << "\n";
    sum << "max_width = " << net.max_width() << "\n";
    sum << "depth = " << net.depth() << "\n";
    sum << "z_norm = " << detail::fmt17(res.z_norm) << "\n";
    sum << "loss_ceiling = " << detail::fmt17(res.loss_ceiling) << "\n";
    if (res.trace.rows.size() >= 3) {
      try {
        const auto sp = correlate_trace(res.trace);
        sum << "scc = " << detail::fmt17(sp.scc) << "\n";
        sum << "p = " << detail::fmt17(sp.p) << "\n";
      } catch (const UndefinedCorrelation&) {
        sum << "scc = undefined\n";
      }
    }
  }
  res.net = std::move(net);
  return res;
}

}  // namespace cvnn
