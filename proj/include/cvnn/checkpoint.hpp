#pragma once

// JSON checkpoints. Every parameter is written as separate "re"/"im" arrays
// of 17-significant-digit decimals, which round-trips doubles bit-exactly.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvnn/activations.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/network.hpp"

namespace cvnn {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string json_double(double v) {
  if (!std::isfinite(v)) throw CheckpointError("cannot serialize a non-finite parameter");
  // "-0" would parse back as the integer 0 and lose its sign.
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_complex_arrays(std::ostream& out, const std::vector<Complex>& v) {
  out << "{\"re\": [";
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << json_double(v[i].real());
  out << "], \"im\": [";
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << json_double(v[i].imag());
  out << "]}";
}

inline std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

}  // namespace detail

inline std::string checkpoint_to_string(const Network& net) {
  std::ostringstream out;
  const Shape& in = net.input_shape();
  out << "{\n  \"format_version\": " << kCheckpointVersion << ",\n";
  out << "  \"input_shape\": [" << in.channels << ", " << in.height << ", " << in.width << "],\n";
  out << "  \"thresholds\": \""
      << (net.threshold_mode() == ThresholdMode::Zero ? "zero" : "trainable") << "\",\n";
  out << "  \"layers\": [";
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    out << (i ? ",\n" : "\n") << "    {";
    if (const auto* d = std::get_if<layer::Dense>(&l.spec.op)) {
      out << "\"type\": \"dense\", \"in\": " << d->in << ", \"out\": " << d->out;
    } else if (const auto* c = std::get_if<layer::Conv>(&l.spec.op)) {
      out << "\"type\": \"conv\", \"kernel_h\": " << c->kernel_h << ", \"kernel_w\": " << c->kernel_w
          << ", \"in_channels\": " << c->in_channels << ", \"out_channels\": " << c->out_channels;
    } else if (std::holds_alternative<layer::MaxPoolModulus>(l.spec.op)) {
      out << "\"type\": \"maxpool\"";
    } else {
      out << "\"type\": \"abs\", \"classes\": " << std::get<layer::AbsHead>(l.spec.op).classes;
    }
    out << ", \"activation\": "
        << (l.spec.activation ? detail::quoted(to_string(*l.spec.activation)) : std::string("null"));
    if (l.weighted()) {
      out << ",\n     \"weights\": ";
      detail::write_complex_arrays(out, l.weights);
      out << ",\n     \"thresholds\": ";
      detail::write_complex_arrays(out, l.thresholds);
    }
    out << "}";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

namespace detail {

inline std::vector<Complex> read_complex_arrays(const nlohmann::json& j, std::size_t expected,
                                                const std::string& what) {
  if (!j.is_object() || !j.contains("re") || !j.contains("im") || !j["re"].is_array() ||
      !j["im"].is_array())
    throw MalformedCheckpoint(what + ": expected {\"re\": [...], \"im\": [...]}");
  const auto& re = j["re"];
  const auto& im = j["im"];
  if (re.size() != im.size())
    throw CheckpointShapeError(what + ": re and im arrays differ in length");
  if (re.size() != expected)
    throw CheckpointShapeError(what + ": " + std::to_string(re.size()) + " values, layer needs " +
                               std::to_string(expected));
  std::vector<Complex> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!re[i].is_number() || !im[i].is_number()) throw MalformedCheckpoint(what + ": non-numeric entry");
    out[i] = Complex(re[i].get<double>(), im[i].get<double>());
  }
  return out;
}

inline std::size_t positive_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    throw MalformedCheckpoint(std::string("layer field '") + key + "' missing or not a non-negative integer");
  return j[key].get<std::size_t>();
}

}  // namespace detail

inline Network checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedCheckpoint(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version")) throw MalformedCheckpoint("missing format_version");
  if (!j["format_version"].is_number_integer()) throw MalformedCheckpoint("format_version must be an integer");
  if (j["format_version"].get<long long>() != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint format_version " + j["format_version"].dump() +
                                 ", this build reads " + std::to_string(kCheckpointVersion));
  if (!j.contains("input_shape") || !j["input_shape"].is_array() || j["input_shape"].size() != 3)
    throw MalformedCheckpoint("input_shape must be [channels, height, width]");
  for (const auto& v : j["input_shape"])
    if (!v.is_number_unsigned()) throw MalformedCheckpoint("input_shape entries must be integers");
  const Shape in{j["input_shape"][0].get<std::size_t>(), j["input_shape"][1].get<std::size_t>(),
                 j["input_shape"][2].get<std::size_t>()};
  ThresholdMode mode = ThresholdMode::Zero;
  if (!j.contains("thresholds") || !j["thresholds"].is_string()) throw MalformedCheckpoint("missing thresholds mode");
  if (j["thresholds"] == "trainable") {
    mode = ThresholdMode::Trainable;
  } else if (j["thresholds"] != "zero") {
    throw MalformedCheckpoint("thresholds mode must be \"zero\" or \"trainable\"");
  }
  if (!j.contains("layers") || !j["layers"].is_array()) throw MalformedCheckpoint("missing layers array");

  std::vector<LayerSpec> specs;
  for (const auto& lj : j["layers"]) {
    if (!lj.is_object() || !lj.contains("type") || !lj["type"].is_string())
      throw MalformedCheckpoint("layer without a type");
    const std::string type = lj["type"];
    LayerSpec spec;
    if (type == "dense") {
      spec.op = layer::Dense{detail::positive_field(lj, "in"), detail::positive_field(lj, "out")};
    } else if (type == "conv") {
      spec.op = layer::Conv{detail::positive_field(lj, "kernel_h"), detail::positive_field(lj, "kernel_w"),
                            detail::positive_field(lj, "in_channels"),
                            detail::positive_field(lj, "out_channels")};
    } else if (type == "maxpool") {
      spec.op = layer::MaxPoolModulus{};
    } else if (type == "abs") {
      spec.op = layer::AbsHead{detail::positive_field(lj, "classes")};
    } else {
      throw MalformedCheckpoint("unknown layer type '" + type + "'");
    }
    if (lj.contains("activation") && !lj["activation"].is_null()) {
      if (!lj["activation"].is_string()) throw MalformedCheckpoint("activation must be a string or null");
      try {
        spec.activation = parse_activation(lj["activation"].get<std::string>());
      } catch (const DomainError& e) {
        throw MalformedCheckpoint(e.what());
      }
    }
    specs.push_back(std::move(spec));
  }

  Network net;
  try {
    net = Network(in, std::move(specs), mode);
  } catch (const ShapeError& e) {
    throw CheckpointShapeError(std::string("layer specs do not compose: ") + e.what());
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    Layer& l = net.layers()[i];
    const auto& lj = j["layers"][i];
    const std::string where = "layer " + std::to_string(i);
    if (!l.weighted()) {
      if (lj.contains("weights") || lj.contains("thresholds"))
        throw CheckpointShapeError(where + ": parameter-free layer carries parameters");
      continue;
    }
    if (!lj.contains("weights") || !lj.contains("thresholds"))
      throw MalformedCheckpoint(where + ": missing weights or thresholds");
    l.weights = detail::read_complex_arrays(lj["weights"], l.weights.size(), where + " weights");
    l.thresholds = detail::read_complex_arrays(lj["thresholds"], l.thresholds.size(), where + " thresholds");
  }
  return net;
}

inline void save_checkpoint(const Network& net, const std::string& path) {
  const std::string text = checkpoint_to_string(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out << text;
  if (!out) throw CheckpointError("short write to checkpoint " + path);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace cvnn
