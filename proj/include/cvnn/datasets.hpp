#pragma once

// IDX image/label files, complexification, synthetic regression data and
// class-stratified subsampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cvnn/complex_linalg.hpp"
#include "cvnn/conv.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/network.hpp"

namespace cvnn {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

enum class Split { Train, Test };

struct Dataset {
  /// One row per sample, CHW-flattened for images.
  CMatrix inputs;
  /// Shape of a single input (1 x rows x cols for IDX images).
  Shape input_shape;
  /// Class labels; empty for regression data.
  std::vector<int> labels;
  /// Regression targets (n x d_Y); empty for classification data.
  CMatrix targets;
  std::size_t num_classes = 0;
  Split split = Split::Train;

  std::size_t size() const noexcept { return inputs.rows(); }
  bool is_classification() const noexcept { return !labels.empty(); }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t pos) {
  return (std::uint32_t(b[pos]) << 24) | (std::uint32_t(b[pos + 1]) << 16) |
         (std::uint32_t(b[pos + 2]) << 8) | std::uint32_t(b[pos + 3]);
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(std::uint8_t(v >> 24));
  b.push_back(std::uint8_t(v >> 16));
  b.push_back(std::uint8_t(v >> 8));
  b.push_back(std::uint8_t(v));
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IdxError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IdxError("short write to " + path);
}

struct IdxHeader {
  std::vector<std::uint32_t> dims;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 1;
};

inline IdxHeader parse_idx_header(const std::vector<std::uint8_t>& b, std::uint32_t magic,
                                  std::size_t ndims, const std::string& path) {
  if (b.size() < 4) throw IdxTruncatedError(path + ": file shorter than the magic number");
  const std::uint32_t got = read_be32(b, 0);
  if (got != magic) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": magic 0x%08x, expected 0x%08x", got, magic);
    throw IdxMagicError(path + buf);
  }
  IdxHeader h;
  h.payload_offset = 4 + 4 * ndims;
  if (b.size() < h.payload_offset) throw IdxTruncatedError(path + ": header truncated");
  for (std::size_t i = 0; i < ndims; ++i) {
    h.dims.push_back(read_be32(b, 4 + 4 * i));
    h.payload_size *= h.dims.back();
  }
  if (b.size() - h.payload_offset < h.payload_size)
    throw IdxTruncatedError(path + ": payload has " + std::to_string(b.size() - h.payload_offset) +
                            " bytes, header declares " + std::to_string(h.payload_size));
  if (b.size() - h.payload_offset > h.payload_size)
    throw IdxError(path + ": trailing bytes after the declared payload");
  return h;
}

}  // namespace detail

/// Big-endian IDX: images (magic 0x803, dims count/rows/cols) and labels
/// (magic 0x801, dim count). Pixels are scaled by 1/255; imaginary parts are 0.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        Split split = Split::Train) {
  const auto ib = detail::read_file(images_path);
  const auto lb = detail::read_file(labels_path);
  const auto ih = detail::parse_idx_header(ib, kIdxImageMagic, 3, images_path);
  const auto lh = detail::parse_idx_header(lb, kIdxLabelMagic, 1, labels_path);
  const std::size_t n = ih.dims[0];
  if (lh.dims[0] != n)
    throw IdxCountMismatch(std::to_string(n) + " images but " + std::to_string(lh.dims[0]) + " labels");
  Dataset ds;
  ds.split = split;
  ds.input_shape = {1, ih.dims[1], ih.dims[2]};
  const std::size_t d = ds.input_shape.size();
  ds.inputs = CMatrix(n, d);
  for (std::size_t i = 0; i < n * d; ++i)
    ds.inputs.storage()[i] = Complex(double(ib[ih.payload_offset + i]) / 255.0, 0.0);
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lb[lh.payload_offset + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::size_t(max_label + 1);
  return ds;
}

/// Inverse of load_idx for datasets whose pixels are multiples of 1/255.
inline void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.input_shape.channels != 1) throw ShapeError("IDX images are single-channel");
  if (ds.labels.size() != ds.size()) throw ShapeError("IDX export needs one label per image");
  std::vector<std::uint8_t> ib, lb;
  detail::put_be32(ib, kIdxImageMagic);
  detail::put_be32(ib, std::uint32_t(ds.size()));
  detail::put_be32(ib, std::uint32_t(ds.input_shape.height));
  detail::put_be32(ib, std::uint32_t(ds.input_shape.width));
  for (const Complex& z : ds.inputs.values()) {
    const double v = std::round(z.real() * 255.0);
    if (!(v >= 0.0 && v <= 255.0) || z.imag() != 0.0) throw DomainError("pixel outside [0, 1]");
    ib.push_back(std::uint8_t(v));
  }
  detail::put_be32(lb, kIdxLabelMagic);
  detail::put_be32(lb, std::uint32_t(ds.size()));
  for (int y : ds.labels) {
    if (y < 0 || y > 255) throw DomainError("IDX labels must fit in one byte");
    lb.push_back(std::uint8_t(y));
  }
  detail::write_file(images_path, ib);
  detail::write_file(labels_path, lb);
}

/// re = value, im = 0
inline CMatrix to_complex(const RMatrix& real_inputs) {
  CMatrix out(real_inputs.rows(), real_inputs.cols());
  for (std::size_t i = 0; i < real_inputs.size(); ++i) {
    const double v = real_inputs.storage()[i];
    if (!std::isfinite(v)) throw DomainError("non-finite input");
    out.storage()[i] = Complex(v, 0.0);
  }
  return out;
}

/// z_i with i.i.d. unit-variance complex Gaussian entries (re, im each of
/// variance 1/2); y_i = teacher(z_i) + noise * (unit-variance complex Gaussian).
inline Dataset synthetic_regression(std::size_t n, std::size_t d, const Network& teacher, double noise,
                                    std::uint64_t seed) {
  if (teacher.input_dim() != d) throw ShapeError("teacher input width does not match d");
  if (teacher.has_abs_head()) throw DomainError("regression teacher must produce complex outputs");
  if (!(noise >= 0.0)) throw DomainError("noise scale must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Dataset ds;
  ds.input_shape = teacher.input_shape();
  ds.inputs = CMatrix(n, d);
  for (auto& z : ds.inputs.storage()) {
    const double re = normal(rng);
    const double im = normal(rng);
    z = Complex(re, im);
  }
  ds.targets = forward(teacher, ds.inputs).values;
  if (noise > 0.0) {
    for (auto& y : ds.targets.storage()) {
      const double re = normal(rng);
      const double im = normal(rng);
      y += noise * Complex(re, im);
    }
  }
  return ds;
}

/// Rows `keep` of `ds`, in the given order.
inline Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& keep) {
  Dataset out;
  out.input_shape = ds.input_shape;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.inputs = CMatrix(keep.size(), ds.inputs.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto src = ds.inputs.row(keep[r]);
    std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
  }
  if (ds.is_classification()) {
    for (auto i : keep) out.labels.push_back(ds.labels[i]);
  }
  if (!ds.targets.empty()) {
    out.targets = CMatrix(keep.size(), ds.targets.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const auto src = ds.targets.row(keep[r]);
      std::copy(src.begin(), src.end(), out.targets.row(r).begin());
    }
  }
  return out;
}

/// Indices of a class-stratified uniform subsample of size n_keep, returned
/// in ascending order. Per-class quotas use largest remainders (ties to the
/// lower class index). Unlabelled data is subsampled uniformly.
inline std::vector<std::size_t> stratified_indices(const Dataset& ds, std::size_t n_keep,
                                                   std::uint64_t seed) {
  const std::size_t n = ds.size();
  if (n_keep > n) throw DomainError("cannot keep " + std::to_string(n_keep) + " of " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  if (!ds.is_classification()) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    keep.assign(all.begin(), all.begin() + std::ptrdiff_t(n_keep));
  } else {
    const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
    std::vector<std::vector<std::size_t>> by_class(std::size_t(max_label + 1));
    for (std::size_t i = 0; i < n; ++i) by_class[std::size_t(ds.labels[i])].push_back(i);
    std::vector<std::size_t> quota(by_class.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      const double exact = double(n_keep) * double(by_class[c].size()) / double(n);
      quota[c] = std::size_t(std::floor(exact));
      assigned += quota[c];
      rem.emplace_back(exact - double(quota[c]), c);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t i = 0; assigned < n_keep; ++i, ++assigned) ++quota[rem[i].second];
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& idx = by_class[c];
      std::shuffle(idx.begin(), idx.end(), rng);
      keep.insert(keep.end(), idx.begin(), idx.begin() + std::ptrdiff_t(quota[c]));
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline Dataset subsample(const Dataset& ds, std::size_t n_keep, std::uint64_t seed) {
  return select_rows(ds, stratified_indices(ds, n_keep, seed));
}

}  // namespace cvnn
