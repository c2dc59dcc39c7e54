#ifndef TPA_DATA_HPP
#define TPA_DATA_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tpa/checkpoint.hpp"
#include "tpa/error.hpp"
#include "tpa/rng.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

/// Labeled inputs in [0,1]^d, stored as an [n, d] tensor.
struct Dataset {
  Tensor inputs{Shape{0, 0}};
  std::vector<std::size_t> labels;
  std::size_t n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return inputs.rank() == 2 ? inputs.shape()[1] : 0; }
  std::span<const double> input(std::size_t i) const { return inputs.row(i); }

  bool operator==(const Dataset&) const = default;
};

/// Rows `indices` of `data`, in that order.
inline Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t d = data.dim();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  Dataset out;
  out.n_classes = data.n_classes;
  for (std::size_t i : indices) {
    if (i >= data.size()) throw IndexError("subset index " + std::to_string(i) + " out of range");
    const auto row = data.input(i);
    values.insert(values.end(), row.begin(), row.end());
    out.labels.push_back(data.labels[i]);
  }
  out.inputs = Tensor({indices.size(), d}, std::move(values));
  return out;
}

inline Tensor clip_to_domain(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return Tensor::vector(std::move(out));
}

/// Isotropic Gaussian clusters, one per class, around centers drawn
/// uniformly in [0.2, 0.8]^dim; samples are clipped to [0,1].
inline Dataset gen_blobs(std::uint64_t seed, std::size_t n_classes, std::size_t dim, std::size_t n_per_class,
                         double sigma) {
  if (n_classes == 0) throw ArgumentError("n_classes must be positive");
  if (dim < 2) throw ArgumentError("dim must be at least 2");
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  std::vector<double> centers(n_classes * dim);
  Rng center_rng(derive_seed(seed, "data.centers"));
  for (double& c : centers) c = center_rng.uniform(0.2, 0.8);

  Dataset out;
  out.n_classes = n_classes;
  std::vector<double> values;
  values.reserve(n_classes * n_per_class * dim);
  Rng rng(derive_seed(seed, "data.samples"));
  // Interleave classes so any prefix of the dataset stays balanced.
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t j = 0; j < dim; ++j) values.push_back(std::clamp(centers[c * dim + j] + sigma * rng.normal(), 0.0, 1.0));
      out.labels.push_back(c);
    }
  }
  out.inputs = Tensor({n_classes * n_per_class, dim}, std::move(values));
  return out;
}

namespace detail {

inline std::uint32_t read_be_u32(std::span<const std::uint8_t> bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header");
  const std::uint8_t* p = bytes.data() + offset;
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | std::uint32_t{p[3]};
}

}  // namespace detail

/// Parses IDX image/label buffers (magic 0x00000803 and 0x00000801).
/// Pixels are scaled by 1/255 and images flattened row-major.
inline Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (detail::read_be_u32(images, 0, "images") != 0x00000803) throw FormatError("images: wrong IDX magic");
  if (detail::read_be_u32(labels, 0, "labels") != 0x00000801) throw FormatError("labels: wrong IDX magic");
  const std::size_t n = detail::read_be_u32(images, 4, "images");
  const std::size_t rows = detail::read_be_u32(images, 8, "images");
  const std::size_t cols = detail::read_be_u32(images, 12, "images");
  const std::size_t n_labels = detail::read_be_u32(labels, 4, "labels");
  const std::size_t d = rows * cols;
  if (images.size() != 16 + n * d) {
    throw FormatError("images: expected " + std::to_string(16 + n * d) + " bytes, found " + std::to_string(images.size()));
  }
  if (labels.size() != 8 + n_labels) {
    throw FormatError("labels: expected " + std::to_string(8 + n_labels) + " bytes, found " + std::to_string(labels.size()));
  }
  if (n != n_labels) {
    throw ConsistencyError(std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  }
  Dataset out;
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n * d; ++i) values[i] = images[16 + i] / 255.0;
  out.inputs = Tensor({n, d}, std::move(values));
  out.labels.resize(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = labels[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.n_classes = n == 0 ? 0 : max_label + 1;
  return out;
}

inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_idx(read_file_bytes(images_path), read_file_bytes(labels_path));
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// CSV with header `label,f0,...,f{d-1}`, one row per example.
inline void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.input(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset_csv(data, out);
  if (!out) throw IoError("write failed for " + path.string());
}

inline Dataset read_dataset_csv(std::istream& in, std::size_t n_classes) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw FormatError("dataset CSV: missing header");
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  Dataset out;
  out.n_classes = n_classes;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        if (col == 0) {
          const unsigned long label = std::stoul(cell, &used);
          if (label >= n_classes) throw IndexError("label out of range");
          out.labels.push_back(label);
        } else {
          values.push_back(std::stod(cell, &used));
        }
        if (used != cell.size()) throw FormatError("trailing characters");
      } catch (const std::exception& e) {
        throw FormatError("dataset CSV line " + std::to_string(line_no) + ": bad cell '" + cell + "' (" + e.what() + ")");
      }
      ++col;
    }
    if (col != dim + 1) throw FormatError("dataset CSV line " + std::to_string(line_no) + ": wrong column count");
  }
  out.inputs = Tensor({out.labels.size(), dim}, std::move(values));
  return out;
}

inline Dataset load_dataset_csv(const std::filesystem::path& path, std::size_t n_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in, n_classes);
}

/// Fractions of a shuffled index range assigned to proxy training, target
/// training and evaluation.
struct SplitSpec {
  std::uint64_t seed = 0;
  double proxy_fraction = 0.4;
  double target_fraction = 0.4;
  double eval_fraction = 0.2;
  /// When false, target training draws from the same prefix as the proxy.
  bool disjoint = true;
};

struct Split {
  std::vector<std::size_t> proxy_train;
  std::vector<std::size_t> target_train;
  std::vector<std::size_t> eval;

  bool operator==(const Split&) const = default;
};

inline Split make_split(std::size_t n, const SplitSpec& spec) {
  const double fp = spec.proxy_fraction, ft = spec.target_fraction, fe = spec.eval_fraction;
  if (fp < 0 || ft < 0 || fe < 0) throw ArgumentError("split fractions must be nonnegative");
  const double used = spec.disjoint ? fp + ft + fe : std::max(fp, ft) + fe;
  if (used > 1.0 + 1e-12) throw ArgumentError("split fractions sum to more than 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, "split"));
  shuffle_in_place(order, rng);

  const auto count = [n](double f) { return static_cast<std::size_t>(f * static_cast<double>(n) + 1e-9); };
  const std::size_t np = count(fp), nt = count(ft), ne = count(fe);
  Split out;
  const std::size_t target_start = spec.disjoint ? np : 0;
  const std::size_t eval_start = spec.disjoint ? np + nt : std::max(np, nt);
  out.proxy_train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(np));
  out.target_train.assign(order.begin() + static_cast<std::ptrdiff_t>(target_start),
                          order.begin() + static_cast<std::ptrdiff_t>(target_start + nt));
  out.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(eval_start),
                  order.begin() + static_cast<std::ptrdiff_t>(eval_start + ne));
  return out;
}

}  // namespace tpa

#endif  // TPA_DATA_HPP
