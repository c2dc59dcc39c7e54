#ifndef TPA_TENSOR_HPP
#define TPA_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpa/error.hpp"

namespace tpa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array of doubles. The flat buffer always holds exactly
/// product(shape) entries.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  /// Rank-1 tensor owning a copy of `values`.
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor vector(std::span<const double> values) {
    return vector(std::vector<double>(values.begin(), values.end()));
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  operator std::span<const double>() const noexcept { return data_; }  // NOLINT

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  /// Row `i` of a rank-2 tensor.
  std::span<const double> row(std::size_t i) const {
    if (rank() != 2 || i >= shape_[0]) throw DimensionError("row index out of range for " + shape_string(shape_));
    return std::span<const double>(data_).subspan(i * shape_[1], shape_[1]);
  }

  std::span<double> row(std::size_t i) {
    if (rank() != 2 || i >= shape_[0]) throw DimensionError("row index out of range for " + shape_string(shape_));
    return std::span<double>(data_).subspan(i * shape_[1], shape_[1]);
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Vector helpers over flat spans. Callers guarantee equal lengths.

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm2_squared(std::span<const double> a) { return dot(a, a); }

inline double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
}

inline Tensor add(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::vector(std::move(out));
}

inline Tensor subtract(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "subtract");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::vector(std::move(out));
}

inline Tensor scaled(std::span<const double> a, double s) {
  std::vector<double> out(a.begin(), a.end());
  for (double& v : out) v *= s;
  return Tensor::vector(std::move(out));
}

/// a + s * b
inline Tensor add_scaled(std::span<const double> a, double s, std::span<const double> b) {
  require_same_size(a, b, "add_scaled");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return Tensor::vector(std::move(out));
}

/// y += s * x, in place.
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

}  // namespace tpa

#endif  // TPA_TENSOR_HPP
