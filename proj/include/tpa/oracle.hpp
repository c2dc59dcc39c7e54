#ifndef TPA_ORACLE_HPP
#define TPA_ORACLE_HPP

// Brute-force references for gradients, Hessian-vector products and dense
// Hessians. These cost O(d) or O(d^2) evaluations and never run inside
// attack loops.

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "tpa/attacks.hpp"
#include "tpa/data.hpp"
#include "tpa/error.hpp"
#include "tpa/objective.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

enum class DifferenceScheme { forward, central };

struct OracleConfig {
  double h = 1e-5;
  DifferenceScheme scheme = DifferenceScheme::central;
  double tolerance = 1e-6;

  void validate() const {
    if (!(h > 0.0)) throw ArgumentError("oracle step h must be positive");
  }
};

/// Per-coordinate difference quotient of f.value; central by default.
template <Objective F>
Tensor fd_gradient(const F& f, std::span<const double> x, double h, DifferenceScheme scheme = DifferenceScheme::central) {
  if (!(h > 0.0)) throw ArgumentError("fd_gradient needs h > 0");
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> g(x.size());
  const double f0 = scheme == DifferenceScheme::forward ? f.value(x) : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double up = f.value(p);
    if (scheme == DifferenceScheme::central) {
      p[i] = x[i] - h;
      g[i] = (up - f.value(p)) / (2.0 * h);
    } else {
      g[i] = (up - f0) / h;
    }
    p[i] = x[i];
  }
  return Tensor::vector(std::move(g));
}

/// (grad f(x + h v) - grad f(x - h v)) / (2h), gradients by reverse mode.
template <Objective F>
Tensor oracle_hvp(const F& f, std::span<const double> x, std::span<const double> v, double h = 1e-4) {
  require_same_size(x, v, "oracle_hvp");
  if (!(norm2(v) > 0.0)) throw ArgumentError("oracle_hvp needs a nonzero direction");
  if (!(h > 0.0)) throw ArgumentError("oracle_hvp needs h > 0");
  const Tensor up = f.value_and_gradient(add_scaled(x, h, v)).gradient;
  const Tensor down = f.value_and_gradient(add_scaled(x, -h, v)).gradient;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (up[i] - down[i]) / (2.0 * h);
  return Tensor::vector(std::move(out));
}

/// Dense Hessian from function values only: 3-point second differences on
/// the diagonal and 4-corner cross differences off it, i.e. the 9-point
/// stencil of each coordinate plane.
template <Objective F>
Tensor dense_hessian(const F& f, std::span<const double> x, double h = 1e-3) {
  if (!(h > 0.0)) throw ArgumentError("dense_hessian needs h > 0");
  const std::size_t d = x.size();
  std::vector<double> p(x.begin(), x.end());
  const double f0 = f.value(x);
  std::vector<double> hess(d * d);
  const auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    p[i] += di;
    p[j] += dj;
    const double v = f.value(p);
    p[i] = x[i];
    p[j] = x[j];
    return v;
  };
  for (std::size_t i = 0; i < d; ++i) {
    hess[i * d + i] = (at(i, h, i, 0.0) - 2.0 * f0 + at(i, -h, i, 0.0)) / (h * h);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
      hess[i * d + j] = v;
      hess[j * d + i] = v;
    }
  }
  return Tensor({d, d}, std::move(hess));
}

struct HvpErrorPoint {
  double k = 0.0;
  double mean_error = 0.0;
};

/// For each k, the mean over `points` of ||approximate_hvp(k) - oracle_hvp||_2
/// along the same unit direction u = grad / ||grad||. Points where the
/// gradient vanishes are skipped.
template <Objective F>
std::vector<HvpErrorPoint> hvp_error_curve(const std::vector<F>& losses, const std::vector<Tensor>& points,
                                           std::span<const double> ks, double oracle_h = 1e-4) {
  if (losses.size() != points.size()) throw ArgumentError("one loss per point required");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0)) throw ArgumentError("hvp_error_curve: k must be positive");
    if (i && !(ks[i] < ks[i - 1])) throw ArgumentError("hvp_error_curve: ks must be strictly descending");
  }
  std::vector<HvpErrorPoint> out;
  for (double k : ks) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      const HvpEstimate est = approximate_hvp(losses[p], points[p], k);
      if (est.dropped) continue;
      const Tensor exact = oracle_hvp(losses[p], points[p], est.direction, oracle_h);
      sum += norm2(subtract(est.hvp, exact));
      ++n;
    }
    out.push_back({k, n ? sum / static_cast<double>(n) : 0.0});
  }
  return out;
}

/// hvp_error_curve over (model, example) pairs at the model's cross-entropy.
inline std::vector<HvpErrorPoint> hvp_error_curve(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                                                  std::span<const double> ks, double oracle_h = 1e-4) {
  std::vector<ModelLoss> losses;
  std::vector<Tensor> points;
  for (std::size_t i : indices) {
    losses.emplace_back(model, data.labels.at(i));
    points.push_back(Tensor::vector(data.input(i)));
  }
  return hvp_error_curve(losses, points, ks, oracle_h);
}

inline void write_hvp_curve_csv(const std::vector<HvpErrorPoint>& curve, std::ostream& out) {
  out << "k,mean_error\n";
  for (const auto& p : curve) out << format_double(p.k) << ',' << format_double(p.mean_error) << '\n';
}

}  // namespace tpa

#endif  // TPA_ORACLE_HPP
