#ifndef TPA_FLATNESS_HPP
#define TPA_FLATNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "tpa/attacks.hpp"
#include "tpa/data.hpp"
#include "tpa/error.hpp"
#include "tpa/model.hpp"
#include "tpa/objective.hpp"
#include "tpa/parallel.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

/// D(x, y) = L(target(x), y) - L(proxy(x), y).
inline double transfer_gap(const Model& proxy, const Model& target, std::span<const double> x, std::size_t y) {
  return loss_ce(forward(target, x), y) - loss_ce(forward(proxy, x), y);
}

/// grad_x D(x, y).
inline Tensor grad_transfer_gap(const Model& proxy, const Model& target, std::span<const double> x, std::size_t y) {
  return subtract(loss_and_input_grad(target, x, y).grad_input, loss_and_input_grad(proxy, x, y).grad_input);
}

/// Sum over coordinates of |central second difference| of f.value:
/// sum_i |f(x + h e_i) - 2 f(x) + f(x - h e_i)| / h^2. Costs 2d + 1 evaluations.
template <Objective F>
double second_order_diag_sum(const F& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw ArgumentError("second_order_diag_sum needs h > 0");
  std::vector<double> p(x.begin(), x.end());
  const double f0 = f.value(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double up = f.value(p);
    p[i] = x[i] - h;
    const double down = f.value(p);
    p[i] = x[i];
    sum += std::abs((up - 2.0 * f0 + down) / (h * h));
  }
  return sum;
}

struct DiagonalCurvature {
  double sum = 0.0;
  /// Coordinates whose stencil crosses a ReLU kink (always 0 for smooth models).
  std::size_t kink_coordinates = 0;
  /// `sum` restricted to kink-free coordinates.
  double smooth_sum = 0.0;
};

/// Diagonal curvature of log F(x)[y] for a model. On ReLU models a stencil
/// that changes the activation pattern measures a kink rather than a second
/// derivative; such coordinates are counted separately.
inline DiagonalCurvature second_order_diag_sum(const Model& model, std::span<const double> x, std::size_t y, double h) {
  if (!(h > 0.0)) throw ArgumentError("second_order_diag_sum needs h > 0");
  const ModelLogProb g(model, y);
  const std::vector<bool> base = relu_pattern(model, x);
  const bool check_kinks = !base.empty();
  std::vector<double> p(x.begin(), x.end());
  const double g0 = g.value(x);
  DiagonalCurvature out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double up = g.value(p);
    const bool kink_up = check_kinks && relu_pattern(model, p) != base;
    p[i] = x[i] - h;
    const double down = g.value(p);
    const bool kink_down = check_kinks && relu_pattern(model, p) != base;
    p[i] = x[i];
    const double term = std::abs((up - 2.0 * g0 + down) / (h * h));
    out.sum += term;
    if (kink_up || kink_down) ++out.kink_coordinates;
    else out.smooth_sum += term;
  }
  return out;
}

/// Monte-Carlo estimate of E_{Delta ~ U(-b,b)^d} ||grad L(x + delta + Delta, y)||_2
/// with n_samples draws from `seed`.
inline double surrogate_value(const Model& model, std::span<const double> x, std::span<const double> delta, std::size_t y,
                              double b, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ArgumentError("surrogate_value needs n_samples >= 1");
  require_same_size(x, delta, "surrogate_value");
  const ModelLoss loss(model, y);
  if (b == 0.0) return norm2(loss.value_and_gradient(detail::offset(x, delta)).gradient);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto offset = detail::uniform_box(derive_seed(seed, "surrogate", {i}), x.size(), b);
    sum += norm2(loss.value_and_gradient(detail::offset(x, delta, offset)).gradient);
  }
  return sum / static_cast<double>(n_samples);
}

struct BoundConfig {
  /// Weight C in (0, 1]; 1 is the relaxation that needs no density constants.
  double C = 1.0;
  /// Second-difference step for the curvature component.
  double h = 1e-3;
  /// Neighborhood half-width and sample count for the reported flatness.
  double b_for_norm = 16.0 / kPixelScale;
  std::size_t n_samples = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    if (!(C > 0.0 && C <= 1.0)) throw ArgumentError("C must lie in (0, 1]");
    if (!(h > 0.0)) throw ArgumentError("h must be positive");
    if (!(b_for_norm >= 0.0) || n_samples < 1) throw ArgumentError("bad neighborhood settings");
  }
};

struct ExampleBound {
  double gap_clean = 0.0;            // D(x, y)
  double gap_adv = 0.0;              // D(x + delta, y)
  double proxy_loss_adv = 0.0;       // L(F(x + delta), y)
  double target_loss_adv = 0.0;      // L(F'(x + delta), y)
  double delta_sq = 0.0;             // ||delta||_2^2
  double grad_gap_clean_sq = 0.0;    // ||grad D(x, y)||_2^2
  double grad_log_prob_sq = 0.0;     // ||grad log F(x + delta)[y]||_2^2
  DiagonalCurvature curvature;       // at x + delta
  double flatness = 0.0;             // surrogate_value at x + delta
  double rhs = 0.0;                  // this example's share of K
  bool assumption3 = true;           // density proxy: p(x + delta) <= p(x)
  bool assumption4 = true;           // L(F'(x + delta)) <= L(F(x + delta))
  bool second_claim = false;         // |L(F)^2 - K| <= L(F')^2 with the dataset K
  bool second_claim_own_rhs = false; // same with this example's rhs
};

struct AssumptionTallies {
  std::size_t assumption3_violations = 0;
  std::size_t assumption4_violations = 0;
  /// The proxy uses only linear maps and ReLUs.
  bool assumption5_architecture = false;
};

/// Empirical evaluation of the three-component transfer bound over a dataset.
/// Squared "norms" of scalar losses are squared values.
struct BoundReport {
  double mean_sq_transfer_gap = 0.0;  // E D(x + delta, y)^2
  double model_diff_component = 0.0;
  double first_order_component = 0.0;
  double second_order_component = 0.0;
  double rhs_total = 0.0;             // K
  double lhs_target_loss_sq = 0.0;    // E L(F'(x + delta), y)^2
  double mean_flatness = 0.0;
  double C_used = 1.0;
  std::size_t n_examples = 0;
  bool undefined = true;
  bool bound_holds = false;           // mean_sq_transfer_gap <= rhs_total
  std::size_t kink_coordinates = 0;
  AssumptionTallies assumption_violation_counts;
  /// Second claim satisfied, counted over examples where assumption 4 holds.
  std::size_t second_claim_holds = 0;
  std::size_t second_claim_eligible = 0;
  double second_claim_rate = 0.0;
  std::size_t second_claim_own_rhs_holds = 0;
  /// D(x + delta)^2 <= own rhs, over the same examples.
  std::size_t example_bound_holds = 0;
  double example_bound_rate = 0.0;
  std::vector<ExampleBound> examples;
};

namespace detail {

// Leave-one-out Gaussian kernel log-density with Scott bandwidth, used only
// as a proxy for the density comparison p(x + delta) <= p(x).
class KernelDensity {
 public:
  explicit KernelDensity(const Dataset& ref) : ref_(&ref) {
    const std::size_t n = ref.size(), d = ref.dim();
    double var_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = ref.input(i)[j];
        m += v;
        m2 += v * v;
      }
      m /= static_cast<double>(std::max<std::size_t>(n, 1));
      var_sum += std::max(0.0, m2 / static_cast<double>(std::max<std::size_t>(n, 1)) - m * m);
    }
    const double sd = std::sqrt(var_sum / static_cast<double>(std::max<std::size_t>(d, 1)));
    bandwidth_ = std::max(1e-6, sd * std::pow(static_cast<double>(std::max<std::size_t>(n, 2)), -1.0 / (static_cast<double>(d) + 4.0)));
  }

  double log_density(std::span<const double> p, std::size_t exclude) const {
    std::vector<double> terms;
    for (std::size_t i = 0; i < ref_->size(); ++i) {
      if (i == exclude) continue;
      const auto r = ref_->input(i);
      double sq = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) sq += (p[j] - r[j]) * (p[j] - r[j]);
      terms.push_back(-sq / (2.0 * bandwidth_ * bandwidth_));
    }
    if (terms.empty()) return 0.0;
    const double m = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
  }

 private:
  const Dataset* ref_;
  double bandwidth_ = 1.0;
};

}  // namespace detail

/// Bound components for perturbations `deltas[j]` of rows `indices[j]`:
///   model_diff   = E[D(x)^2 + C ||delta||^2 ||grad D(x)||^2]
///   first_order  = (1 + C) E[||delta||^2 ||grad log F(x+delta)[y]||^2]
///   second_order = 2 E[||delta||^2 sum_i |d^2 log F(x+delta)[y] / dx_i^2|]
/// and per-example checks of the loss-level claim against K.
inline BoundReport bound_components(const Model& proxy, const Model& target, const Dataset& data,
                                    std::span<const std::size_t> indices, std::span<const Tensor> deltas,
                                    const BoundConfig& cfg) {
  cfg.validate();
  if (indices.size() != deltas.size()) throw ConsistencyError("one delta per example required");
  if (proxy.input_dim() != target.input_dim() || proxy.n_classes() != target.n_classes()) {
    throw DimensionError("proxy and target models disagree on input or label space");
  }
  BoundReport r;
  r.C_used = cfg.C;
  r.n_examples = indices.size();
  r.assumption_violation_counts.assumption5_architecture = proxy.is_piecewise_linear();
  r.examples.resize(indices.size());
  if (indices.empty()) return r;

  const Dataset clean = subset(data, indices);
  const detail::KernelDensity density(clean);
  parallel_for(indices.size(), cfg.threads, [&](std::size_t j) {
    const auto x = clean.input(j);
    const std::size_t y = clean.labels[j];
    const Tensor& delta = deltas[j];
    require_same_size(x, delta, "bound_components");
    const std::vector<double> adv = detail::offset(x, delta);
    ExampleBound& e = r.examples[j];
    e.gap_clean = transfer_gap(proxy, target, x, y);
    e.grad_gap_clean_sq = norm2_squared(grad_transfer_gap(proxy, target, x, y));
    e.proxy_loss_adv = loss_ce(forward(proxy, adv), y);
    e.target_loss_adv = loss_ce(forward(target, adv), y);
    e.gap_adv = e.target_loss_adv - e.proxy_loss_adv;
    e.delta_sq = norm2_squared(delta);
    e.grad_log_prob_sq = norm2_squared(loss_and_input_grad(proxy, adv, y).grad_input);
    e.curvature = second_order_diag_sum(proxy, adv, y, cfg.h);
    e.flatness = surrogate_value(proxy, x, delta, y, cfg.b_for_norm, cfg.n_samples, derive_seed(cfg.seed, "bound", {indices[j]}));
    e.rhs = e.gap_clean * e.gap_clean + cfg.C * e.delta_sq * e.grad_gap_clean_sq +
            (1.0 + cfg.C) * e.delta_sq * e.grad_log_prob_sq + 2.0 * e.delta_sq * e.curvature.sum;
    e.assumption4 = e.target_loss_adv <= e.proxy_loss_adv;
    e.assumption3 = density.log_density(adv, j) <= density.log_density(x, j);
  });

  const double n = static_cast<double>(indices.size());
  double model_diff = 0.0, first = 0.0, second = 0.0, lhs = 0.0, target_sq = 0.0, flat = 0.0;
  for (const ExampleBound& e : r.examples) {
    model_diff += e.gap_clean * e.gap_clean + cfg.C * e.delta_sq * e.grad_gap_clean_sq;
    first += e.delta_sq * e.grad_log_prob_sq;
    second += e.delta_sq * e.curvature.sum;
    lhs += e.gap_adv * e.gap_adv;
    target_sq += e.target_loss_adv * e.target_loss_adv;
    flat += e.flatness;
    r.kink_coordinates += e.curvature.kink_coordinates;
  }
  r.model_diff_component = model_diff / n;
  r.first_order_component = (1.0 + cfg.C) * first / n;
  r.second_order_component = 2.0 * second / n;
  r.rhs_total = r.model_diff_component + r.first_order_component + r.second_order_component;
  r.mean_sq_transfer_gap = lhs / n;
  r.lhs_target_loss_sq = target_sq / n;
  r.mean_flatness = flat / n;
  r.undefined = false;
  r.bound_holds = r.mean_sq_transfer_gap <= r.rhs_total;

  for (ExampleBound& e : r.examples) {
    const double proxy_sq = e.proxy_loss_adv * e.proxy_loss_adv;
    const double target_sq_i = e.target_loss_adv * e.target_loss_adv;
    e.second_claim = std::abs(proxy_sq - r.rhs_total) <= target_sq_i;
    e.second_claim_own_rhs = std::abs(proxy_sq - e.rhs) <= target_sq_i;
    if (!e.assumption3) ++r.assumption_violation_counts.assumption3_violations;
    if (!e.assumption4) {
      ++r.assumption_violation_counts.assumption4_violations;
      continue;
    }
    ++r.second_claim_eligible;
    if (e.second_claim) ++r.second_claim_holds;
    if (e.second_claim_own_rhs) ++r.second_claim_own_rhs_holds;
    if (e.gap_adv * e.gap_adv <= e.rhs) ++r.example_bound_holds;
  }
  r.second_claim_rate =
      r.second_claim_eligible ? static_cast<double>(r.second_claim_holds) / static_cast<double>(r.second_claim_eligible) : 0.0;
  r.example_bound_rate =
      r.second_claim_eligible ? static_cast<double>(r.example_bound_holds) / static_cast<double>(r.second_claim_eligible) : 0.0;
  return r;
}

/// First and second derivative magnitudes of f(x) = sin(x^2) on a grid.
struct LandscapeDemo {
  std::vector<double> x;
  std::vector<double> y1;  // |f'(x)| = |2x cos x^2|
  std::vector<double> y2;  // |f''(x)| = |2 cos x^2 - 4x^2 sin x^2|
  std::vector<double> y3;  // y1 + y2
  std::size_t argmin_y1 = 0;
  std::size_t argmin_y3 = 0;
};

inline LandscapeDemo sin_landscape_demo(double x_min, double x_max, std::size_t n_points) {
  if (n_points < 3) throw ArgumentError("sin_landscape_demo needs at least 3 points");
  if (!(x_max > x_min)) throw ArgumentError("sin_landscape_demo needs x_max > x_min");
  LandscapeDemo demo;
  const double span = x_max - x_min;
  for (std::size_t j = 0; j < n_points; ++j) {
    const double x = x_min + span * static_cast<double>(j) / static_cast<double>(n_points - 1);
    const double sq = x * x;
    const double a = std::abs(2.0 * x * std::cos(sq));
    const double b = std::abs(2.0 * std::cos(sq) - 4.0 * sq * std::sin(sq));
    demo.x.push_back(x);
    demo.y1.push_back(a);
    demo.y2.push_back(b);
    demo.y3.push_back(a + b);
  }
  demo.argmin_y1 = static_cast<std::size_t>(std::min_element(demo.y1.begin(), demo.y1.end()) - demo.y1.begin());
  demo.argmin_y3 = static_cast<std::size_t>(std::min_element(demo.y3.begin(), demo.y3.end()) - demo.y3.begin());
  return demo;
}

inline void write_landscape_csv(const LandscapeDemo& demo, std::ostream& out) {
  out << "x,y1,y2,y3\n";
  for (std::size_t j = 0; j < demo.x.size(); ++j) {
    out << format_double(demo.x[j]) << ',' << format_double(demo.y1[j]) << ',' << format_double(demo.y2[j]) << ','
        << format_double(demo.y3[j]) << '\n';
  }
}

}  // namespace tpa

#endif  // TPA_FLATNESS_HPP
