#ifndef TPA_ATTACKS_HPP
#define TPA_ATTACKS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpa/data.hpp"
#include "tpa/error.hpp"
#include "tpa/model.hpp"
#include "tpa/objective.hpp"
#include "tpa/parallel.hpp"
#include "tpa/rng.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

/// Pixel values on a 0-255 scale map to the [0,1] input domain by this factor.
inline constexpr double kPixelScale = 255.0;

enum class AttackKind { bim, mi, ni, vt, rap, tpa };

inline std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::bim: return "bim";
    case AttackKind::mi: return "mi";
    case AttackKind::ni: return "ni";
    case AttackKind::vt: return "vt";
    case AttackKind::rap: return "rap";
    case AttackKind::tpa: return "tpa";
  }
  return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  for (AttackKind k : {AttackKind::bim, AttackKind::mi, AttackKind::ni, AttackKind::vt, AttackKind::rap, AttackKind::tpa})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown attack kind '" + std::string(s) + "'");
}

/// Thrown by an attack loop running with check_invariants when an iterate
/// leaves the L-inf ball or the input domain.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// All lengths (epsilon, step_size, b, rap_radius) are in input units, i.e.
/// pixel values divided by 255. Defaults are the flatness attack's published
/// settings: eps 16, step 1.6, 20 iterations, lambda 5, b 16, k 0.05, N 10.
struct AttackConfig {
  AttackKind kind = AttackKind::bim;
  double epsilon = 16.0 / kPixelScale;
  double step_size = 1.6 / kPixelScale;
  std::size_t iterations = 20;

  // tpa
  double lambda = 5.0;
  double b = 16.0 / kPixelScale;
  double k = 0.05;
  std::size_t n_samples = 10;
  /// Fresh neighborhood samples every iteration; false reuses iteration 0's.
  bool resample_neighbors = true;

  // mi / ni
  double momentum_decay = 1.0;

  // vt: neighbors drawn uniformly from [-vt_beta * epsilon, vt_beta * epsilon]^d
  std::size_t vt_samples = 20;
  double vt_beta = 1.5;

  // rap
  std::size_t rap_inner_steps = 5;
  double rap_radius = 8.0 / kPixelScale;

  bool targeted = false;
  std::optional<std::size_t> target_class;
  std::uint64_t seed = 0;

  /// Re-verify the L-inf and domain constraints after every iteration.
  bool check_invariants = false;

  void validate() const {
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative");
    if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
    if (iterations < 1) throw ConfigError("iterations must be at least 1");
    if (!(k > 0.0)) throw ConfigError("k must be positive");
    if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
    if (!(b >= 0.0)) throw ConfigError("b must be nonnegative");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (!(vt_beta >= 0.0) || !(rap_radius >= 0.0)) throw ConfigError("vt_beta and rap_radius must be nonnegative");
    if (!(momentum_decay >= 0.0)) throw ConfigError("momentum_decay must be nonnegative");
  }
};

inline AttackConfig default_attack_config(AttackKind kind) {
  AttackConfig cfg;
  cfg.kind = kind;
  return cfg;
}

struct AttackResult {
  Tensor delta;
  Tensor adv_input;
  /// Loss of the attacked class after each update.
  std::vector<double> proxy_loss_trace;
  /// TPA only: (1/N) sum_i ||grad L(x + delta + Delta_i)||_2 at each iterate.
  std::vector<double> surrogate_trace;
  bool success_on_proxy = false;
  /// 0 if the clean input already succeeds, t after the t-th update.
  std::optional<std::size_t> first_success;
  std::size_t label = 0;
  /// Class whose loss is driven: label (untargeted) or the target class.
  std::size_t attacked_class = 0;
  bool targeted = false;
};

/// One projected sign step: delta + step * sign(grad), clamped to the L-inf
/// ball and then into the set where x + delta stays in [0,1].
inline Tensor attack_step_sign(std::span<const double> x, std::span<const double> delta, std::span<const double> grad,
                               const AttackConfig& cfg) {
  require_same_size(x, delta, "attack_step_sign");
  require_same_size(x, grad, "attack_step_sign");
  const double eps = cfg.epsilon;
  std::vector<double> out(delta.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double d = std::clamp(delta[i] + cfg.step_size * sign(grad[i]), -eps, eps);
    if (x[i] + d > 1.0) d = 1.0 - x[i];
    if (x[i] + d < 0.0) d = -x[i];
    out[i] = std::clamp(d, -eps, eps);
  }
  return Tensor::vector(std::move(out));
}

namespace detail {

inline std::vector<double> offset(std::span<const double> x, std::span<const double> delta) {
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + delta[i];
  return p;
}

inline std::vector<double> offset(std::span<const double> x, std::span<const double> delta, std::span<const double> extra) {
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = x[i] + delta[i] + extra[i];
  return p;
}

inline std::vector<double> uniform_box(std::uint64_t seed, std::size_t dim, double half_width) {
  Rng rng(seed);
  std::vector<double> v(dim);
  for (double& e : v) e = rng.uniform(-half_width, half_width);
  return v;
}

inline double direction_sign(const AttackConfig& cfg) { return cfg.targeted ? -1.0 : 1.0; }

inline std::size_t attacked_class(const AttackConfig& cfg, std::size_t y, std::size_t n_classes) {
  if (!cfg.targeted) return y;
  if (!cfg.target_class) throw ArgumentError("targeted attack needs a target class");
  const std::size_t t = *cfg.target_class;
  check_class(t, n_classes);
  if (t == y) throw ArgumentError("target class equals the true label");
  return t;
}

}  // namespace detail

/// Neighborhood offset Delta_i for (example, iteration, sample); each is its
/// own stream so results do not depend on evaluation order.
inline std::vector<double> neighbor_offset(const AttackConfig& cfg, std::size_t dim, std::uint64_t example,
                                           std::size_t iteration, std::size_t sample) {
  const std::size_t it = cfg.resample_neighbors ? iteration : 0;
  return detail::uniform_box(derive_seed(cfg.seed, "attack.neighbor", {example, it, sample}), dim, cfg.b);
}

struct HvpEstimate {
  Tensor hvp;
  /// Unit direction u = grad / ||grad||.
  Tensor direction;
  double gradient_norm = 0.0;
  /// Gradient norm below 1e-12: u is undefined and hvp is zero.
  bool dropped = false;
};

/// Forward-difference Hessian-vector product along the normalized gradient:
/// H u ~ (grad f(p + k u) - grad f(p)) / k with u = grad f(p) / ||grad f(p)||.
/// Pass the gradient at p when already known.
template <Objective F>
HvpEstimate approximate_hvp(const F& f, std::span<const double> point, double k, const Tensor* grad_at_point = nullptr) {
  ValueGrad vg;
  if (!grad_at_point) vg = f.value_and_gradient(point);
  const Tensor& g = grad_at_point ? *grad_at_point : vg.gradient;
  HvpEstimate out;
  out.gradient_norm = norm2(g);
  if (out.gradient_norm < 1e-12) {
    out.dropped = true;
    out.hvp = Tensor::zeros_like(g);
    out.direction = Tensor::zeros_like(g);
    return out;
  }
  out.direction = scaled(g, 1.0 / out.gradient_norm);
  const Tensor shifted = add_scaled(point, k, out.direction);
  const ValueGrad gk = f.value_and_gradient(shifted);
  std::vector<double> h(g.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = (gk.gradient[i] - g[i]) / k;
  out.hvp = Tensor::vector(std::move(h));
  return out;
}

struct TpaGradient {
  /// Descent direction of -s*L(x+delta) + lambda * E||grad L(x+delta+Delta)||,
  /// s = +1 untargeted, -1 targeted (where L is the target-class loss).
  Tensor gradient;
  double loss = 0.0;
  /// Monte-Carlo mean of neighborhood gradient norms.
  double surrogate = 0.0;
  std::size_t dropped_samples = 0;
};

/// Approximate gradient of the flatness-penalized objective. The Hessian term
/// of each neighborhood sample is replaced by approximate_hvp with step k.
template <Objective F>
TpaGradient tpa_gradient(const F& loss, std::span<const double> x, std::span<const double> delta, const AttackConfig& cfg,
                         std::uint64_t example = 0, std::size_t iteration = 0) {
  require_same_size(x, delta, "tpa_gradient");
  if (!(cfg.k > 0.0)) throw ArgumentError("tpa_gradient needs k > 0");
  if (cfg.n_samples < 1) throw ArgumentError("tpa_gradient needs n_samples >= 1");
  const double s = detail::direction_sign(cfg);
  const ValueGrad at = loss.value_and_gradient(detail::offset(x, delta));

  TpaGradient out;
  out.loss = at.value;
  std::vector<double> hvp_sum(x.size(), 0.0);
  double norm_sum = 0.0;
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const std::vector<double> point = detail::offset(x, delta, neighbor_offset(cfg, x.size(), example, iteration, i));
    const ValueGrad g = loss.value_and_gradient(point);
    const double n = norm2(g.gradient);
    norm_sum += n;
    if (cfg.lambda == 0.0) continue;
    const HvpEstimate h = approximate_hvp(loss, point, cfg.k, &g.gradient);
    if (h.dropped) {
      ++out.dropped_samples;
      continue;
    }
    for (std::size_t j = 0; j < hvp_sum.size(); ++j) hvp_sum[j] += h.hvp[j];
  }
  out.surrogate = norm_sum / static_cast<double>(cfg.n_samples);

  std::vector<double> grad(x.size());
  if (cfg.lambda == 0.0) {
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = -s * at.gradient[j];
  } else {
    const double w = cfg.lambda / static_cast<double>(cfg.n_samples);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = -s * at.gradient[j] + w * hvp_sum[j];
  }
  out.gradient = Tensor::vector(std::move(grad));
  return out;
}

/// tpa_gradient for a model at class y (or cfg's target class when targeted).
inline TpaGradient tpa_gradient(const Model& model, std::span<const double> x, std::span<const double> delta, std::size_t y,
                                const AttackConfig& cfg, std::uint64_t example = 0, std::size_t iteration = 0) {
  return tpa_gradient(ModelLoss(model, detail::attacked_class(cfg, y, model.n_classes())), x, delta, cfg, example,
                      iteration);
}

/// g_t = mu * g_{t-1} + grad / ||grad||_1 (a zero gradient adds nothing).
class MomentumAccumulator {
 public:
  MomentumAccumulator(std::size_t dim, double decay) : acc_(dim, 0.0), decay_(decay) {}

  const std::vector<double>& value() const noexcept { return acc_; }

  void update(std::span<const double> grad) {
    const double n1 = norm1(grad);
    for (std::size_t i = 0; i < acc_.size(); ++i) acc_[i] = decay_ * acc_[i] + (n1 > 0.0 ? grad[i] / n1 : 0.0);
  }

 private:
  std::vector<double> acc_;
  double decay_;
};

namespace detail {

struct Step {
  Tensor ascent;  // sign of this drives the update
  std::optional<double> surrogate;
};

// Shared driver: `direction(t, delta)` yields the ascent direction of the
// attack objective at iterate t.
template <class DirectionFn>
AttackResult run_sign_iterations(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                                 DirectionFn&& direction) {
  cfg.validate();
  if (x.size() != model.input_dim()) throw DimensionError("attack input does not match model input dim");
  AttackResult r;
  r.label = y;
  r.targeted = cfg.targeted;
  r.attacked_class = attacked_class(cfg, y, model.n_classes());
  const ModelLoss loss(model, r.attacked_class);
  const auto succeeded = [&](std::span<const double> adv) {
    const std::size_t p = predict(model, adv);
    return cfg.targeted ? p == r.attacked_class : p != y;
  };

  Tensor delta = Tensor::vector(std::vector<double>(x.size(), 0.0));
  if (succeeded(x)) r.first_success = 0;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    Step step = direction(t, delta);
    if (step.surrogate) r.surrogate_trace.push_back(*step.surrogate);
    delta = attack_step_sign(x, delta, step.ascent, cfg);
    const Tensor adv = clip_to_domain(offset(x, delta));
    if (cfg.check_invariants) {
      if (norm_inf(delta) > cfg.epsilon + 1e-12) {
        throw InvariantViolation("iteration " + std::to_string(t) + ": |delta|_inf exceeds epsilon");
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] + delta[i] < -1e-12 || x[i] + delta[i] > 1.0 + 1e-12 || adv[i] < 0.0 || adv[i] > 1.0) {
          throw InvariantViolation("iteration " + std::to_string(t) + ": iterate leaves [0,1]");
        }
      }
    }
    r.proxy_loss_trace.push_back(loss.value(adv));
    if (!r.first_success && succeeded(adv)) r.first_success = t + 1;
  }
  r.adv_input = clip_to_domain(offset(x, delta));
  r.delta = std::move(delta);
  r.success_on_proxy = succeeded(r.adv_input);
  return r;
}

inline Tensor signed_gradient(const ModelLoss& loss, std::span<const double> point, double s) {
  Tensor g = loss.value_and_gradient(point).gradient;
  if (s < 0) for (double& v : g) v = -v;
  return g;
}

inline ModelLoss attack_loss(const Model& model, std::size_t y, const AttackConfig& cfg) {
  return ModelLoss(model, attacked_class(cfg, y, model.n_classes()));
}

}  // namespace detail

/// Iterative sign-gradient ascent on the attacked-class loss.
inline AttackResult bim(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                        std::uint64_t /*example*/ = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  const double s = detail::direction_sign(cfg);
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t, const Tensor& delta) {
    return detail::Step{detail::signed_gradient(loss, detail::offset(x, delta), s), std::nullopt};
  });
}

/// Momentum iterative attack: the sign step follows an L1-normalized
/// gradient accumulator with decay momentum_decay.
inline AttackResult mi(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                       std::uint64_t /*example*/ = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  const double s = detail::direction_sign(cfg);
  MomentumAccumulator acc(x.size(), cfg.momentum_decay);
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t, const Tensor& delta) {
    acc.update(detail::signed_gradient(loss, detail::offset(x, delta), s));
    return detail::Step{Tensor::vector(acc.value()), std::nullopt};
  });
}

/// Nesterov variant of mi: the gradient is taken at the lookahead point
/// x + delta + step_size * mu * g_{t-1}.
inline AttackResult ni(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                       std::uint64_t /*example*/ = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  const double s = detail::direction_sign(cfg);
  MomentumAccumulator acc(x.size(), cfg.momentum_decay);
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t, const Tensor& delta) {
    const Tensor look = scaled(acc.value(), cfg.step_size * cfg.momentum_decay);
    acc.update(detail::signed_gradient(loss, detail::offset(x, delta, look), s));
    return detail::Step{Tensor::vector(acc.value()), std::nullopt};
  });
}

/// Variance-tuned attack: the step uses grad(x_t) + v_{t-1}, where
/// v = mean_j grad(x_t + r_j) - grad(x_t) over vt_samples uniform offsets
/// r_j in [-vt_beta * eps, vt_beta * eps]^d.
inline AttackResult vt(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                       std::uint64_t example = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  const double s = detail::direction_sign(cfg);
  std::vector<double> variance(x.size(), 0.0);
  const double radius = cfg.vt_beta * cfg.epsilon;
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t t, const Tensor& delta) {
    const Tensor g = detail::signed_gradient(loss, detail::offset(x, delta), s);
    std::vector<double> dir(x.size());
    for (std::size_t i = 0; i < dir.size(); ++i) dir[i] = g[i] + variance[i];
    if (cfg.vt_samples > 0) {
      std::vector<double> mean(x.size(), 0.0);
      for (std::size_t j = 0; j < cfg.vt_samples; ++j) {
        const auto r = detail::uniform_box(derive_seed(cfg.seed, "attack.vt", {example, t, j}), x.size(), radius);
        axpy(1.0, detail::signed_gradient(loss, detail::offset(x, delta, r), s), mean);
      }
      for (std::size_t i = 0; i < mean.size(); ++i) variance[i] = mean[i] / static_cast<double>(cfg.vt_samples) - g[i];
    }
    return detail::Step{Tensor::vector(std::move(dir)), std::nullopt};
  });
}

/// Reverse-adversarial-perturbation attack: before each outer step, run
/// rap_inner_steps of sign descent on the objective inside an L-inf ball of
/// radius rap_radius to find the least adversarial neighbor, then take the
/// outer gradient there.
inline AttackResult rap(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                        std::uint64_t /*example*/ = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  const double s = detail::direction_sign(cfg);
  const double r = cfg.rap_radius;
  const double inner_step = cfg.rap_inner_steps ? 2.0 * r / static_cast<double>(cfg.rap_inner_steps) : 0.0;
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t, const Tensor& delta) {
    std::vector<double> rho(x.size(), 0.0);
    for (std::size_t j = 0; j < cfg.rap_inner_steps; ++j) {
      const Tensor g = detail::signed_gradient(loss, detail::offset(x, delta, rho), s);
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::clamp(rho[i] - inner_step * sign(g[i]), -r, r);
    }
    return detail::Step{detail::signed_gradient(loss, detail::offset(x, delta, rho), s), std::nullopt};
  });
}

/// Flatness-penalized transferable attack: sign steps along -tpa_gradient,
/// with neighborhood samples drawn per (example, iteration, sample).
inline AttackResult tpa(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                        std::uint64_t example = 0) {
  const ModelLoss loss = detail::attack_loss(model, y, cfg);
  return detail::run_sign_iterations(model, x, y, cfg, [&](std::size_t t, const Tensor& delta) {
    TpaGradient g = tpa_gradient(loss, x, delta, cfg, example, t);
    for (double& v : g.gradient) v = -v;
    return detail::Step{std::move(g.gradient), g.surrogate};
  });
}

/// Dispatch on cfg.kind. `example` keys the random streams.
inline AttackResult run_attack(const Model& model, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                               std::uint64_t example = 0) {
  switch (cfg.kind) {
    case AttackKind::bim: return bim(model, x, y, cfg, example);
    case AttackKind::mi: return mi(model, x, y, cfg, example);
    case AttackKind::ni: return ni(model, x, y, cfg, example);
    case AttackKind::vt: return vt(model, x, y, cfg, example);
    case AttackKind::rap: return rap(model, x, y, cfg, example);
    case AttackKind::tpa: return tpa(model, x, y, cfg, example);
  }
  throw ConfigError("unhandled attack kind");
}

/// Copy of cfg in targeted mode: descend the loss of `target_class` instead of
/// ascending the true-label loss.
inline AttackConfig targeted_variant(AttackConfig cfg, std::size_t target_class) {
  cfg.targeted = true;
  cfg.target_class = target_class;
  return cfg;
}

/// Target used for example label y when the config leaves it open.
inline std::size_t default_target(std::size_t y, std::size_t n_classes) { return (y + 1) % n_classes; }

/// Attacks rows `indices` of `data`. The dataset index keys each example's
/// random streams, so output is independent of `threads`.
inline std::vector<AttackResult> attack_dataset(const Model& model, const Dataset& data, std::span<const std::size_t> indices,
                                                const AttackConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  if (cfg.targeted && cfg.target_class) detail::check_class(*cfg.target_class, model.n_classes());
  std::vector<AttackResult> out(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t j) {
    const std::size_t i = indices[j];
    const std::size_t y = data.labels[i];
    AttackConfig c = cfg;
    if (c.targeted) {
      c.target_class = c.target_class.value_or(default_target(y, model.n_classes()));
      if (*c.target_class == y) c.target_class = default_target(y, model.n_classes());
    }
    out[j] = run_attack(model, data.input(i), y, c, i);
  });
  return out;
}

struct ExampleOutcome {
  bool eligible = false;
  bool success = false;
  std::size_t target_prediction = 0;
};

struct TransferOutcome {
  std::size_t eligible = 0;
  std::size_t successes = 0;
  /// successes / eligible; 0 with `undefined` set when nothing is eligible.
  double asr = 0.0;
  bool undefined = true;
  std::vector<ExampleOutcome> examples;
};

/// Attack success rate on `target` over examples it classifies correctly
/// when clean. Untargeted success: any wrong prediction; targeted success:
/// prediction equals the attacked class.
inline TransferOutcome evaluate_transfer(const Model& target, const Dataset& clean, std::span<const std::size_t> indices,
                                         std::span<const AttackResult> results) {
  if (indices.size() != results.size()) throw ConsistencyError("one attack result per example required");
  TransferOutcome out;
  out.examples.resize(results.size());
  for (std::size_t j = 0; j < results.size(); ++j) {
    const std::size_t i = indices[j];
    const AttackResult& r = results[j];
    for (double v : r.adv_input)
      if (v < 0.0 || v > 1.0) throw ArgumentError("adversarial input outside [0,1]");
    ExampleOutcome& e = out.examples[j];
    e.eligible = predict(target, clean.input(i)) == clean.labels[i];
    e.target_prediction = predict(target, r.adv_input);
    e.success = r.targeted ? e.target_prediction == r.attacked_class : e.target_prediction != clean.labels[i];
    if (e.eligible) {
      ++out.eligible;
      if (e.success) ++out.successes;
    }
  }
  out.undefined = out.eligible == 0;
  out.asr = out.undefined ? 0.0 : static_cast<double>(out.successes) / static_cast<double>(out.eligible);
  return out;
}

}  // namespace tpa

#endif  // TPA_ATTACKS_HPP
