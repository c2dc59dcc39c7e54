#ifndef TPA_MODEL_HPP
#define TPA_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpa/error.hpp"
#include "tpa/rng.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

enum class LayerKind { linear, relu, softplus, residual_block };
enum class Activation { relu, softplus };

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::softplus: return "softplus";
    case LayerKind::residual_block: return "residual-block";
  }
  return "?";
}

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "softplus"; }

inline LayerKind parse_layer_kind(std::string_view s) {
  if (s == "linear") return LayerKind::linear;
  if (s == "relu") return LayerKind::relu;
  if (s == "softplus") return LayerKind::softplus;
  if (s == "residual-block") return LayerKind::residual_block;
  throw FormatError("unknown layer kind '" + std::string(s) + "'");
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "softplus") return Activation::softplus;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

/// Architecture of one layer, without parameters.
///
/// A residual block computes x + act(W2 * act(W1 x + b1) + b2) with square
/// W1, W2; `activation` selects act and is ignored by the other kinds.
struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;

  static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::linear, in, out, Activation::relu}; }
  static LayerSpec relu(std::size_t dim) { return {LayerKind::relu, dim, dim, Activation::relu}; }
  static LayerSpec softplus(std::size_t dim) { return {LayerKind::softplus, dim, dim, Activation::softplus}; }
  static LayerSpec residual(std::size_t dim, Activation act = Activation::relu) {
    return {LayerKind::residual_block, dim, dim, act};
  }

  /// Parameter count in checkpoint order: weights then bias (twice for a block).
  std::size_t parameter_count() const noexcept {
    switch (kind) {
      case LayerKind::linear: return out_dim * in_dim + out_dim;
      case LayerKind::residual_block: return 2 * (in_dim * in_dim + in_dim);
      default: return 0;
    }
  }

  bool operator==(const LayerSpec& o) const noexcept {
    return kind == o.kind && in_dim == o.in_dim && out_dim == o.out_dim &&
           (kind != LayerKind::residual_block || activation == o.activation);
  }
};

struct Layer {
  LayerSpec spec;
  std::vector<double> params;

  bool operator==(const Layer&) const = default;
};

/// Ordered stack of layers ending in class logits. Immutable once built, so
/// a shared Model can be evaluated from any number of threads.
class Model {
 public:
  Model() = default;

  explicit Model(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and
  /// biases, one seed-derived stream per layer.
  static Model initialize(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    std::vector<Layer> layers;
    layers.reserve(specs.size());
    for (std::size_t li = 0; li < specs.size(); ++li) {
      Layer layer{specs[li], std::vector<double>(specs[li].parameter_count())};
      Rng rng(derive_seed(seed, "init", {li}));
      const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(specs[li].in_dim, 1)));
      for (double& p : layer.params) p = rng.uniform(-bound, bound);
      layers.push_back(std::move(layer));
    }
    return Model(std::move(layers));
  }

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().spec.in_dim; }
  std::size_t n_classes() const noexcept { return layers_.empty() ? 0 : layers_.back().spec.out_dim; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& mutable_layers() noexcept { return layers_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.params.size();
    return n;
  }

  /// True when every nonlinearity is a ReLU (the piecewise-linear regime).
  bool is_piecewise_linear() const noexcept {
    for (const auto& l : layers_) {
      if (l.spec.kind == LayerKind::softplus) return false;
      if (l.spec.kind == LayerKind::residual_block && l.spec.activation == Activation::softplus) return false;
    }
    return true;
  }

  bool operator==(const Model&) const = default;

 private:
  void validate() const {
    if (layers_.empty()) throw ArgumentError("model needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& s = layers_[i].spec;
      if (s.in_dim == 0 || s.out_dim == 0) throw DimensionError("layer " + std::to_string(i) + " has a zero dimension");
      if (s.kind != LayerKind::linear && s.in_dim != s.out_dim) {
        throw DimensionError("layer " + std::to_string(i) + " (" + std::string(to_string(s.kind)) +
                             ") must preserve its dimension");
      }
      if (layers_[i].params.size() != s.parameter_count()) {
        throw DimensionError("layer " + std::to_string(i) + " has " + std::to_string(layers_[i].params.size()) +
                             " parameters, expected " + std::to_string(s.parameter_count()));
      }
      if (i > 0 && layers_[i - 1].spec.out_dim != s.in_dim) {
        throw DimensionError("layer " + std::to_string(i - 1) + " output " + std::to_string(layers_[i - 1].spec.out_dim) +
                             " does not feed layer " + std::to_string(i) + " input " + std::to_string(s.in_dim));
      }
    }
  }

  std::vector<Layer> layers_;
};

namespace detail {

inline double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double activate(Activation a, double z) noexcept { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : softplus(z); }

inline double activate_derivative(Activation a, double z) noexcept {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : sigmoid(z);
}

// out = W in + b, W row-major [out_dim x in_dim].
inline void affine(std::span<const double> w, std::span<const double> b, std::span<const double> in,
                   std::span<double> out) {
  const std::size_t n_in = in.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double s = b[r];
    const double* row = w.data() + r * n_in;
    for (std::size_t c = 0; c < n_in; ++c) s += row[c] * in[c];
    out[r] = s;
  }
}

// in_grad += W^T g
inline void affine_transpose_accumulate(std::span<const double> w, std::span<const double> g, std::span<double> in_grad) {
  const std::size_t n_in = in_grad.size();
  for (std::size_t r = 0; r < g.size(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = w.data() + r * n_in;
    for (std::size_t c = 0; c < n_in; ++c) in_grad[c] += row[c] * gr;
  }
}

// Per-layer intermediates kept for the backward pass.
struct LayerTrace {
  std::vector<double> input;
  std::vector<double> z1;  // residual block: W1 x + b1
  std::vector<double> z2;  // residual block: W2 act(z1) + b2
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  std::vector<double> logits;
};

inline ForwardTrace traced_forward(const Model& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(model.input_dim()));
  }
  ForwardTrace trace;
  trace.layers.resize(model.layers().size());
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    const Layer& layer = model.layers()[li];
    const LayerSpec& s = layer.spec;
    LayerTrace& lt = trace.layers[li];
    std::span<const double> p(layer.params);
    std::vector<double> next(s.out_dim);
    switch (s.kind) {
      case LayerKind::linear:
        affine(p.subspan(0, s.out_dim * s.in_dim), p.subspan(s.out_dim * s.in_dim, s.out_dim), cur, next);
        break;
      case LayerKind::relu:
        for (std::size_t i = 0; i < cur.size(); ++i) next[i] = cur[i] > 0.0 ? cur[i] : 0.0;
        break;
      case LayerKind::softplus:
        for (std::size_t i = 0; i < cur.size(); ++i) next[i] = softplus(cur[i]);
        break;
      case LayerKind::residual_block: {
        const std::size_t d = s.in_dim;
        const std::size_t block = d * d + d;
        lt.z1.resize(d);
        lt.z2.resize(d);
        affine(p.subspan(0, d * d), p.subspan(d * d, d), cur, lt.z1);
        std::vector<double> a1(d);
        for (std::size_t i = 0; i < d; ++i) a1[i] = activate(s.activation, lt.z1[i]);
        affine(p.subspan(block, d * d), p.subspan(block + d * d, d), a1, lt.z2);
        for (std::size_t i = 0; i < d; ++i) next[i] = cur[i] + activate(s.activation, lt.z2[i]);
        break;
      }
    }
    lt.input = std::move(cur);
    cur = std::move(next);
  }
  trace.logits = std::move(cur);
  return trace;
}

// dlogits: gradient w.r.t. logits. Returns the input gradient; fills
// param_grads (one flat vector per layer) when non-null.
inline std::vector<double> backward(const Model& model, const ForwardTrace& trace, std::vector<double> g,
                                    std::vector<std::vector<double>>* param_grads) {
  const auto& layers = model.layers();
  if (param_grads) {
    param_grads->assign(layers.size(), {});
    for (std::size_t li = 0; li < layers.size(); ++li) (*param_grads)[li].assign(layers[li].params.size(), 0.0);
  }
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const LayerSpec& s = layer.spec;
    const LayerTrace& lt = trace.layers[li];
    std::span<const double> p(layer.params);
    std::vector<double> gin(s.in_dim, 0.0);
    switch (s.kind) {
      case LayerKind::linear: {
        const std::size_t nw = s.out_dim * s.in_dim;
        if (param_grads) {
          auto& pg = (*param_grads)[li];
          for (std::size_t r = 0; r < s.out_dim; ++r) {
            for (std::size_t c = 0; c < s.in_dim; ++c) pg[r * s.in_dim + c] = g[r] * lt.input[c];
            pg[nw + r] = g[r];
          }
        }
        affine_transpose_accumulate(p.subspan(0, nw), g, gin);
        break;
      }
      case LayerKind::relu:
        for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = lt.input[i] > 0.0 ? g[i] : 0.0;
        break;
      case LayerKind::softplus:
        for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = g[i] * sigmoid(lt.input[i]);
        break;
      case LayerKind::residual_block: {
        const std::size_t d = s.in_dim;
        const std::size_t block = d * d + d;
        std::vector<double> a1(d), gz2(d), gz1(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
          a1[i] = activate(s.activation, lt.z1[i]);
          gz2[i] = g[i] * activate_derivative(s.activation, lt.z2[i]);
        }
        affine_transpose_accumulate(p.subspan(block, d * d), gz2, gz1);
        for (std::size_t i = 0; i < d; ++i) gz1[i] *= activate_derivative(s.activation, lt.z1[i]);
        if (param_grads) {
          auto& pg = (*param_grads)[li];
          for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              pg[r * d + c] = gz1[r] * lt.input[c];
              pg[block + r * d + c] = gz2[r] * a1[c];
            }
            pg[d * d + r] = gz1[r];
            pg[block + d * d + r] = gz2[r];
          }
        }
        for (std::size_t i = 0; i < d; ++i) gin[i] = g[i];
        affine_transpose_accumulate(p.subspan(0, d * d), gz1, gin);
        break;
      }
    }
    g = std::move(gin);
  }
  return g;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

inline void check_class(std::size_t y, std::size_t n_classes) {
  if (y >= n_classes) {
    throw IndexError("class index " + std::to_string(y) + " out of range for " + std::to_string(n_classes) + " classes");
  }
}

}  // namespace detail

/// Logits of `model` at `x`; softmax of these defines the class probabilities.
inline Tensor forward(const Model& model, std::span<const double> x) {
  return Tensor::vector(std::move(detail::traced_forward(model, x).logits));
}

/// Numerically stable cross-entropy -log softmax(logits)[y].
inline double loss_ce(std::span<const double> logits, std::size_t y) {
  detail::check_class(y, logits.size());
  return -detail::log_softmax(logits)[y];
}

/// log softmax(forward(model, x))[y]; exactly -loss_ce on the same logits.
inline double log_prob_of_class(const Model& model, std::span<const double> x, std::size_t y) {
  return -loss_ce(forward(model, x), y);
}

inline std::size_t predict(const Model& model, std::span<const double> x) {
  const Tensor logits = forward(model, x);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

struct LossGrad {
  double value = 0.0;
  Tensor grad_input;
  /// One flat vector per layer, same order as Layer::params. Empty when only
  /// the input gradient was requested.
  std::vector<std::vector<double>> grad_params;
};

namespace detail {

inline LossGrad loss_and_grad_impl(const Model& model, std::span<const double> x, std::size_t y, bool with_params) {
  ForwardTrace trace = traced_forward(model, x);
  check_class(y, trace.logits.size());
  const std::vector<double> lsm = log_softmax(trace.logits);
  std::vector<double> dlogits(lsm.size());
  for (std::size_t i = 0; i < lsm.size(); ++i) dlogits[i] = std::exp(lsm[i]);
  dlogits[y] -= 1.0;
  LossGrad out;
  out.value = -lsm[y];
  out.grad_input = Tensor::vector(backward(model, trace, std::move(dlogits), with_params ? &out.grad_params : nullptr));
  return out;
}

}  // namespace detail

/// Cross-entropy at (x, y) with exact reverse-mode gradients for the input
/// and every parameter.
inline LossGrad loss_and_grad(const Model& model, std::span<const double> x, std::size_t y) {
  return detail::loss_and_grad_impl(model, x, y, true);
}

/// As loss_and_grad, skipping parameter gradients.
inline LossGrad loss_and_input_grad(const Model& model, std::span<const double> x, std::size_t y) {
  return detail::loss_and_grad_impl(model, x, y, false);
}

/// Sign pattern of every ReLU pre-activation, in layer order. Two inputs with
/// equal patterns lie in the same linear region of a piecewise-linear model.
inline std::vector<bool> relu_pattern(const Model& model, std::span<const double> x) {
  const detail::ForwardTrace trace = detail::traced_forward(model, x);
  std::vector<bool> pattern;
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    const LayerSpec& s = model.layers()[li].spec;
    const auto& lt = trace.layers[li];
    if (s.kind == LayerKind::relu) {
      for (double v : lt.input) pattern.push_back(v > 0.0);
    } else if (s.kind == LayerKind::residual_block && s.activation == Activation::relu) {
      for (double v : lt.z1) pattern.push_back(v > 0.0);
      for (double v : lt.z2) pattern.push_back(v > 0.0);
    }
  }
  return pattern;
}

}  // namespace tpa

#endif  // TPA_MODEL_HPP
