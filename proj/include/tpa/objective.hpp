#ifndef TPA_OBJECTIVE_HPP
#define TPA_OBJECTIVE_HPP

#include <concepts>
#include <cstddef>
#include <span>

#include "tpa/error.hpp"
#include "tpa/model.hpp"
#include "tpa/tensor.hpp"

namespace tpa {

struct ValueGrad {
  double value = 0.0;
  Tensor gradient;
};

/// A scalar function of the input with its gradient. Models and closed-form
/// stubs (affine, quadratic) both satisfy it, so attack gradients and the
/// finite-difference oracles run unchanged on either.
template <class F>
concept Objective = requires(const F& f, std::span<const double> x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.value_and_gradient(x) } -> std::convertible_to<ValueGrad>;
};

/// Cross-entropy of a model at a fixed class.
struct ModelLoss {
  const Model* model = nullptr;
  std::size_t label = 0;

  ModelLoss(const Model& m, std::size_t y) : model(&m), label(y) { detail::check_class(y, m.n_classes()); }

  double value(std::span<const double> x) const { return loss_ce(forward(*model, x), label); }

  ValueGrad value_and_gradient(std::span<const double> x) const {
    LossGrad lg = loss_and_input_grad(*model, x, label);
    return {lg.value, std::move(lg.grad_input)};
  }
};

/// log F(x)[y] = -ModelLoss.
struct ModelLogProb {
  const Model* model = nullptr;
  std::size_t label = 0;

  ModelLogProb(const Model& m, std::size_t y) : model(&m), label(y) { detail::check_class(y, m.n_classes()); }

  double value(std::span<const double> x) const { return log_prob_of_class(*model, x, label); }

  ValueGrad value_and_gradient(std::span<const double> x) const {
    LossGrad lg = loss_and_input_grad(*model, x, label);
    for (double& g : lg.grad_input) g = -g;
    return {-lg.value, std::move(lg.grad_input)};
  }
};

/// f(x) = a.x + c
struct AffineLoss {
  Tensor a;
  double c = 0.0;

  double value(std::span<const double> x) const { return dot(a, x) + c; }
  ValueGrad value_and_gradient(std::span<const double> x) const { return {value(x), a}; }
};

/// f(x) = 1/2 x^T A x with symmetric A stored row-major as [d, d].
struct QuadraticLoss {
  Tensor matrix;

  std::size_t dim() const { return matrix.shape().at(0); }

  Tensor apply(std::span<const double> v) const {
    const std::size_t d = dim();
    std::vector<double> out(d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) out[r] += matrix[r * d + c] * v[c];
    return Tensor::vector(std::move(out));
  }

  double value(std::span<const double> x) const { return 0.5 * dot(x, apply(x)); }

  ValueGrad value_and_gradient(std::span<const double> x) const {
    Tensor g = apply(x);
    const double v = 0.5 * dot(x, g);
    return {v, std::move(g)};
  }
};

}  // namespace tpa

#endif  // TPA_OBJECTIVE_HPP
