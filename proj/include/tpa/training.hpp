#ifndef TPA_TRAINING_HPP
#define TPA_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tpa/data.hpp"
#include "tpa/error.hpp"
#include "tpa/model.hpp"
#include "tpa/rng.hpp"

namespace tpa {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
    if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  }
};

struct Accuracy {
  double value = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  /// Set for an empty dataset, where value is reported as 0.
  bool undefined = false;
};

inline Accuracy evaluate_accuracy(const Model& model, const Dataset& data) {
  Accuracy acc;
  acc.total = data.size();
  if (acc.total == 0) {
    acc.undefined = true;
    return acc;
  }
  if (data.dim() != model.input_dim()) throw DimensionError("dataset dim does not match model input");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (predict(model, data.input(i)) == data.labels[i]) ++acc.correct;
  acc.value = static_cast<double>(acc.correct) / static_cast<double>(acc.total);
  return acc;
}

struct TrainReport {
  std::vector<double> epoch_losses;
  Accuracy train_accuracy;
  Accuracy eval_accuracy;
};

inline nlohmann::json to_json(const Accuracy& a) {
  return {{"value", a.value}, {"correct", a.correct}, {"total", a.total}, {"undefined", a.undefined}};
}

inline nlohmann::json to_json(const TrainReport& r) {
  return {{"epoch_losses", r.epoch_losses},
          {"train_accuracy", to_json(r.train_accuracy)},
          {"eval_accuracy", to_json(r.eval_accuracy)}};
}

struct TrainResult {
  Model model;
  TrainReport report;
};

/// Minibatch SGD with heavy-ball momentum on mean cross-entropy. Parameters
/// start from Model::initialize(spec, init_seed); batch order comes from
/// cfg.seed. `eval` only feeds the report.
inline TrainResult train(const std::vector<LayerSpec>& spec, std::uint64_t init_seed, const Dataset& data,
                         const TrainConfig& cfg, const Dataset* eval = nullptr) {
  cfg.validate();
  if (spec.empty() || spec.front().in_dim != data.dim()) {
    throw ArgumentError("architecture input dim does not match dataset dim " + std::to_string(data.dim()));
  }
  if (spec.back().out_dim < data.n_classes) throw ArgumentError("architecture has fewer outputs than classes");
  Model model = Model::initialize(spec, init_seed);
  auto& layers = model.mutable_layers();
  std::vector<std::vector<double>> velocity(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) velocity[li].assign(layers[li].params.size(), 0.0);

  TrainReport report;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "train.epoch", {epoch}));
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::vector<double>> grad(layers.size());
      for (std::size_t li = 0; li < layers.size(); ++li) grad[li].assign(layers[li].params.size(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const LossGrad lg = loss_and_grad(model, data.input(i), data.labels[i]);
        loss_sum += lg.value;
        for (std::size_t li = 0; li < layers.size(); ++li)
          for (std::size_t p = 0; p < grad[li].size(); ++p) grad[li][p] += lg.grad_params[li][p];
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t li = 0; li < layers.size(); ++li) {
        for (std::size_t p = 0; p < grad[li].size(); ++p) {
          velocity[li][p] = cfg.momentum * velocity[li][p] + grad[li][p] * scale;
          layers[li].params[p] -= cfg.learning_rate * velocity[li][p];
        }
      }
    }
    const double mean_loss = data.size() ? loss_sum / static_cast<double>(data.size()) : 0.0;
    if (!std::isfinite(mean_loss)) throw Error("training diverged at epoch " + std::to_string(epoch));
    report.epoch_losses.push_back(mean_loss);
  }
  report.train_accuracy = evaluate_accuracy(model, data);
  if (eval) report.eval_accuracy = evaluate_accuracy(model, *eval);
  else report.eval_accuracy.undefined = true;
  return {std::move(model), std::move(report)};
}

/// Input -> hidden -> [residual blocks] -> classes, with the chosen activation
/// after every hidden linear map. `depth` counts hidden linear layers.
inline std::vector<LayerSpec> mlp_spec(std::size_t input_dim, std::size_t hidden, std::size_t n_classes,
                                       std::size_t depth = 1, std::size_t residual_blocks = 0,
                                       Activation act = Activation::relu) {
  if (input_dim == 0 || hidden == 0 || n_classes == 0) throw ArgumentError("mlp dimensions must be positive");
  std::vector<LayerSpec> spec;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < depth; ++i) {
    spec.push_back(LayerSpec::linear(in, hidden));
    spec.push_back(act == Activation::relu ? LayerSpec::relu(hidden) : LayerSpec::softplus(hidden));
    in = hidden;
  }
  for (std::size_t i = 0; i < residual_blocks; ++i) spec.push_back(LayerSpec::residual(in, act));
  spec.push_back(LayerSpec::linear(in, n_classes));
  return spec;
}

}  // namespace tpa

#endif  // TPA_TRAINING_HPP
