#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedrd/tensor.hpp"

namespace fedrd {

// Architecture of a fully connected ReLU classifier.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 0;
  // Hidden layer whose weights measure domain discrepancy between models.
  std::size_t domain_layer_index = 0;

  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;

  std::size_t num_layers() const { return hidden_dims.size() + 1; }
  // Width of the representation fed to the classifier layer.
  std::size_t feature_dim() const { return hidden_dims.back(); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Layer {
  Tensor weight;  // [fan_in, fan_out]
  Tensor bias;    // [fan_out]

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Parameters of an MLP. Also used as the gradient container, since gradients
// share the exact tensor layout.
struct ModelParams {
  ModelSpec spec;
  std::vector<Layer> layers;

  // Last layer weights, shape [feature_dim, num_classes].
  const Tensor& classifier_weight() const { return layers.back().weight; }
  const Tensor& domain_weight() const { return layers[spec.domain_layer_index].weight; }

  bool same_structure(const ModelParams& other) const;
  bool all_finite() const;
  std::size_t parameter_count() const;

  // Zero-filled parameters with the layout implied by `spec`.
  static ModelParams zeros(const ModelSpec& spec);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using ModelGrads = ModelParams;

// Throws InvalidArgument unless `a` and `b` have identical layer shapes.
void require_same_structure(const ModelParams& a, const ModelParams& b, const char* what);

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
ModelParams mlp_init(const ModelSpec& spec, std::uint64_t seed);

// Row-wise softmax probabilities for a [B, input_dim] batch.
Tensor forward(const ModelParams& params, const Tensor& batch);

// Smallest probability fed to the log inside the cross-entropy.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};

// Class-weighted cross-entropy summed over the batch:
//   loss = sum_j class_weights[y_j] * -log(max(p_j[y_j], 1e-12))
// together with its exact gradient.
LossAndGrads loss_and_grads(const ModelParams& params, const Tensor& batch,
                            std::span<const std::size_t> labels,
                            std::span<const double> class_weights);

// p <- p - lr * g for every parameter.
ModelParams sgd_step(const ModelParams& params, const ModelGrads& grads, double lr);

// Accumulates `scale * src` into `dst` parameter-wise.
void add_scaled(ModelParams& dst, const ModelParams& src, double scale);

}  // namespace fedrd
