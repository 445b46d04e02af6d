#include "fedrd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fedrd/error.hpp"

namespace fedrd {

void ModelSpec::validate() const {
  if (input_dim == 0) throw InvalidArgument("model spec: input_dim must be positive");
  if (hidden_dims.empty()) throw InvalidArgument("model spec: at least one hidden layer is required");
  for (std::size_t width : hidden_dims) {
    if (width == 0) throw InvalidArgument("model spec: hidden layer widths must be positive");
  }
  if (num_classes < 2) throw InvalidArgument("model spec: num_classes must be at least 2");
  if (domain_layer_index >= hidden_dims.size()) {
    throw InvalidArgument("model spec: domain_layer_index " + std::to_string(domain_layer_index) +
                          " out of range for " + std::to_string(hidden_dims.size()) + " hidden layers");
  }
}

bool ModelParams::same_structure(const ModelParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!layers[k].weight.same_shape(other.layers[k].weight)) return false;
    if (!layers[k].bias.same_shape(other.layers[k].bias)) return false;
  }
  return true;
}

bool ModelParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
    return l.weight.all_finite() && l.bias.all_finite();
  });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ModelParams ModelParams::zeros(const ModelSpec& spec) {
  spec.validate();
  ModelParams params{spec, {}};
  std::size_t fan_in = spec.input_dim;
  for (std::size_t k = 0; k < spec.num_layers(); ++k) {
    const std::size_t fan_out = k < spec.hidden_dims.size() ? spec.hidden_dims[k] : spec.num_classes;
    params.layers.push_back({Tensor::matrix(fan_in, fan_out), Tensor({fan_out})});
    fan_in = fan_out;
  }
  return params;
}

void require_same_structure(const ModelParams& a, const ModelParams& b, const char* what) {
  if (!a.same_structure(b)) throw InvalidArgument(std::string(what) + ": model layouts differ");
}

ModelParams mlp_init(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams params = ModelParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (Layer& layer : params.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& w : layer.weight.data()) w = dist(rng);
  }
  return params;
}

namespace {

// out[B, fan_out] = in[B, fan_in] * weight + bias
Tensor affine(const Tensor& in, const Layer& layer) {
  const std::size_t batch = in.rows();
  const std::size_t fan_in = layer.weight.rows();
  const std::size_t fan_out = layer.weight.cols();
  Tensor out = Tensor::matrix(batch, fan_out);
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = &out.at(b, 0);
    for (std::size_t j = 0; j < fan_out; ++j) row[j] = layer.bias[j];
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double x = in.at(b, i);
      if (x == 0.0) continue;
      const double* w = &layer.weight.at(i, 0);
      for (std::size_t j = 0; j < fan_out; ++j) row[j] += x * w[j];
    }
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data()) v = v > 0.0 ? v : 0.0;
}

void softmax_rows_inplace(Tensor& logits) {
  const std::size_t cols = logits.cols();
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    double* row = &logits.at(b, 0);
    const double peak = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
  }
}

void check_batch(const ModelParams& params, const Tensor& batch) {
  if (batch.rank() != 2 || batch.cols() != params.spec.input_dim) {
    throw InvalidArgument("batch shape " + shape_string(batch.shape()) + " does not match input_dim " +
                          std::to_string(params.spec.input_dim));
  }
  // ReLU would silently map NaN to 0.
  require_finite(batch, "input batch");
  if (!params.all_finite()) throw NumericalError("model parameters: non-finite value");
}

// Post-activation outputs of every hidden layer, followed by the softmax output.
std::vector<Tensor> forward_trace(const ModelParams& params, const Tensor& batch) {
  check_batch(params, batch);
  std::vector<Tensor> trace;
  trace.reserve(params.layers.size());
  const Tensor* input = &batch;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    Tensor out = affine(*input, params.layers[k]);
    if (k + 1 < params.layers.size()) {
      relu_inplace(out);
    } else {
      require_finite(out, "forward logits");
      softmax_rows_inplace(out);
    }
    trace.push_back(std::move(out));
    input = &trace.back();
  }
  return trace;
}

}  // namespace

Tensor forward(const ModelParams& params, const Tensor& batch) {
  auto trace = forward_trace(params, batch);
  return std::move(trace.back());
}

LossAndGrads loss_and_grads(const ModelParams& params, const Tensor& batch,
                            std::span<const std::size_t> labels,
                            std::span<const double> class_weights) {
  check_batch(params, batch);
  const std::size_t batch_size = batch.rows();
  const std::size_t num_classes = params.spec.num_classes;
  if (labels.size() != batch_size) {
    throw InvalidArgument("loss_and_grads: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(batch_size));
  }
  if (class_weights.size() != num_classes) {
    throw InvalidArgument("loss_and_grads: class_weights has length " + std::to_string(class_weights.size()) +
                          ", expected " + std::to_string(num_classes));
  }
  for (double w : class_weights) {
    if (!(w >= 1.0) || !std::isfinite(w)) throw InvalidArgument("loss_and_grads: class weights must be finite and >= 1");
  }
  for (std::size_t y : labels) {
    if (y >= num_classes) {
      throw InvalidArgument("loss_and_grads: label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(num_classes) + ")");
    }
  }

  std::vector<Tensor> trace = forward_trace(params, batch);

  // Gradient of the loss w.r.t. the logits: w * (p - onehot), or zero where the
  // probability floor is active.
  double loss = 0.0;
  Tensor delta = std::move(trace.back());
  for (std::size_t b = 0; b < batch_size; ++b) {
    const double w = class_weights[labels[b]];
    double* row = &delta.at(b, 0);
    const double p = row[labels[b]];
    if (p >= kProbabilityFloor) {
      loss += w * -std::log(p);
      for (std::size_t j = 0; j < num_classes; ++j) row[j] *= w;
      row[labels[b]] -= w;
    } else {
      loss += w * -std::log(kProbabilityFloor);
      std::fill(row, row + num_classes, 0.0);
    }
  }

  ModelGrads grads = ModelParams::zeros(params.spec);
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const Tensor& input = k == 0 ? batch : trace[k - 1];
    const Layer& layer = params.layers[k];
    Layer& grad = grads.layers[k];
    const std::size_t fan_in = layer.weight.rows();
    const std::size_t fan_out = layer.weight.cols();
    for (std::size_t b = 0; b < batch_size; ++b) {
      const double* d = &delta.at(b, 0);
      for (std::size_t j = 0; j < fan_out; ++j) grad.bias[j] += d[j];
      for (std::size_t i = 0; i < fan_in; ++i) {
        const double x = input.at(b, i);
        if (x == 0.0) continue;
        double* g = &grad.weight.at(i, 0);
        for (std::size_t j = 0; j < fan_out; ++j) g[j] += x * d[j];
      }
    }
    if (k == 0) break;
    // Back through the weights, then the ReLU mask of the layer below.
    Tensor next = Tensor::matrix(batch_size, fan_in);
    for (std::size_t b = 0; b < batch_size; ++b) {
      const double* d = &delta.at(b, 0);
      for (std::size_t i = 0; i < fan_in; ++i) {
        if (input.at(b, i) <= 0.0) continue;
        const double* w = &layer.weight.at(i, 0);
        double acc = 0.0;
        for (std::size_t j = 0; j < fan_out; ++j) acc += w[j] * d[j];
        next.at(b, i) = acc;
      }
    }
    delta = std::move(next);
  }

  if (!std::isfinite(loss) || !grads.all_finite()) throw NumericalError("loss_and_grads: non-finite loss or gradient");
  return {loss, std::move(grads)};
}

ModelParams sgd_step(const ModelParams& params, const ModelGrads& grads, double lr) {
  require_same_structure(params, grads, "sgd_step");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("sgd_step: learning rate must be finite and >= 0");
  if (!grads.all_finite()) throw NumericalError("sgd_step: non-finite gradient");
  ModelParams out = params;
  if (lr == 0.0) return out;
  add_scaled(out, grads, -lr);
  return out;
}

void add_scaled(ModelParams& dst, const ModelParams& src, double scale) {
  require_same_structure(dst, src, "add_scaled");
  for (std::size_t k = 0; k < dst.layers.size(); ++k) {
    auto w = dst.layers[k].weight.data();
    auto gw = src.layers[k].weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * gw[i];
    auto b = dst.layers[k].bias.data();
    auto gb = src.layers[k].bias.data();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * gb[i];
  }
}

}  // namespace fedrd
