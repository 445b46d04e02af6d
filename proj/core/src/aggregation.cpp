#include "fedrd/aggregation.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fedrd/error.hpp"

namespace fedrd {

double gap_value(double global_loss_on_local, double local_loss_on_local) {
  if (!std::isfinite(global_loss_on_local) || !std::isfinite(local_loss_on_local)) {
    throw NumericalError("gap_value: non-finite loss");
  }
  return global_loss_on_local - local_loss_on_local;
}

double gamma(double gap) {
  if (!std::isfinite(gap)) throw NumericalError("gamma: non-finite gap");
  return 1.0 / (std::exp(-gap) + 1.0);
}

AggregationPlan gga_weights(std::span<const double> d, std::span<const double> gammas) {
  const std::size_t n = d.size();
  if (n == 0) throw InvalidArgument("gga_weights: no clients");
  if (gammas.size() != n) throw InvalidArgument("gga_weights: d and gammas differ in length");
  for (double v : d) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("gga_weights: d entries must be finite and >= 0");
  }
  for (double g : gammas) {
    if (!(g > 0.0 && g < 1.0)) throw InvalidArgument("gga_weights: gamma entries must lie in (0, 1)");
  }

  AggregationPlan plan;
  plan.gammas.assign(gammas.begin(), gammas.end());
  const double d_sum = std::accumulate(d.begin(), d.end(), 0.0);
  if (d_sum > 0.0) {
    for (double v : d) plan.betas.push_back(v / d_sum);
  } else {
    plan.betas.assign(n, 1.0 / static_cast<double>(n));
  }
  if (n == 1) {
    plan.weights = {1.0};
    return plan;
  }

  const double gamma_sum = std::accumulate(gammas.begin(), gammas.end(), 0.0);
  const double others = static_cast<double>(n - 1);
  plan.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.weights[i] = 0.5 * ((1.0 - plan.betas[i]) / others + gammas[i] / gamma_sum);
  }
  return plan;
}

std::vector<double> fedavg_weights(std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw InvalidArgument("fedavg_weights: no clients");
  double total = 0.0;
  for (std::size_t k : sizes) {
    if (k == 0) throw InvalidArgument("fedavg_weights: client sizes must be positive");
    total += static_cast<double>(k);
  }
  std::vector<double> weights;
  weights.reserve(sizes.size());
  for (std::size_t k : sizes) weights.push_back(static_cast<double>(k) / total);
  return weights;
}

ModelParams aggregate(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw InvalidArgument("aggregate: no models");
  if (models.size() != weights.size()) throw InvalidArgument("aggregate: models and weights differ in length");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(std::abs(total - 1.0) <= 1e-6)) {
    throw InvalidArgument("aggregate: weights sum to " + std::to_string(total) + ", expected 1");
  }
  for (const ModelParams& m : models) require_same_structure(models.front(), m, "aggregate");

  ModelParams out = ModelParams::zeros(models.front().spec);
  for (std::size_t i = 0; i < models.size(); ++i) add_scaled(out, models[i], weights[i]);
  return out;
}

ProxPenalty prox_penalty(const ModelParams& w, const ModelParams& w_global, double mu) {
  require_same_structure(w, w_global, "prox_penalty");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("prox_penalty: mu must be finite and >= 0");
  ProxPenalty out{0.0, ModelParams::zeros(w.spec)};
  double squared = 0.0;
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    const auto accumulate_tensor = [&](const Tensor& a, const Tensor& b, Tensor& g) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        squared += diff * diff;
        g[i] = mu * diff;
      }
    };
    accumulate_tensor(w.layers[k].weight, w_global.layers[k].weight, out.grads.layers[k].weight);
    accumulate_tensor(w.layers[k].bias, w_global.layers[k].bias, out.grads.layers[k].bias);
  }
  out.loss = 0.5 * mu * squared;
  return out;
}

}  // namespace fedrd
