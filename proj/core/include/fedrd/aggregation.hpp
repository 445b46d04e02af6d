#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedrd/mlp.hpp"

namespace fedrd {

// What one client sends back to the server after local training.
struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParams model;
  std::size_t num_samples = 0;
  double d = 0.0;            // domain-layer distance to the broadcast model
  double gap = 0.0;          // global loss minus local loss on the client's data
  double lambda_last = 0.0;  // lambda of the final local epoch
  double global_loss = 0.0;  // unweighted mean loss of the broadcast model
  double local_loss = 0.0;   // unweighted mean loss of the trained local model
  // Per local epoch: lambda in effect and mean training objective.
  std::vector<double> epoch_lambdas;
  std::vector<double> epoch_losses;
};

// Mixing weights of one aggregation plus the terms they were built from.
struct AggregationPlan {
  std::vector<double> weights;
  std::vector<double> betas;
  std::vector<double> gammas;
};

inline constexpr double kDefaultProxMu = 0.01;

// Performance gap: mean loss of the global model minus mean loss of the local
// model, both on the same local data.
double gap_value(double global_loss_on_local, double local_loss_on_local);

// Logistic squashing of the gap, in (0, 1).
double gamma(double gap);

// Generalization-aware mixing weights:
//   beta_i   = d_i / sum(d)            (1/N when sum(d) == 0)
//   weight_i = ((1 - beta_i) / (N - 1) + gamma_i / sum(gamma)) / 2
// A single client gets weight 1.
AggregationPlan gga_weights(std::span<const double> d, std::span<const double> gammas);

// Sample-proportional weights K_i / sum(K).
std::vector<double> fedavg_weights(std::span<const std::size_t> sizes);

// Parameter-wise weighted sum of the models, evaluated in list order.
ModelParams aggregate(std::span<const ModelParams> models, std::span<const double> weights);

struct ProxPenalty {
  double loss = 0.0;
  ModelGrads grads;
};

// (mu / 2) * ||w - w_global||^2 and its gradient mu * (w - w_global).
ProxPenalty prox_penalty(const ModelParams& w, const ModelParams& w_global, double mu);

}  // namespace fedrd
