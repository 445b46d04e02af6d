#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedrd/aggregation.hpp"
#include "fedrd/data.hpp"
#include "fedrd/debias.hpp"
#include "fedrd/mlp.hpp"

namespace fedrd {

enum class Strategy {
  kFedAvg,
  kFedProx,
  kFedRD,
  kFedRDNoDC,   // generalization aggregation only, plain cross-entropy
  kFedRDNoGGA,  // debiased local loss only, sample-proportional aggregation
};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

// Local loss uses the lambda/alpha class reweighting.
constexpr bool uses_debias(Strategy s) { return s == Strategy::kFedRD || s == Strategy::kFedRDNoGGA; }
// Server mixes with gga_weights instead of fedavg_weights.
constexpr bool uses_gga(Strategy s) { return s == Strategy::kFedRD || s == Strategy::kFedRDNoDC; }
constexpr bool uses_prox(Strategy s) { return s == Strategy::kFedProx; }

struct FederationConfig {
  std::size_t num_clients = 6;
  std::size_t rounds = 40;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  Strategy strategy = Strategy::kFedRD;
  double tau = kDefaultFewShotTau;
  double mu = kDefaultProxMu;
  ModelSpec model;
  std::uint64_t seed = 0;
  int held_out_domain = 0;
  // Train clients of a round on separate threads. Results do not depend on it.
  bool parallel = true;

  // learning_rate may be 0 here (a no-op run); the config parser is stricter.
  void validate() const;
};

struct ClientState {
  ClientShard shard;
  FewShotSet few_shot;
  // Model after the most recent local training; diagnostic only.
  ModelParams model;

  std::size_t client_id() const { return shard.client_id; }
};

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

struct ClientRoundStats {
  std::size_t client_id = 0;
  double d = 0.0;
  double gap = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  double weight = 0.0;
  double lambda_last = 0.0;
  double local_loss = 0.0;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<ClientRoundStats> clients;
  double unseen_acc = 0.0;
  double unseen_loss = 0.0;
  double mean_participant_acc = 0.0;
};

struct FederationReport {
  std::vector<RoundMetrics> rounds;
  double initial_unseen_acc = 0.0;
  double final_unseen_acc = 0.0;
  double best_unseen_acc = 0.0;
  std::size_t best_round = 0;
  ModelParams final_model;
};

// Argmax accuracy (ties go to the lowest class index) and unweighted mean
// cross-entropy.
Evaluation evaluate(const ModelParams& model, const DomainDataset& dataset);

// Clients for the training domains: num_clients / |domains| clients per domain,
// each domain split by Dirichlet(partition_alpha) label skew. Ids are assigned
// consecutively in domain order.
std::vector<ClientState> build_clients(const FederationConfig& cfg, std::span<const DomainDataset> train_domains,
                                       double partition_alpha);

// One client's work in round `round`: measure the broadcast model, train E
// epochs from it, measure again, report d and gap.
ClientUpdate local_update(const ClientState& client, const ModelParams& global_model, const FederationConfig& cfg,
                          std::size_t round);

struct RoundResult {
  ModelParams global;
  RoundMetrics metrics;
};

// Broadcast, train every client, aggregate by strategy. `clients` must be
// sorted by client id; their diagnostic models are replaced.
RoundResult run_round(const ModelParams& global, std::vector<ClientState>& clients, const FederationConfig& cfg,
                      std::size_t round);

// Leave-one-domain-out federation over `domains`, evaluating the global model
// on the held-out domain after every round.
FederationReport run_federation(const FederationConfig& cfg, std::span<const DomainDataset> domains,
                                double partition_alpha);

}  // namespace fedrd
