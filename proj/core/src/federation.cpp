#include "fedrd/federation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <utility>

#include "fedrd/error.hpp"
#include "fedrd/random.hpp"

namespace fedrd {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 5> kStrategyNames = {{
    {Strategy::kFedAvg, "fedavg"},
    {Strategy::kFedProx, "fedprox"},
    {Strategy::kFedRD, "fedrd"},
    {Strategy::kFedRDNoDC, "fedrd_no_dc"},
    {Strategy::kFedRDNoGGA, "fedrd_no_gga"},
}};

}  // namespace

std::string_view to_string(Strategy s) {
  for (const auto& [value, name] : kStrategyNames) {
    if (value == s) return name;
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (const auto& [value, label] : kStrategyNames) {
    if (label == name) return value;
  }
  return std::nullopt;
}

void FederationConfig::validate() const {
  if (num_clients == 0) throw InvalidArgument("federation: num_clients must be at least 1");
  if (rounds == 0) throw InvalidArgument("federation: rounds must be at least 1");
  if (local_epochs == 0) throw InvalidArgument("federation: local_epochs must be at least 1");
  if (batch_size == 0) throw InvalidArgument("federation: batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("federation: learning_rate must be finite and >= 0");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("federation: tau must lie in (0, 1]");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("federation: mu must be finite and >= 0");
  model.validate();
}

Evaluation evaluate(const ModelParams& model, const DomainDataset& dataset) {
  if (dataset.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  dataset.validate();
  if (dataset.num_classes > model.spec.num_classes) throw InvalidArgument("evaluate: dataset has more classes than model");
  const Tensor probs = forward(model, dataset.features);
  const std::size_t classes = probs.cols();
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    const double* row = &probs.at(j, 0);
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (best == dataset.labels[j]) ++correct;
    loss += -std::log(std::max(row[dataset.labels[j]], kProbabilityFloor));
  }
  const double n = static_cast<double>(dataset.size());
  return {static_cast<double>(correct) / n, loss / n};
}

std::vector<ClientState> build_clients(const FederationConfig& cfg, std::span<const DomainDataset> train_domains,
                                       double partition_alpha) {
  if (train_domains.empty()) throw InvalidArgument("build_clients: no training domains");
  if (cfg.num_clients % train_domains.size() != 0) {
    throw InvalidArgument("build_clients: " + std::to_string(cfg.num_clients) + " clients cannot be split evenly over " +
                          std::to_string(train_domains.size()) + " training domains");
  }
  const std::size_t per_domain = cfg.num_clients / train_domains.size();
  std::vector<ClientState> clients;
  clients.reserve(cfg.num_clients);
  for (const DomainDataset& domain : train_domains) {
    domain.validate();
    const auto seed = derive_seed(cfg.seed, Stream::kPartition, {static_cast<std::uint64_t>(domain.domain_id)});
    for (auto& indices : dirichlet_partition(domain.labels, per_domain, partition_alpha, seed)) {
      ClientState client;
      client.shard = {clients.size(), domain.subset(indices)};
      client.shard.data.num_classes = cfg.model.num_classes;
      client.few_shot = few_shot_set(client.shard.data.label_counts(), cfg.tau);
      clients.push_back(std::move(client));
    }
  }
  return clients;
}

ClientUpdate local_update(const ClientState& client, const ModelParams& global_model, const FederationConfig& cfg,
                          std::size_t round) {
  const DomainDataset& data = client.shard.data;
  if (data.size() == 0) throw InvalidArgument("local_update: empty shard for client " + std::to_string(client.client_id()));
  if (global_model.spec != cfg.model) throw InvalidArgument("local_update: global model does not match config");

  ClientUpdate update;
  update.client_id = client.client_id();
  update.num_samples = data.size();
  update.global_loss = evaluate(global_model, data).mean_loss;

  ModelParams local = global_model;
  const std::vector<double> ones(cfg.model.num_classes, 1.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(cfg.seed, Stream::kClientShuffle, {update.client_id, round}));

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::vector<double> alpha = ones;
    double lambda = 0.0;
    if (uses_debias(cfg.strategy)) {
      DebiasState state = debias_state(global_model, local, client.few_shot);
      lambda = state.lambda;
      alpha = std::move(state.alpha);
    }
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const DomainDataset batch = data.subset(idx);

      LossAndGrads step;
      try {
        step = loss_and_grads(local, batch.features, batch.labels, alpha);
      } catch (const NumericalError& e) {
        throw NumericalError("client " + std::to_string(update.client_id) + " round " + std::to_string(round) +
                             " epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      // Mini-batch step on the mean of the summed objective.
      const double scale = 1.0 / static_cast<double>(idx.size());
      epoch_loss += step.loss;
      ModelGrads grads = ModelParams::zeros(cfg.model);
      add_scaled(grads, step.grads, scale);
      if (uses_prox(cfg.strategy)) {
        const ProxPenalty prox = prox_penalty(local, global_model, cfg.mu);
        epoch_loss += prox.loss * static_cast<double>(idx.size());
        add_scaled(grads, prox.grads, 1.0);
      }
      local = sgd_step(local, grads, cfg.learning_rate);
    }
    if (!local.all_finite()) {
      throw NumericalError("client " + std::to_string(update.client_id) + " round " + std::to_string(round) +
                           ": parameters diverged");
    }
    update.epoch_lambdas.push_back(lambda);
    update.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
    update.lambda_last = lambda;
  }

  update.local_loss = evaluate(local, data).mean_loss;
  update.gap = gap_value(update.global_loss, update.local_loss);
  update.d = frobenius_distance(local.domain_weight(), global_model.domain_weight());
  update.model = std::move(local);
  return update;
}

RoundResult run_round(const ModelParams& global, std::vector<ClientState>& clients, const FederationConfig& cfg,
                      std::size_t round) {
  if (round == 0) throw InvalidArgument("run_round: rounds are numbered from 1");
  if (clients.empty()) throw InvalidArgument("run_round: no clients");
  for (std::size_t i = 1; i < clients.size(); ++i) {
    if (clients[i - 1].client_id() >= clients[i].client_id()) throw InvalidArgument("run_round: clients must be sorted by id");
  }

  std::vector<ClientUpdate> updates;
  updates.reserve(clients.size());
  if (cfg.parallel && clients.size() > 1) {
    std::vector<std::future<ClientUpdate>> pending;
    pending.reserve(clients.size());
    for (const ClientState& client : clients) {
      pending.push_back(std::async(std::launch::async, [&client, &global, &cfg, round] {
        return local_update(client, global, cfg, round);
      }));
    }
    for (auto& f : pending) f.wait();
    for (auto& f : pending) updates.push_back(f.get());
  } else {
    for (const ClientState& client : clients) updates.push_back(local_update(client, global, cfg, round));
  }

  const std::size_t n = updates.size();
  std::vector<double> d(n), gammas(n);
  std::vector<std::size_t> sizes(n);
  std::vector<ModelParams> models;
  models.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = updates[i].d;
    gammas[i] = gamma(updates[i].gap);
    sizes[i] = updates[i].num_samples;
    models.push_back(updates[i].model);
  }
  const AggregationPlan plan = gga_weights(d, gammas);
  const std::vector<double> weights = uses_gga(cfg.strategy) ? plan.weights : fedavg_weights(sizes);

  RoundResult result{aggregate(models, weights), {}};
  result.metrics.round = round;
  double acc_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.metrics.clients.push_back({updates[i].client_id, d[i], updates[i].gap, gammas[i], plan.betas[i], weights[i],
                                      updates[i].lambda_last, updates[i].local_loss});
    acc_sum += evaluate(result.global, clients[i].shard.data).accuracy;
    clients[i].model = std::move(updates[i].model);
  }
  result.metrics.mean_participant_acc = acc_sum / static_cast<double>(n);
  return result;
}

FederationReport run_federation(const FederationConfig& cfg, std::span<const DomainDataset> domains,
                                double partition_alpha) {
  cfg.validate();
  for (const DomainDataset& domain : domains) {
    domain.validate();
    if (domain.feature_dim() != cfg.model.input_dim) {
      throw InvalidArgument("domain " + std::to_string(domain.domain_id) + " has feature width " +
                            std::to_string(domain.feature_dim()) + ", model expects " +
                            std::to_string(cfg.model.input_dim));
    }
    if (domain.num_classes > cfg.model.num_classes) {
      throw InvalidArgument("domain " + std::to_string(domain.domain_id) + " has more classes than the model");
    }
  }
  DomainSplit split = leave_one_out_split(domains, cfg.held_out_domain);
  split.test.num_classes = cfg.model.num_classes;
  std::vector<ClientState> clients = build_clients(cfg, split.train, partition_alpha);

  FederationReport report;
  ModelParams global = mlp_init(cfg.model, derive_seed(cfg.seed, Stream::kModelInit));
  for (ClientState& client : clients) client.model = global;
  report.initial_unseen_acc = evaluate(global, split.test).accuracy;

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundResult result = run_round(global, clients, cfg, t);
    global = std::move(result.global);
    const Evaluation unseen = evaluate(global, split.test);
    result.metrics.unseen_acc = unseen.accuracy;
    result.metrics.unseen_loss = unseen.mean_loss;
    if (t == 1 || unseen.accuracy > report.best_unseen_acc) {
      report.best_unseen_acc = unseen.accuracy;
      report.best_round = t;
    }
    report.rounds.push_back(std::move(result.metrics));
  }
  report.final_unseen_acc = report.rounds.back().unseen_acc;
  report.final_model = std::move(global);
  return report;
}

}  // namespace fedrd
