#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedrd/mlp.hpp"
#include "fedrd/tensor.hpp"

namespace fedrd {

// Under-represented classes of one client, the ones up-weighted in its loss.
struct FewShotSet {
  std::vector<std::size_t> classes;  // sorted ascending
  double threshold_tau = 0.5;

  bool contains(std::size_t c) const;
};

// Class reweighting in effect for one local epoch.
struct DebiasState {
  double lambda = 0.0;
  std::vector<double> alpha;
  std::vector<double> distance_vec;
};

inline constexpr double kDefaultFewShotTau = 0.5;

// Per-class Euclidean distance between two classifier weight matrices of
// shape [R, C]: entry m is the norm of column m of (global - local).
std::vector<double> classifier_distance(const Tensor& w_global, const Tensor& w_local);

// Arithmetic mean of the distance vector.
double lambda_from_distance(std::span<const double> distances);

// Classes c with 1 <= count[c] < tau * (total / C).
FewShotSet few_shot_set(std::span<const std::size_t> label_counts, double tau);

// 1 + lambda for few-shot classes, 1 elsewhere.
std::vector<double> class_weight_vector(const FewShotSet& few_shot, double lambda, std::size_t num_classes);

// Distance, lambda and alpha for the current local classifier against the
// broadcast global classifier.
DebiasState debias_state(const ModelParams& global, const ModelParams& local, const FewShotSet& few_shot);

}  // namespace fedrd
