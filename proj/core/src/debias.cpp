#include "fedrd/debias.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedrd/error.hpp"

namespace fedrd {

bool FewShotSet::contains(std::size_t c) const {
  return std::binary_search(classes.begin(), classes.end(), c);
}

std::vector<double> classifier_distance(const Tensor& w_global, const Tensor& w_local) {
  require_same_shape(w_global, w_local, "classifier_distance");
  if (w_global.rank() != 2) throw InvalidArgument("classifier_distance: expected [R, C] weight matrices");
  const std::size_t rows = w_global.rows();
  const std::size_t cols = w_global.cols();
  std::vector<double> sums(cols, 0.0);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t m = 0; m < cols; ++m) {
      const double diff = w_global.at(n, m) - w_local.at(n, m);
      sums[m] += diff * diff;
    }
  }
  for (double& s : sums) s = std::sqrt(s);
  return sums;
}

double lambda_from_distance(std::span<const double> distances) {
  if (distances.empty()) throw InvalidArgument("lambda_from_distance: empty distance vector");
  for (double v : distances) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("lambda_from_distance: entries must be finite and >= 0");
  }
  return std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(distances.size());
}

FewShotSet few_shot_set(std::span<const std::size_t> label_counts, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("few_shot_set: tau must lie in (0, 1]");
  if (label_counts.empty()) throw InvalidArgument("few_shot_set: no classes");
  const std::size_t total = std::accumulate(label_counts.begin(), label_counts.end(), std::size_t{0});
  if (total == 0) throw InvalidArgument("few_shot_set: all label counts are zero");
  const double threshold = tau * static_cast<double>(total) / static_cast<double>(label_counts.size());
  FewShotSet out{{}, tau};
  for (std::size_t c = 0; c < label_counts.size(); ++c) {
    if (label_counts[c] >= 1 && static_cast<double>(label_counts[c]) < threshold) out.classes.push_back(c);
  }
  return out;
}

std::vector<double> class_weight_vector(const FewShotSet& few_shot, double lambda, std::size_t num_classes) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("class_weight_vector: lambda must be finite and >= 0");
  std::vector<double> alpha(num_classes, 1.0);
  for (std::size_t c : few_shot.classes) {
    if (c >= num_classes) {
      throw InvalidArgument("class_weight_vector: class " + std::to_string(c) + " out of range [0, " +
                            std::to_string(num_classes) + ")");
    }
    alpha[c] = 1.0 + lambda;
  }
  return alpha;
}

DebiasState debias_state(const ModelParams& global, const ModelParams& local, const FewShotSet& few_shot) {
  DebiasState state;
  state.distance_vec = classifier_distance(global.classifier_weight(), local.classifier_weight());
  state.lambda = lambda_from_distance(state.distance_vec);
  state.alpha = class_weight_vector(few_shot, state.lambda, local.spec.num_classes);
  return state;
}

}  // namespace fedrd
