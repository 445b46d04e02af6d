#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fedrd/debias.hpp"
#include "fedrd/error.hpp"
#include "test_support.hpp"

namespace fedrd {
namespace {

using test::random_batch;

TEST(ClassifierDistanceTest, EqualClassifiersGiveZeros) {
  const Tensor w = random_batch(6, 4, 1);
  EXPECT_EQ(classifier_distance(w, w), std::vector<double>(4, 0.0));
}

TEST(ClassifierDistanceTest, ColumnNorms) {
  const Tensor global({2, 2}, {3.0, 1.0, 4.0, 1.0});
  const Tensor local({2, 2}, {0.0, 1.0, 0.0, 1.0});
  EXPECT_EQ(classifier_distance(global, local), (std::vector<double>{5.0, 0.0}));
}

TEST(ClassifierDistanceTest, MatchesBruteForceBitwise) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Tensor a = random_batch(8, 5, 2 * s);
    const Tensor b = random_batch(8, 5, 2 * s + 1);
    EXPECT_EQ(classifier_distance(a, b), test::brute_force_column_distance(a, b));
  }
}

TEST(ClassifierDistanceTest, ShapeMismatchThrows) {
  EXPECT_THROW(classifier_distance(Tensor({2, 3}), Tensor({3, 2})), InvalidArgument);
}

Tensor permute_columns(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out = t;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(r, perm[c]);
  }
  return out;
}

TEST(ClassifierDistanceTest, PermutationEquivariantAndLambdaInvariant) {
  std::mt19937_64 rng(3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor a = random_batch(6, 5, 10 * s);
    const Tensor b = random_batch(6, 5, 10 * s + 1);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto base = classifier_distance(a, b);
    const auto permuted = classifier_distance(permute_columns(a, perm), permute_columns(b, perm));
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(permuted[c], base[perm[c]]);
    EXPECT_NEAR(lambda_from_distance(permuted), lambda_from_distance(base), 1e-15);
  }
}

TEST(ClassifierDistanceTest, DependsOnlyOnTheDifference) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tensor a = random_batch(4, 3, 5 * s);
    Tensor b = random_batch(4, 3, 5 * s + 1);
    const Tensor offset = random_batch(4, 3, 5 * s + 2, 0.1);
    const auto base = classifier_distance(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] += offset[i];
      b[i] += offset[i];
    }
    const auto shifted = classifier_distance(a, b);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(shifted[c], base[c], 1e-12);
  }
}

TEST(LambdaTest, MeanOfDistances) {
  EXPECT_EQ(lambda_from_distance(std::vector<double>{5.0, 0.0}), 2.5);
  EXPECT_EQ(lambda_from_distance(std::vector<double>(4, 0.0)), 0.0);
  EXPECT_EQ(lambda_from_distance(std::vector<double>(7, 1.25)), 1.25);
  EXPECT_THROW(lambda_from_distance(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(lambda_from_distance(std::vector<double>{-1.0}), InvalidArgument);
}

TEST(FewShotSetTest, BalancedDataHasNoFewShotClass) {
  const std::vector<std::size_t> counts{10, 10, 10};
  EXPECT_TRUE(few_shot_set(counts, 0.5).classes.empty());
}

TEST(FewShotSetTest, ThresholdIsFractionOfBalancedShare) {
  const std::vector<std::size_t> counts{1, 10, 19};
  EXPECT_EQ(few_shot_set(counts, 0.5).classes, (std::vector<std::size_t>{0}));
}

TEST(FewShotSetTest, ZeroCountsExcludedAndThresholdIsStrict) {
  const std::vector<std::size_t> counts{0, 5, 25};
  EXPECT_TRUE(few_shot_set(counts, 0.5).classes.empty());
}

TEST(FewShotSetTest, Errors) {
  EXPECT_THROW(few_shot_set(std::vector<std::size_t>{0, 0}, 0.5), InvalidArgument);
  EXPECT_THROW(few_shot_set(std::vector<std::size_t>{1, 2}, 0.0), InvalidArgument);
  EXPECT_THROW(few_shot_set(std::vector<std::size_t>{1, 2}, 1.5), InvalidArgument);
}

TEST(ClassWeightVectorTest, PiecewiseRule) {
  const FewShotSet m{{0}, 0.5};
  EXPECT_EQ(class_weight_vector(m, 1.5, 3), (std::vector<double>{2.5, 1.0, 1.0}));
  EXPECT_EQ(class_weight_vector(m, 0.0, 3), (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(class_weight_vector(FewShotSet{}, 7.0, 3), (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_THROW(class_weight_vector(FewShotSet{{3}, 0.5}, 1.0, 3), InvalidArgument);
  EXPECT_THROW(class_weight_vector(m, -0.1, 3), InvalidArgument);
}

TEST(DebiasLossTest, NeutralWeightsReproducePlainCrossEntropy) {
  const ModelParams p = test::random_model({3, {5}, 4, 0}, 1);
  const Tensor x = random_batch(9, 3, 2);
  const auto y = test::random_labels(9, 4, 3);
  const std::vector<double> plain(4, 1.0);
  const LossAndGrads reference = loss_and_grads(p, x, y, plain);
  for (const auto& alpha : {class_weight_vector(FewShotSet{{1, 2}, 0.5}, 0.0, 4), class_weight_vector(FewShotSet{}, 3.0, 4)}) {
    const LossAndGrads out = loss_and_grads(p, x, y, alpha);
    EXPECT_EQ(out.loss, reference.loss);
    EXPECT_EQ(out.grads, reference.grads);
  }
}

TEST(DebiasLossTest, FewShotSampleContributesOnePlusLambdaTimes) {
  const ModelParams p = test::random_model({3, {5}, 4, 0}, 4);
  const FewShotSet m{{2}, 0.5};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor x = random_batch(1, 3, 50 + s);
    const std::vector<std::size_t> y{2};
    const double lambda = 0.37 * static_cast<double>(s + 1);
    const double plain = loss_and_grads(p, x, y, std::vector<double>(4, 1.0)).loss;
    const double weighted = loss_and_grads(p, x, y, class_weight_vector(m, lambda, 4)).loss;
    EXPECT_NEAR(weighted, (1.0 + lambda) * plain, 1e-12);
  }
}

TEST(DebiasStateTest, FreshBroadcastHasZeroLambda) {
  const ModelParams g = test::random_model({2, {4}, 3, 0}, 8);
  const DebiasState state = debias_state(g, g, FewShotSet{{0}, 0.5});
  EXPECT_EQ(state.lambda, 0.0);
  EXPECT_EQ(state.alpha, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(DebiasStateTest, LambdaIsMeanOfDistanceVector) {
  const ModelParams g = test::random_model({2, {4}, 3, 0}, 8);
  const ModelParams l = test::random_model({2, {4}, 3, 0}, 9);
  const DebiasState state = debias_state(g, l, FewShotSet{{1}, 0.5});
  const auto d = test::brute_force_column_distance(g.classifier_weight(), l.classifier_weight());
  EXPECT_EQ(state.distance_vec, d);
  EXPECT_NEAR(state.lambda, (d[0] + d[1] + d[2]) / 3.0, 1e-15);
  EXPECT_EQ(state.alpha, (std::vector<double>{1.0, 1.0 + state.lambda, 1.0}));
}

}  // namespace
}  // namespace fedrd
