#include <gtest/gtest.h>

#include <cmath>

#include "gradroute/error.hpp"
#include "gradroute/kernels.hpp"
#include "gradroute/probe.hpp"
#include "support/fixtures.hpp"

using namespace gradroute;
using gradroute::testing::toy_config;
using gradroute::testing::toy_trajectory;

namespace {

std::vector<MatrixEntry> sample_entries(const Matrix& w, std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<MatrixEntry> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({rng.below(w.rows), rng.below(w.cols)});
  return out;
}

}  // namespace

TEST(ForwardLoss, DeterministicAndPositive) {
  const ProbeModel m = init_model(toy_config(2));
  const Trajectory t = toy_trajectory(12, 5, 16, 32, 1);
  const double a = forward_loss(m, t);
  const double b = forward_loss(m, t);
  EXPECT_EQ(a, b);
  EXPECT_GT(a, 0.0);
  EXPECT_TRUE(std::isfinite(a));
}

TEST(ForwardLoss, PaddingLeavesLossBitIdentical) {
  const ProbeModel m = init_model(toy_config(2));
  const auto tokens = gradroute::testing::random_tokens(12, 32, 9);
  const Trajectory tight = prepare_trajectory(tokens, 5, 12);
  const Trajectory padded = prepare_trajectory(tokens, 5, 32);
  EXPECT_EQ(forward_loss(m, tight), forward_loss(m, padded));
}

TEST(ForwardLoss, ZeroUnembeddingGivesLogVocab) {
  ProbeModel m = init_model(toy_config(1));
  std::fill(m.unembedding().data.begin(), m.unembedding().data.end(), 0.0);
  std::vector<TokenId> tokens = {3, 9, 4, 4, 4, 4, 4};
  const Trajectory t = prepare_trajectory(tokens, 3, 10);
  EXPECT_NEAR(forward_loss(m, t), std::log(32.0), 1e-14);
}

TEST(ForwardLoss, RejectsOutOfVocabularyTokens) {
  const ProbeModel m = init_model(toy_config(1));
  std::vector<TokenId> tokens = {1, 2, 32, 3};
  const Trajectory t = prepare_trajectory(tokens, 1, 8);
  EXPECT_THROW(forward_loss(m, t), InputError);
}

TEST(ForwardLoss, RejectsTrajectoriesWithoutTargets) {
  const ProbeModel m = init_model(toy_config(1));
  // Only the first token is a response token; nothing predicts it.
  std::vector<TokenId> tokens = {1, 2, 3};
  const Trajectory t = prepare_trajectory(tokens, 0, 1);
  EXPECT_THROW(forward_loss(m, t), InputError);
}

TEST(ForwardLoss, RejectsSequencesLongerThanModelContext) {
  const ProbeModel m = init_model(toy_config(1));
  const Trajectory t = toy_trajectory(40, 4, 40, 32, 2);
  EXPECT_THROW(forward_loss(m, t), InputError);
}

TEST(ProbeGradients, LengthIsSevenPerLayer) {
  for (std::size_t layers : {1u, 2u, 3u}) {
    const ProbeModel m = init_model(toy_config(layers));
    const GradientVector g = probe_gradients(m, toy_trajectory(12, 4, 16, 32, 3));
    EXPECT_EQ(g.size(), 7 * layers);
    EXPECT_EQ(g.group_names, m.group_names());
    EXPECT_EQ(g.group_param_counts, m.group_param_counts());
    EXPECT_NO_THROW(g.validate());
    for (double n : g.norms) EXPECT_GT(n, 0.0);
  }
}

TEST(ProbeGradients, DeterministicAndNonInvasive) {
  const ProbeModel m = init_model(toy_config(2));
  const auto before = m.parameter_checksum();
  const Trajectory t = toy_trajectory(14, 6, 16, 32, 4);
  const GradientVector a = probe_gradients(m, t);
  const GradientVector b = probe_gradients(m, t);
  EXPECT_EQ(a, b);
  EXPECT_EQ(m.parameter_checksum(), before);
  EXPECT_EQ(a.loss_value, forward_loss(m, t));
}

TEST(ProbeGradients, PaddingLeavesNormsBitIdentical) {
  const ProbeModel m = init_model(toy_config(2));
  const auto tokens = gradroute::testing::random_tokens(10, 32, 5);
  const GradientVector tight = probe_gradients(m, prepare_trajectory(tokens, 3, 10));
  const GradientVector padded = probe_gradients(m, prepare_trajectory(tokens, 3, 32));
  EXPECT_EQ(tight.norms, padded.norms);
  EXPECT_EQ(tight.loss_value, padded.loss_value);
}

TEST(ProbeGradients, LossMultiplierScalesEveryNorm) {
  const ProbeModel m = init_model(toy_config(2));
  const Trajectory t = toy_trajectory(14, 5, 16, 32, 6);
  const GradientVector base = probe_gradients(m, t);
  for (double c : {0.5, 3.7, 1e-3, 1e3}) {
    const GradientVector scaled = detail::probe_gradients_scaled(m, t, c);
    for (std::size_t j = 0; j < base.size(); ++j) {
      EXPECT_NEAR(scaled.norms[j], c * base.norms[j], 1e-12 * c * base.norms[j]) << "c=" << c;
    }
  }
}

TEST(ProbeGradients, ParallelKernelsMatchSerialBitForBit) {
  const ProbeModel m = init_model(toy_config(2));
  const Trajectory t = toy_trajectory(20, 7, 24, 32, 8);
  EXPECT_EQ(probe_gradients(m, t, Exec::serial), probe_gradients(m, t, Exec::parallel));
}

TEST(ProbeGradients, NormsMatchFullGroupGradients) {
  const ProbeModel m = init_model(toy_config(1));
  const Trajectory t = toy_trajectory(12, 4, 16, 32, 10);
  const GradientVector g = probe_gradients(m, t);
  for (std::size_t j = 0; j < m.group_count(); ++j) {
    EXPECT_DOUBLE_EQ(kernels::frobenius_norm(group_gradient(m, t, j).span()), g.norms[j]);
  }
}

TEST(ProbeCorpus, PreservesInputOrderSeriallyAndInParallel) {
  const ProbeModel m = init_model(toy_config(1));
  std::vector<Trajectory> corpus;
  for (std::size_t i = 0; i < 6; ++i) {
    corpus.push_back(toy_trajectory(8 + i, 3, 16, 32, 100 + i, "t" + std::to_string(i)));
  }
  const auto serial = probe_corpus(m, corpus, Exec::serial);
  const auto parallel = probe_corpus(m, corpus, Exec::parallel);
  ASSERT_EQ(serial.size(), 6u);
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(serial[i].trajectory_id, "t" + std::to_string(i));
}

TEST(ProbeCorpus, PropagatesErrors) {
  const ProbeModel m = init_model(toy_config(1));
  std::vector<Trajectory> corpus = {toy_trajectory(8, 3, 16, 32, 1)};
  corpus.push_back(toy_trajectory(8, 3, 16, 32, 2));
  corpus.back().tokens[0] = 99;
  EXPECT_THROW(probe_corpus(m, corpus, Exec::parallel), InputError);
}

TEST(FiniteDifference, EveryProjectionKindWithinTolerance) {
  for (std::size_t layers : {1u, 2u}) {
    ProbeModel m = init_model(toy_config(layers, 11));
    const Trajectory t = toy_trajectory(12, 4, 16, 32, 12);
    const auto before = m.parameter_checksum();
    for (std::size_t g = 0; g < m.group_count(); ++g) {
      const auto entries = sample_entries(m.group(g), 8, 1000 + g);
      const auto r = finite_difference_check(m, t, g, entries, 1e-4);
      EXPECT_LE(r.max_relative_error, 1e-4) << m.group_name(g);
      EXPECT_FALSE(r.degenerate_step);
      EXPECT_EQ(r.analytic.size(), 8u);
    }
    EXPECT_EQ(m.parameter_checksum(), before);
  }
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  ProbeModel m = init_model(toy_config(1));
  const Trajectory t = toy_trajectory(8, 3, 16, 32, 1);
  const std::vector<MatrixEntry> e = {{0, 0}};
  EXPECT_THROW(finite_difference_check(m, t, 0, e, 0.0), InputError);
  EXPECT_THROW(finite_difference_check(m, t, 0, e, -1e-4), InputError);
}

TEST(FiniteDifference, RejectsOutOfRangeEntries) {
  ProbeModel m = init_model(toy_config(1));
  const Trajectory t = toy_trajectory(8, 3, 16, 32, 1);
  const std::vector<MatrixEntry> e = {{16, 0}};
  EXPECT_THROW(finite_difference_check(m, t, 0, e, 1e-4), InputError);
}

TEST(FiniteDifference, FlagsStepTooSmallToResolve) {
  ProbeModel m = init_model(toy_config(1));
  const Trajectory t = toy_trajectory(8, 3, 16, 32, 1);
  const auto entries = sample_entries(m.group(0), 4, 3);
  const auto r = finite_difference_check(m, t, 0, entries, 1e-300);
  EXPECT_TRUE(r.degenerate_step);
}
