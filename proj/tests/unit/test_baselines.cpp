#include "helpers.hpp"

#include <ugss/baselines.hpp>
#include <ugss/ingestion.hpp>

#include <gtest/gtest.h>

using namespace ugss;
using namespace ugss::baseline;

namespace {

Dataset normalised(std::size_t n, std::uint64_t seed) {
  ingest::SyntheticSpec s;
  s.n_samples = n;
  s.steps = 8;
  s.dims = 3;
  s.seed = seed;
  s.class_balance = 0.3;
  Dataset d = apply_artificial_masking(ingest::generate_synthetic(s), 0.1, seed);
  return ingest::apply_preprocessor(d, ingest::fit_preprocessor(d));
}

}  // namespace

TEST(ZeroImpute, Examples) {
  Rng rng(1);
  const auto full = support::random_sample(rng, 4, 3, 1.0);
  EXPECT_EQ(zero_impute(full), full.x_tilde);
  const auto empty = make_sample(Matrix::Ones(4, 3), Matrix::Zero(4, 3), Vector::LinSpaced(4, 0, 3), 0);
  EXPECT_EQ(zero_impute(empty), Matrix::Zero(4, 3));
}

TEST(MeanImpute, FillsFittedMeans) {
  Matrix x(3, 2), m(3, 2);
  x << 1, 10, 3, 20, 5, 30;
  m << 1, 0, 0, 1, 1, 1;
  Dataset d;
  d.variable_names = {"a", "b"};
  d.samples = {make_sample(x, m, Vector::LinSpaced(3, 0, 2), 0)};
  const Vector means = observed_means(d);
  EXPECT_DOUBLE_EQ(means(0), 3.0);
  EXPECT_DOUBLE_EQ(means(1), 25.0);
  const Matrix out = mean_impute(d.samples[0], means);
  EXPECT_EQ(out(1, 0), 3.0);
  EXPECT_EQ(out(0, 1), 25.0);
  EXPECT_EQ(out(2, 1), 30.0);
}

TEST(MeanImpute, EqualsZeroImputeAfterNormalisation) {
  const Dataset d = normalised(100, 2);
  const Vector means = observed_means(d);
  EXPECT_LT(means.cwiseAbs().maxCoeff(), 1e-12);
  for (const auto& s : d.samples) EXPECT_LT((mean_impute(s, means) - zero_impute(s)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MeanImpute, PerVariableMaeMatchesDirectComputation) {
  Rng rng(3);
  Dataset d;
  d.variable_names = {"a", "b"};
  for (int i = 0; i < 10; ++i) d.samples.push_back(apply_artificial_masking(support::random_sample(rng, 5, 2, 0.9), 0.3, i));
  const Vector means = (Vector(2) << 0.25, -0.5).finished();
  for (Eigen::Index v = 0; v < 2; ++v) {
    double err = 0.0, n = 0.0, got = 0.0, gn = 0.0;
    for (const auto& s : d.samples) {
      const Matrix imp = mean_impute(s, means);
      for (Eigen::Index t = 0; t < s.steps(); ++t)
        if (s.imp_mask(t, v) == 1.0) {
          err += std::abs(s.x_truth(t, v) - means(v));
          n += 1.0;
          got += std::abs(s.x_truth(t, v) - imp(t, v));
          gn += 1.0;
        }
    }
    EXPECT_DOUBLE_EQ(got / gn, err / n);
  }
}

TEST(BaselineGru, PredictionsCarryImputedInputs) {
  const Dataset d = normalised(10, 4);
  ExperimentConfig c;
  c.hidden_dim = 6;
  const BaselineGru m(c, d.dims(), Method::mean, observed_means(d), 1);
  const auto p = predict(m, d, 4);
  ASSERT_EQ(p.probabilities.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GT(p.probabilities[i], 0.0);
    EXPECT_LT(p.probabilities[i], 1.0);
    EXPECT_EQ(p.x_hat[i], mean_impute(d.samples[i], m.means));
  }
}

TEST(BaselineGru, TrainingIsDeterministicAndLearns) {
  const Dataset d = normalised(80, 5);
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < d.size(); ++i) (i < 60 ? tr : va).push_back(i);
  ExperimentConfig c;
  c.hidden_dim = 8;
  c.epochs = 5;
  c.batch_size = 10;
  c.focal_w1 = 1.0;
  c.focal_w2 = 0.0;
  const auto a = baseline_gru_train(c, Method::zero, subset(d, tr), subset(d, va));
  const auto b = baseline_gru_train(c, Method::zero, subset(d, tr), subset(d, va));
  ASSERT_EQ(a.history.size(), 5u);
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].loss.total, b.history[e].loss.total);
  EXPECT_LT(a.history.back().loss.total, a.history.front().loss.total);
  const auto m = evaluate_baseline(a.model, subset(d, va));
  ASSERT_TRUE(m.mae.has_value());
  EXPECT_EQ(m.samples, va.size());
}

TEST(BaselineGru, MethodNames) {
  EXPECT_EQ(parse_method("zero"), Method::zero);
  EXPECT_EQ(to_string(Method::mean), "mean");
  EXPECT_THROW(parse_method("knn"), ValidationError);
}
