#include "helpers.hpp"

#include <ugss/losses.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace ugss;
using namespace ugss::train;
using ad::Matrix;

namespace {

vrnn::GaussianParams gaussian(Tape& t, const Matrix& mean, const Matrix& log_var) {
  return {t.constant(mean), t.constant(log_var)};
}

double bce(double p, int y) { return -(y * std::log(p) + (1 - y) * std::log(1.0 - p)); }

}  // namespace

TEST(VrnnLoss, PerfectUnitReconstructionWithMatchedPrior) {
  Tape t(false);
  const Matrix x = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const Matrix m = (Matrix(2, 3) << 1, 1, 0, 1, 0, 0).finished();
  const auto q = gaussian(t, Matrix::Ones(2, 2), Matrix::Zero(2, 2));
  VrnnStepTerms s{q, q, gaussian(t, x, Matrix::Zero(2, 3)), {}, t.constant(x), t.constant(m),
                  t.constant(Matrix::Ones(2, 1))};
  const std::vector<VrnnStepTerms> steps{s, s};
  EXPECT_NEAR(vrnn_loss(steps).value()(0, 0), 2 * 3 * 0.5 * std::log(2 * std::numbers::pi), 1e-12);
}

TEST(VrnnLoss, MaskedStepContributesOnlyKl) {
  Tape t(false);
  const Matrix x = Matrix::Constant(1, 2, 3.0);
  const auto q = gaussian(t, Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  const auto p = gaussian(t, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  VrnnStepTerms s{q, p, gaussian(t, Matrix::Zero(1, 2), Matrix::Zero(1, 2)), {}, t.constant(x),
                  t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Ones(1, 1))};
  const std::vector<VrnnStepTerms> steps{s};
  EXPECT_DOUBLE_EQ(vrnn_loss(steps).value()(0, 0), 0.5);
  std::vector<VrnnStepTerms> padded{s};
  padded[0].valid = t.constant(Matrix::Zero(1, 1));
  EXPECT_EQ(vrnn_loss(padded).value()(0, 0), 0.0);
}

TEST(Consistency, Examples) {
  Tape t(false);
  Rng rng(1);
  const Matrix a = rng.normal_matrix(3, 4);
  const std::vector<Var> sa{t.constant(a), t.constant(a)};
  const std::vector<Var> sb{t.constant(a.array() + 0.5), t.constant(a.array() - 0.5)};
  const std::vector<Var> valid{t.constant(Matrix::Ones(3, 1)), t.constant(Matrix::Ones(3, 1))};
  EXPECT_EQ(consistency_loss(sa, sa, valid).value()(0, 0), 0.0);
  EXPECT_NEAR(consistency_loss(sa, sb, valid).value()(0, 0), 0.5, 1e-15);
  const std::vector<Var> partial{t.constant(Matrix::Ones(3, 1)), t.constant((Matrix(3, 1) << 1, 0, 0).finished())};
  const std::vector<Var> sc{t.constant(a.array() + 0.5), t.constant(a.array() + 10.0)};
  EXPECT_NEAR(consistency_loss(sa, sc, partial).value()(0, 0), (12 * 0.5 + 4 * 10.0) / 16.0, 1e-12);
}

TEST(ImputationLoss, Examples) {
  Tape t(false);
  const Matrix x = (Matrix(2, 2) << 1, 2, 3, 4).finished();
  const Matrix m = (Matrix(2, 2) << 1, 0, 1, 1).finished();
  const std::vector<Var> truth{t.constant(x.cwiseProduct(m))}, mask{t.constant(m)};
  const std::vector<Var> perfect{t.constant(x)}, shifted{t.constant(x.array() + 1.0)};
  EXPECT_EQ(imputation_loss(truth, perfect, mask, true).value()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(imputation_loss(truth, shifted, mask, true).value()(0, 0), 1.0);
  // Unnormalised: row sums 1 and 2, averaged over two samples.
  EXPECT_DOUBLE_EQ(imputation_loss(truth, shifted, mask, false).value()(0, 0), 1.5);
  const Matrix m2 = (Matrix(2, 2) << 1, 1, 0, 0).finished();
  const std::vector<Var> truth2{t.constant(x.cwiseProduct(m2))}, mask2{t.constant(m2)};
  EXPECT_DOUBLE_EQ(imputation_loss(truth2, shifted, mask2, true).value()(0, 0), 0.5);
  const std::vector<Var> none{t.constant(Matrix::Zero(2, 2))};
  EXPECT_EQ(imputation_loss(none, shifted, none, true).value()(0, 0), 0.0);
}

TEST(Focal, Examples) {
  EXPECT_NEAR(focal_loss(0.5, 1, 1.0, 0.0), std::numbers::ln2, 1e-15);
  EXPECT_LT(focal_loss(0.999999, 1, 0.25, 5.0), 1e-20);
  EXPECT_LT(focal_loss(0.9, 1, 0.25, 5.0), focal_loss(0.6, 1, 0.25, 5.0));
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, 1, 1.0, 0.0)));
  EXPECT_NEAR(focal_loss(0.0, 1, 1.0, 0.0), -std::log(kProbabilityEpsilon), 1e-9);
}

TEST(Focal, ReducesToCrossEntropy) {
  Rng rng(2);
  Matrix p(1000, 1), y(1000, 1);
  for (int i = 0; i < 1000; ++i) {
    p(i, 0) = rng.uniform(1e-3, 1.0 - 1e-3);
    y(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const int label = static_cast<int>(y(i, 0));
    ASSERT_NEAR(focal_loss(p(i, 0), label, 1.0, 0.0), bce(p(i, 0), label), 1e-12);
    Tape t(false);
    ASSERT_NEAR(focal_loss(t.constant(p.row(i)), t.constant(y.row(i)), 1.0, 0.0).value()(0, 0),
                bce(p(i, 0), label), 1e-12);
  }
  Tape t(false);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i) total += bce(p(i, 0), static_cast<int>(y(i, 0)));
  EXPECT_NEAR(focal_loss(t.constant(p), t.constant(y), 1.0, 0.0).value()(0, 0), total, 1e-9);
}

TEST(Focal, NodeGradientMatchesFiniteDifferences) {
  Rng rng(3);
  ad::Parameter logits("logits", rng.normal_matrix(6, 1));
  const Matrix y = (Matrix(6, 1) << 1, 0, 1, 0, 0, 1).finished();
  auto run = [&](Tape& t) { return focal_loss(ad::sigmoid(t.parameter(logits)), t.constant(y), 0.25, 5.0); };
  Tape tape;
  const Var l = run(tape);
  logits.zero_grad();
  tape.backward(l);
  EXPECT_LT(support::max_fd_error({&logits},
                                  [&] {
                                    Tape t(false);
                                    return run(t).value()(0, 0);
                                  }),
            1e-6);
}
