#include "helpers.hpp"

#include <ugss/imputation.hpp>
#include <ugss/optimizer.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace ugss;
using namespace ugss::impute;
using ad::Tape;
using ad::Var;

namespace {

DecayParams make_params(Eigen::Index D, Eigen::Index C = 2, WeightMode mode = WeightMode::diagonal,
                        std::uint64_t seed = 1) {
  Rng rng(seed);
  return DecayParams("imp", D, C, mode, rng);
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST(TemporalDecay, ZeroWeightsMeanNoDecay) {
  auto p = make_params(3);
  p.w_gamma.value.setZero();
  p.b_gamma.value.setZero();
  Tape t(false);
  EXPECT_EQ(temporal_decay(t, p, t.constant(row({1, 5, 40}))).value(), Matrix::Ones(1, 3));
}

TEST(TemporalDecay, IdentityWeightsHalveAtLn2) {
  auto p = make_params(3);
  p.w_gamma.value = Matrix::Identity(3, 3);
  p.b_gamma.value.setZero();
  Tape t(false);
  const Matrix g = temporal_decay(t, p, t.constant(Matrix::Constant(1, 3, std::numbers::ln2))).value();
  for (Eigen::Index d = 0; d < 3; ++d) EXPECT_NEAR(g(0, d), 0.5, 1e-15);
}

TEST(TemporalDecay, MonotoneForNonNegativeDiagonal) {
  auto p = make_params(4);
  Rng rng(2);
  p.w_gamma.value = rng.uniform_matrix(4, 4, 0.0, 1.0);
  p.w_gamma.apply_mask();
  Matrix prev = Matrix::Ones(1, 4);
  for (double delta = 0.0; delta < 20.0; delta += 0.5) {
    Tape t(false);
    const Matrix g = temporal_decay(t, p, t.constant(Matrix::Constant(1, 4, delta))).value();
    EXPECT_TRUE((g.array() <= prev.array()).all());
    EXPECT_TRUE((g.array() > 0.0).all());
    prev = g;
  }
}

TEST(BlendHistory, EndpointsAndBetweenness) {
  auto p = make_params(3);
  auto blend = [&] {
    Tape t(false);
    return Matrix(blend_history(t, p, t.constant(row({1, 2, 3})), t.constant(row({-1, 0, 5})),
                                t.constant(row({0.5, 0.5, 0.5})), t.constant(row({1, 0, 1})))
                      .value());
  };
  p.w_beta.value.setZero();
  p.b_beta.value.setConstant(1000.0);
  EXPECT_EQ(blend(), row({1, 2, 3}));
  p.b_beta.value.setConstant(-1000.0);
  EXPECT_EQ(blend(), row({-1, 0, 5}));

  auto q = make_params(3, 2, WeightMode::diagonal, 5);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tape tt(false);
    const Matrix xa = rng.normal_matrix(2, 3), ma = rng.normal_matrix(2, 3);
    const Matrix c = blend_history(tt, q, tt.constant(xa), tt.constant(ma),
                                   tt.constant(rng.uniform_matrix(2, 3, 0, 1)),
                                   tt.constant((rng.uniform_matrix(2, 3, 0, 1).array() > 0.5).cast<double>()))
                         .value();
    EXPECT_TRUE((c.array() >= xa.cwiseMin(ma).array() - 1e-15).all());
    EXPECT_TRUE((c.array() <= xa.cwiseMax(ma).array() + 1e-15).all());
  }
}

TEST(FeatureCorrelation, Examples) {
  auto p = make_params(2);
  p.w_x.value.setZero();
  p.b_x.value.setZero();
  auto apply = [&] {
    Tape t(false);
    return Matrix(feature_correlation(t, p, t.constant(row({3, 5}))).value());
  };
  EXPECT_EQ(apply(), Matrix::Zero(1, 2));
  p.w_x.value << 0, 1, 1, 0;
  EXPECT_EQ(apply(), row({5, 3}));
}

TEST(FeatureCorrelation, SelfExclusion) {
  auto p = make_params(4);
  p.w_x.value = Matrix::Ones(4, 4);
  p.w_x.apply_mask();
  EXPECT_EQ(p.w_x.value.diagonal().norm(), 0.0);
  ad::Parameter mu("mu", Matrix::Ones(1, 4));
  for (Eigen::Index d = 0; d < 4; ++d) {
    Tape tape;
    const Var out = ad::element(feature_correlation(tape, p, tape.parameter(mu)), 0, d);
    mu.zero_grad();
    tape.backward(out);
    EXPECT_EQ(mu.grad(0, d), 0.0);
    EXPECT_EQ(mu.grad.sum(), 3.0);
  }
}

TEST(Combine, DegenerateKernels) {
  auto p = make_params(3, 1);
  auto apply = [&] {
    Tape t(false);
    return Matrix(combine(t, p, t.constant(row({1, -2, 3})), t.constant(row({5, 0, -1}))).value());
  };
  p.conv_kernel.value << 1, 0;
  p.conv_bias.value.setZero();
  EXPECT_EQ(apply(), row({1, -2, 3}));
  p.conv_kernel.value << 0.5, 0.5;
  EXPECT_EQ(apply(), row({3, -1, 1}));
}

TEST(Combine, MaxPoolsAcrossChannels) {
  auto p = make_params(2, 2);
  p.conv_kernel.value << 1, 0, 0, 1;
  p.conv_bias.value.setZero();
  Tape t(false);
  EXPECT_EQ(combine(t, p, t.constant(row({1, 4})), t.constant(row({2, 3}))).value(), row({2, 4}));
}

TEST(Combine, PermutationEquivariant) {
  auto p = make_params(4, 3, WeightMode::diagonal, 7);
  Rng rng(4);
  const Matrix c = rng.normal_matrix(2, 4), ct = rng.normal_matrix(2, 4);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  Tape t(false);
  const Matrix a = combine(t, p, t.constant(c), t.constant(ct)).value();
  const Matrix b = combine(t, p, t.constant(c * perm), t.constant(ct * perm)).value();
  EXPECT_EQ(Matrix(a * perm), b);
}

TEST(Finalize, SwitchesOnMask) {
  Tape t(false);
  const Var x = t.constant(row({1, 2, 3}));
  const Var ch = t.constant(row({7, 8, 9}));
  EXPECT_EQ(finalize_imputation(x, t.constant(Matrix::Ones(1, 3)), ch).value(), x.value());
  EXPECT_EQ(finalize_imputation(x, t.constant(Matrix::Zero(1, 3)), ch).value(), ch.value());
  EXPECT_EQ(finalize_imputation(x, t.constant(row({1, 0, 1})), ch).value(), row({1, 8, 3}));
}

TEST(Finalize, ObservedEntriesPassThroughBitExact) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix x = rng.normal_matrix(1, 6) * 1e3, ch = rng.normal_matrix(1, 6) * 1e-3;
    const Matrix m = (rng.uniform_matrix(1, 6, 0, 1).array() > 0.5).cast<double>();
    Tape t(false);
    const Matrix out = finalize_imputation(t.constant(x.cwiseProduct(m)), t.constant(m), t.constant(ch)).value();
    for (Eigen::Index d = 0; d < 6; ++d)
      if (m(0, d) == 1.0) {
        ASSERT_TRUE(support::bit_equal(out(0, d), x(0, d)));
      }
  }
}

TEST(Uncertainty, ZeroWhereObserved) {
  Tape t(false);
  const Var s = t.constant(row({0.5, 1.5, 2.5}));
  EXPECT_EQ(extract_uncertainty(t.constant(Matrix::Ones(1, 3)), s).value(), Matrix::Zero(1, 3));
  EXPECT_EQ(extract_uncertainty(t.constant(Matrix::Zero(1, 3)), s).value(), s.value());
  EXPECT_EQ(extract_uncertainty(t.constant(row({1, 0, 1})), s).value(), row({0, 1.5, 0}));
}

TEST(Imputation, CompositeGradientMatchesFiniteDifferences) {
  for (auto mode : {WeightMode::diagonal, WeightMode::full}) {
    auto p = make_params(3, 2, mode, 11);
    std::vector<ad::Parameter*> params;
    p.collect(params);
    support::randomize(params, 12);
    Rng rng(13);
    const Matrix x = rng.normal_matrix(4, 3), mu = rng.normal_matrix(4, 3), sd = rng.uniform_matrix(4, 3, 0.1, 2);
    const Matrix delta = rng.uniform_matrix(4, 3, 0.5, 4), truth = rng.normal_matrix(4, 3);
    const Matrix m = (rng.uniform_matrix(4, 3, 0, 1).array() > 0.5).cast<double>();
    auto run = [&](Tape& t) {
      const Var mv = t.constant(m), xv = t.constant(x.cwiseProduct(m));
      const Var g = temporal_decay(t, p, t.constant(delta));
      const Var c = blend_history(t, p, xv, t.constant(mu), g, mv);
      const Var ch = combine(t, p, c, feature_correlation(t, p, t.constant(mu)));
      const Var xh = finalize_imputation(xv, mv, ch);
      const Var u = extract_uncertainty(mv, t.constant(sd));
      return ad::add(ad::sum(ad::square(ad::sub(xh, t.constant(truth)))), ad::sum(ad::mul(u, xh)));
    };
    Tape tape;
    const Var l = run(tape);
    for (auto* q : params) q->zero_grad();
    tape.backward(l);
    std::string where;
    const double err = support::max_fd_error(
        params,
        [&] {
          Tape t(false);
          return run(t).value()(0, 0);
        },
        1e-6, 1e-4, &where);
    EXPECT_LT(err, 1e-4) << where;
  }
}

TEST(Imputation, ZeroDiagonalSurvivesOptimisation) {
  auto p = make_params(4, 2, WeightMode::diagonal, 3);
  std::vector<ad::Parameter*> params;
  p.collect(params);
  train::RAdam opt(params, 0.05);
  Rng rng(6);
  for (int step = 0; step < 50; ++step) {
    Tape t;
    const Var l = ad::sum(ad::square(feature_correlation(t, p, t.constant(rng.normal_matrix(3, 4)))));
    opt.zero_grad();
    t.backward(l);
    for (auto* q : params) q->grad.setConstant(1.0);
    opt.step();
  }
  EXPECT_EQ(p.w_x.value.diagonal().norm(), 0.0);
  const Matrix off = p.w_gamma.value - Matrix(p.w_gamma.value.diagonal().asDiagonal());
  EXPECT_EQ(off.norm(), 0.0);
}
