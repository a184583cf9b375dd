#include "helpers.hpp"

#include <ugss/ingestion.hpp>
#include <ugss/model.hpp>

#include <gtest/gtest.h>

#include <array>
#include <limits>
#include <set>

using namespace ugss;
using namespace ugss::train;

namespace {

ExperimentConfig micro_config() {
  ExperimentConfig c;
  c.latent_dim = 2;
  c.hidden_dim = 5;
  c.feature_x_dim = 4;
  c.feature_z_dim = 3;
  c.mlp_hidden = {6, 4};
  c.conv_channels = 2;
  c.lambda_vrnn = 0.3;
  c.lambda_cons = 0.7;
  c.lambda_imp = 0.9;
  return c;
}

Dataset micro_data(std::uint64_t seed) {
  ingest::SyntheticSpec s;
  s.n_samples = 3;
  s.steps = 4;
  s.dims = 3;
  s.latent_dim = 2;
  s.missing_rate = 0.4;
  s.seed = seed;
  Dataset d = ingest::generate_synthetic(s);
  // Shorten one sample so padding is exercised.
  auto& short_one = d.samples[1];
  short_one = make_sample(short_one.x_tilde.topRows(3), short_one.mask.topRows(3), short_one.timestamps.head(3),
                          short_one.label, short_one.record_id);
  return apply_artificial_masking(d, 0.3, seed + 1);
}

NoiseFn fixed_noise(const Matrix& table, Eigen::Index offset) {
  return [table, offset](Eigen::Index t, int k, Eigen::Index r, Eigen::Index c) {
    return Matrix(table.block(offset + (t * 2 + k) * r, 0, r, c));
  };
}

void copy_direction(UgssModel& m) {
  std::vector<ad::Parameter*> f, b;
  m.forward().collect(f);
  m.backward().collect(b);
  for (std::size_t i = 0; i < f.size(); ++i) b[i]->value = f[i]->value;
}

}  // namespace

class CompositeGradient : public ::testing::TestWithParam<std::tuple<CellType, WeightMode, bool>> {};

TEST_P(CompositeGradient, MatchesCentralDifferences) {
  auto [cell, mode, bidir] = GetParam();
  ExperimentConfig c = micro_config();
  c.cell = cell;
  c.w_alpha = mode;
  c.bidirectional = bidir;
  const Dataset d = micro_data(3);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Batch f = make_batch(d, idx, false), b = make_batch(d, idx, true);
  UgssModel m(c, 3, 7);
  support::randomize(m.parameters(), 13);
  Rng nr(9);
  const Matrix noise = nr.normal_matrix(200, 2);
  const NoiseFn nf = fixed_noise(noise, 0), nb = fixed_noise(noise, 100);
  auto loss = [&] {
    ad::Tape t(false);
    return run_model(t, m, f, bidir ? &b : nullptr, nf, nb).total.value()(0, 0);
  };
  ad::Tape tape;
  const auto r = run_model(tape, m, f, bidir ? &b : nullptr, nf, nb);
  for (auto* p : m.parameters()) p->zero_grad();
  tape.backward(r.total);
  std::string where;
  EXPECT_LT(support::max_fd_error(m.parameters(), loss, 1e-6, 1e-4, &where), 1e-4) << where;
}

INSTANTIATE_TEST_SUITE_P(Micro, CompositeGradient,
                         ::testing::Combine(::testing::Values(CellType::gru_u, CellType::vanilla_gru),
                                            ::testing::Values(WeightMode::diagonal, WeightMode::full),
                                            ::testing::Bool()));

TEST(Model, LossCompositionIdentity) {
  ExperimentConfig c = micro_config();
  const Dataset d = micro_data(5);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Batch f = make_batch(d, idx, false), b = make_batch(d, idx, true);
  UgssModel m(c, 3, 1);
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    ad::Tape t(false);
    const auto r = run_model(t, m, f, &b, gaussian_noise(rng), gaussian_noise(rng));
    EXPECT_NEAR(r.breakdown.compose(c), r.breakdown.total, 1e-10);
    EXPECT_EQ(r.breakdown.cons[0], r.breakdown.cons[1]);
  }
}

TEST(Model, UnidirectionalSkipsBackwardStream) {
  ExperimentConfig c = micro_config();
  c.bidirectional = false;
  c.lambda_cons = 0.0;
  UgssModel m(c, 3, 1);
  EXPECT_FALSE(m.bidirectional());
  const Dataset d = micro_data(5);
  const std::vector<std::size_t> idx{0, 1, 2};
  ad::Tape t(false);
  const auto r = run_model(t, m, make_batch(d, idx, false), nullptr, zero_noise(), zero_noise());
  EXPECT_FALSE(r.bwd.has_value());
  EXPECT_EQ(r.breakdown.vrnn[1], 0.0);
  EXPECT_EQ(r.breakdown.cls[1], 0.0);
}

TEST(Model, FutureInputsDoNotChangePastStates) {
  ExperimentConfig c = micro_config();
  c.bidirectional = false;
  UgssModel m(c, 3, 4);
  Rng rng(5);
  Dataset d;
  d.variable_names = {"a", "b", "c"};
  d.samples = {support::random_sample(rng, 6, 3, 0.7)};
  const std::vector<std::size_t> idx{0};
  const Matrix noise = rng.normal_matrix(100, 2);
  auto states = [&](const Dataset& data) {
    ad::Tape t(false);
    std::vector<std::array<Matrix, 6>> out;
    for (const auto& st :
         run_direction(t, c, m.forward(), make_batch(data, idx), fixed_noise(noise, 0), Direction::forward).steps)
      out.push_back({st.z.value(), st.x_hat.value(), st.u.value(), st.alpha.value(), st.h.value(),
                     st.posterior.mean.value()});
    return out;
  };
  const auto base = states(d);
  for (Eigen::Index tp = 1; tp < 6; ++tp) {
    Dataset p = d;
    auto& s = p.samples[0];
    s.mask.row(tp).setOnes();
    s.x_tilde.row(tp).setConstant(3.0 + static_cast<double>(tp));
    s.delta = compute_time_intervals(s.timestamps, s.mask);
    const auto changed = states(p);
    for (Eigen::Index t = 0; t < tp; ++t) {
      const auto& a = base[static_cast<std::size_t>(t)];
      const auto& b = changed[static_cast<std::size_t>(t)];
      for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(a[k], b[k]);
    }
    EXPECT_NE(base[static_cast<std::size_t>(tp)][4], changed[static_cast<std::size_t>(tp)][4]);
  }
}

TEST(Model, PalindromeMirrorsAcrossDirections) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 8);
  copy_direction(m);
  Rng rng(6);
  Matrix x(5, 3), mask(5, 3);
  x.topRows(3) = rng.normal_matrix(3, 3);
  mask.topRows(3) = (rng.uniform_matrix(3, 3, 0, 1).array() > 0.4).cast<double>();
  x.row(3) = x.row(1);
  x.row(4) = x.row(0);
  mask.row(3) = mask.row(1);
  mask.row(4) = mask.row(0);
  Vector s(5);
  s << 0, 1.5, 4, 6.5, 8;
  Dataset d;
  d.variable_names = {"a", "b", "c"};
  d.samples = {make_sample(x, mask, s, 1)};
  const std::vector<std::size_t> idx{0};
  const Batch f = make_batch(d, idx, false), b = make_batch(d, idx, true);
  ad::Tape t(false);
  const auto r = run_model(t, m, f, &b, zero_noise(), zero_noise());
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.fwd.steps[k].h.value(), r.bwd->steps[k].h.value());
    EXPECT_EQ(r.fwd.steps[k].x_hat.value(), r.bwd_x_hat_aligned[4 - k].value());
  }
  EXPECT_EQ(r.breakdown.vrnn[0], r.breakdown.vrnn[1]);
  ExperimentConfig uc = c;
  uc.bidirectional = false;
  UgssModel u(uc, 3, 8);
  std::vector<ad::Parameter*> fp, up;
  m.forward().collect(fp);
  u.forward().collect(up);
  for (std::size_t i = 0; i < fp.size(); ++i) up[i]->value = fp[i]->value;
  ad::Tape t2(false);
  const auto ur = run_model(t2, u, f, nullptr, zero_noise(), zero_noise());
  EXPECT_DOUBLE_EQ(ur.probability.value()(0, 0), r.probability.value()(0, 0));
}

TEST(Model, FullyObservedGivesZeroUncertaintyAndConstantAttention) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 9);
  m.forward().gru_u->b_alpha.value << 0.5, -0.3, 1.2;
  Rng rng(7);
  Dataset d;
  d.variable_names = {"a", "b", "c"};
  d.samples = {support::random_sample(rng, 4, 3, 1.0)};
  const std::vector<std::size_t> idx{0};
  ad::Tape t(false);
  const auto r = run_direction(t, c, m.forward(), make_batch(d, idx), zero_noise(), Direction::forward);
  const Matrix expected = (Matrix(1, 3) << std::exp(-0.5), 1.0, std::exp(-1.2)).finished();
  for (const auto& s : r.steps) {
    EXPECT_EQ(s.u.value(), Matrix::Zero(1, 3));
    EXPECT_EQ(s.alpha.value(), expected);
  }
}

TEST(Model, SingleStepSample) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 10);
  Rng rng(8);
  Dataset d;
  d.variable_names = {"a", "b", "c"};
  d.samples = {support::random_sample(rng, 1, 3, 0.5)};
  const auto p = predict(m, d, 1, true);
  ASSERT_EQ(p[0].forward_states.size(), 1u);
  EXPECT_EQ(p[0].x_hat.rows(), 1);
  EXPECT_GT(p[0].probability, 0.0);
  EXPECT_LT(p[0].probability, 1.0);
}

TEST(Model, ZeroOutputWeightsGiveHalf) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 11);
  m.forward().w_out.value.setZero();
  m.backward().w_out.value.setZero();
  const auto p = predict(m, micro_data(2));
  for (const auto& s : p) EXPECT_EQ(s.probability, 0.5);
}

TEST(Model, BidirectionalImputationIsMeanOfDirections) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 12);
  const Dataset d = micro_data(4);
  const auto p = predict(m, d, 3);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Batch f = make_batch(d, idx, false), b = make_batch(d, idx, true);
  ad::Tape t(false);
  const auto r = run_model(t, m, f, &b, zero_noise(), zero_noise());
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index s = 0; s < f.lengths(i); ++s) {
      const auto k = static_cast<std::size_t>(s);
      const Matrix mean =
          0.5 * (r.fwd.steps[k].x_hat.value().row(i) + r.bwd_x_hat_aligned[k].value().row(i));
      EXPECT_LT((Matrix(p[static_cast<std::size_t>(i)].x_hat.row(s)) - mean).norm(), 1e-15);
    }
}

TEST(Model, ObservedEntriesPassThroughPrediction) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 13);
  const Dataset d = micro_data(6);
  const auto p = predict(m, d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& s = d.samples[i];
    for (Eigen::Index t = 0; t < s.steps(); ++t)
      for (Eigen::Index v = 0; v < s.dims(); ++v)
        if (s.mask(t, v) == 1.0) {
          EXPECT_TRUE(support::bit_equal(p[i].x_hat(t, v), s.x_tilde(t, v)));
          EXPECT_EQ(p[i].uncertainty(t, v), 0.0);
        } else {
          EXPECT_GE(p[i].uncertainty(t, v), 0.0);
        }
  }
}

TEST(Model, NonFiniteStateIsReported) {
  ExperimentConfig c = micro_config();
  UgssModel m(c, 3, 14);
  m.forward().vrnn.inference_net.head().bias.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    predict(m, micro_data(2));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Model, ParameterNamesAreUnique) {
  UgssModel m(micro_config(), 3, 1);
  std::set<std::string> names;
  for (const auto* p : std::as_const(m).parameters()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  EXPECT_NE(m.find("fwd.w_out"), nullptr);
}
