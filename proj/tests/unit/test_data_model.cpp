#include "helpers.hpp"

#include <ugss/data_model.hpp>

#include <gtest/gtest.h>

using namespace ugss;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Vector vec(std::initializer_list<double> v) { return column(v).col(0); }

// Direct reading of the interval definition: the gap back to the most recent
// earlier observation, or the time since the first step plus one.
Matrix interval_oracle(const Vector& s, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index d = 0; d < m.cols(); ++d) {
    out(0, d) = 1.0;
    for (Eigen::Index t = 1; t < m.rows(); ++t) {
      double acc = 0.0;
      Eigen::Index k = t;
      while (k > 0) {
        acc += s(k) - s(k - 1);
        --k;
        if (m(k, d) == 1.0) break;
      }
      out(t, d) = (k == 0 && m(0, d) == 0.0) ? acc + 1.0 : acc;
    }
  }
  return out;
}

}  // namespace

TEST(TimeIntervals, AllObservedCollapsesToGap) {
  EXPECT_EQ(compute_time_intervals(vec({1, 2, 3}), column({1, 1, 1})), column({1, 1, 1}));
}

TEST(TimeIntervals, GapAccumulatesOverMissingStep) {
  EXPECT_EQ(compute_time_intervals(vec({1, 2, 3}), column({1, 0, 1})), column({1, 1, 2}));
}

TEST(TimeIntervals, IrregularClock) {
  EXPECT_EQ(compute_time_intervals(vec({0, 2, 5, 6}), column({0, 0, 1, 0})), column({1, 3, 6, 1}));
}

TEST(TimeIntervals, RejectsDecreasingTimestamps) {
  try {
    compute_time_intervals(vec({0, 2, 1}), column({1, 1, 1}));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
}

TEST(TimeIntervals, MatchesScanOracleOnRandomInstances) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto T = 1 + static_cast<Eigen::Index>(rng.uniform_index(12));
    const auto D = 1 + static_cast<Eigen::Index>(rng.uniform_index(4));
    Vector s(T);
    double clock = static_cast<double>(rng.uniform_index(5));
    for (Eigen::Index t = 0; t < T; ++t) {
      s(t) = clock;
      clock += 0.25 * static_cast<double>(rng.uniform_index(9));
    }
    Matrix m(T, D);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    ASSERT_EQ(compute_time_intervals(s, m), interval_oracle(s, m)) << "trial " << trial;
  }
}

TEST(Masking, HoldsOutCeilOfRatio) {
  const auto s = make_sample(Matrix::Constant(4, 3, 2.0), Matrix::Ones(4, 3), vec({0, 1, 2, 3}), 0);
  const auto m = apply_artificial_masking(s, 0.25, 9);
  EXPECT_EQ(m.imp_mask.sum(), 3.0);
  EXPECT_EQ(m.mask.sum(), 9.0);
  EXPECT_EQ((m.x_truth.array() * m.imp_mask.array()).sum(), 6.0);
  EXPECT_NO_THROW(validate(m));
}

TEST(Masking, DeterministicForSeed) {
  Rng rng(3);
  const auto s = support::random_sample(rng, 10, 5);
  EXPECT_EQ(apply_artificial_masking(s, 0.3, 4).imp_mask, apply_artificial_masking(s, 0.3, 4).imp_mask);
}

TEST(Masking, NeverTouchesMissingEntries) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = support::random_sample(rng, 8, 4, 0.5);
    if (s.observed_count() == 0) continue;
    const auto m = apply_artificial_masking(s, 0.2, static_cast<std::uint64_t>(trial));
    EXPECT_EQ((m.imp_mask.array() * (1.0 - s.mask.array())).abs().sum(), 0.0);
    EXPECT_EQ((m.x_tilde.array() * (1.0 - m.mask.array())).abs().sum(), 0.0);
    EXPECT_EQ(m.mask + m.imp_mask, s.mask);
  }
}

TEST(Masking, RecomputesIntervals) {
  const auto s = make_sample(Matrix::Ones(3, 1), Matrix::Ones(3, 1), vec({0, 1, 2}), 0);
  // The middle entry is the only one whose removal changes delta at step 2.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = apply_artificial_masking(s, 0.3, seed);
    EXPECT_EQ(m.delta, compute_time_intervals(m.timestamps, m.mask));
    if (m.imp_mask(1, 0) == 1.0) {
      EXPECT_EQ(m.delta(2, 0), 2.0);
      EXPECT_NE(m.delta, s.delta);
    }
  }
}

TEST(Masking, RejectsEmptySample) {
  const auto s = make_sample(Matrix::Zero(2, 2), Matrix::Zero(2, 2), vec({0, 1}), 0);
  EXPECT_THROW(apply_artificial_masking(s, 0.5, 1), ValidationError);
}

TEST(Sample, UnobservedEntriesAreZero) {
  const auto s = make_sample(Matrix::Constant(2, 2, 5.0), column({1, 0}).replicate(1, 2), vec({0, 1}), 1);
  EXPECT_EQ(s.x_tilde(1, 0), 0.0);
  EXPECT_EQ(s.x_tilde(0, 1), 5.0);
}

TEST(Sample, ReverseInTimeMirrorsClock) {
  const auto s = make_sample(Matrix::Ones(4, 1), column({1, 0, 1, 1}), vec({0, 2, 5, 6}), 0);
  const auto r = reverse_in_time(s);
  EXPECT_EQ(r.timestamps, vec({0, 1, 4, 6}));
  EXPECT_EQ(r.mask, column({1, 1, 0, 1}));
  EXPECT_EQ(r.delta, column({1, 1, 3, 5}));
  EXPECT_EQ(reverse_in_time(r).x_tilde, s.x_tilde);
}

TEST(Batch, PaddedStepsAreMaskedAndInvalid) {
  Rng rng(1);
  const auto a = support::random_sample(rng, 5, 3);
  const auto b = support::random_sample(rng, 2, 3);
  const std::vector<const TimeSeriesSample*> ptrs{&a, &b};
  const Batch batch = make_batch(ptrs);
  ASSERT_EQ(batch.steps, 5);
  EXPECT_EQ(batch.lengths(1), 2);
  for (Eigen::Index t = 2; t < 5; ++t) {
    EXPECT_EQ(batch.mask[t].row(1).sum(), 0.0);
    EXPECT_EQ(batch.imp_mask[t].row(1).sum(), 0.0);
    EXPECT_EQ(batch.valid[t](1, 0), 0.0);
    EXPECT_EQ(batch.valid[t](0, 0), 1.0);
  }
  EXPECT_EQ(Matrix(batch.x_tilde[1].row(1)), Matrix(b.x_tilde.row(1)));
}

TEST(Batch, ReversedBatchReversesEachSampleWithinItsLength) {
  Rng rng(2);
  Dataset d;
  d.variable_names = {"a", "b"};
  d.samples = {support::random_sample(rng, 4, 2), support::random_sample(rng, 2, 2)};
  const std::vector<std::size_t> idx{0, 1};
  const Batch r = make_batch(d, idx, true);
  EXPECT_EQ(Matrix(r.x_tilde[0].row(1)), Matrix(d.samples[1].x_tilde.row(1)));
  EXPECT_EQ(Matrix(r.x_tilde[1].row(1)), Matrix(d.samples[1].x_tilde.row(0)));
  EXPECT_EQ(Matrix(r.x_tilde[0].row(0)), Matrix(d.samples[0].x_tilde.row(3)));
}
