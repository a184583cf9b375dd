#include "ugss/data_model.hpp"

#include "ugss/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ugss {

Eigen::Index TimeSeriesSample::observed_count() const {
  return static_cast<Eigen::Index>(mask.sum());
}

Eigen::Index TimeSeriesSample::held_out_count() const {
  return imp_mask.size() == 0 ? 0 : static_cast<Eigen::Index>(imp_mask.sum());
}

Matrix compute_time_intervals(const Vector& timestamps, const Matrix& mask) {
  const Eigen::Index steps = mask.rows();
  if (timestamps.size() != steps) {
    throw ValidationError("compute_time_intervals: " + std::to_string(timestamps.size()) +
                          " timestamps for " + std::to_string(steps) + " steps");
  }
  for (Eigen::Index t = 1; t < steps; ++t) {
    if (timestamps(t) < timestamps(t - 1)) {
      throw ValidationError("compute_time_intervals: timestamps decrease at index " +
                            std::to_string(t));
    }
  }
  Matrix delta(steps, mask.cols());
  if (steps == 0) return delta;
  delta.row(0).setOnes();
  for (Eigen::Index t = 1; t < steps; ++t) {
    const double gap = timestamps(t) - timestamps(t - 1);
    for (Eigen::Index d = 0; d < mask.cols(); ++d) {
      delta(t, d) = mask(t - 1, d) != 0.0 ? gap : gap + delta(t - 1, d);
    }
  }
  return delta;
}

TimeSeriesSample make_sample(Matrix values, Matrix mask, Vector timestamps, int label,
                             std::int64_t record_id) {
  if (values.rows() != mask.rows() || values.cols() != mask.cols()) {
    throw ValidationError("make_sample: values and mask differ in shape");
  }
  TimeSeriesSample s;
  s.x_tilde = values.cwiseProduct(mask);
  s.mask = std::move(mask);
  s.delta = compute_time_intervals(timestamps, s.mask);
  s.timestamps = std::move(timestamps);
  s.label = label;
  s.imp_mask = Matrix::Zero(s.mask.rows(), s.mask.cols());
  s.x_truth = Matrix::Zero(s.mask.rows(), s.mask.cols());
  s.record_id = record_id;
  return s;
}

void validate(const TimeSeriesSample& s) {
  const auto T = s.x_tilde.rows(), D = s.x_tilde.cols();
  auto same = [&](const Matrix& m, const char* name) {
    if (m.rows() != T || m.cols() != D) {
      throw ValidationError(std::string("sample ") + std::to_string(s.record_id) + ": " + name +
                            " has shape " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(T) + "x" +
                            std::to_string(D));
    }
  };
  same(s.mask, "mask");
  same(s.delta, "delta");
  same(s.imp_mask, "imp_mask");
  same(s.x_truth, "x_truth");
  if (s.x_full.size() != 0) same(s.x_full, "x_full");
  if (s.timestamps.size() != T) throw ValidationError("timestamps length mismatch");
  if (s.label != 0 && s.label != 1) throw ValidationError("label must be 0 or 1");
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0 && s.timestamps(t) < s.timestamps(t - 1)) {
      throw ValidationError("timestamps decrease at index " + std::to_string(t));
    }
    for (Eigen::Index d = 0; d < D; ++d) {
      const double m = s.mask(t, d), im = s.imp_mask(t, d);
      if ((m != 0.0 && m != 1.0) || (im != 0.0 && im != 1.0)) {
        throw ValidationError("mask entries must be 0 or 1");
      }
      if (m == 0.0 && s.x_tilde(t, d) != 0.0) {
        throw ValidationError("x_tilde nonzero at unobserved entry (" + std::to_string(t) + "," +
                              std::to_string(d) + ")");
      }
      if (im == 1.0 && m == 1.0) {
        throw ValidationError("held-out entry still marked observed");
      }
      if (!std::isfinite(s.x_tilde(t, d)) || !std::isfinite(s.delta(t, d))) {
        throw ValidationError("non-finite value in sample " + std::to_string(s.record_id));
      }
      if (s.delta(t, d) < 0.0) throw ValidationError("negative time interval");
    }
  }
}

TimeSeriesSample apply_artificial_masking(const TimeSeriesSample& sample, double ratio,
                                          std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("masking ratio must lie in (0, 1)");
  }
  std::vector<Eigen::Index> observed;
  const auto T = sample.steps(), D = sample.dims();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index d = 0; d < D; ++d) {
      if (sample.mask(t, d) != 0.0) observed.push_back(t * D + d);
    }
  }
  if (observed.empty()) {
    throw ValidationError("apply_artificial_masking: sample " + std::to_string(sample.record_id) +
                          " has no observed entries");
  }
  const auto take = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(observed.size()) - 1e-12));
  Rng rng(seed);
  // Partial Fisher-Yates: the first `take` slots become the held-out set.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.uniform_index(observed.size() - i);
    std::swap(observed[i], observed[j]);
  }
  TimeSeriesSample out = sample;
  if (out.imp_mask.size() == 0) out.imp_mask = Matrix::Zero(T, D);
  if (out.x_truth.size() == 0) out.x_truth = Matrix::Zero(T, D);
  for (std::size_t i = 0; i < take; ++i) {
    const Eigen::Index t = observed[i] / D, d = observed[i] % D;
    out.imp_mask(t, d) = 1.0;
    out.x_truth(t, d) = sample.x_tilde(t, d);
    out.x_tilde(t, d) = 0.0;
    out.mask(t, d) = 0.0;
  }
  out.delta = compute_time_intervals(out.timestamps, out.mask);
  return out;
}

TimeSeriesSample reverse_in_time(const TimeSeriesSample& s) {
  TimeSeriesSample r = s;
  const auto L = s.steps();
  auto flip = [](const Matrix& m) { return m.size() == 0 ? m : Matrix(m.colwise().reverse()); };
  r.x_tilde = flip(s.x_tilde);
  r.mask = flip(s.mask);
  r.imp_mask = flip(s.imp_mask);
  r.x_truth = flip(s.x_truth);
  r.x_full = flip(s.x_full);
  r.timestamps.resize(L);
  for (Eigen::Index k = 0; k < L; ++k) r.timestamps(k) = s.timestamps(L - 1) - s.timestamps(L - 1 - k);
  r.delta = compute_time_intervals(r.timestamps, r.mask);
  return r;
}

Eigen::Index Dataset::max_steps() const {
  Eigen::Index m = 0;
  for (const auto& s : samples) m = std::max(m, s.steps());
  return m;
}

double Dataset::missing_rate() const {
  double total = 0.0, observed = 0.0;
  for (const auto& s : samples) {
    total += static_cast<double>(s.mask.size());
    observed += s.mask.sum();
  }
  return total > 0 ? 1.0 - observed / total : 0.0;
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label == 1; }));
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.variable_names = data.variable_names;
  out.normalization = data.normalization;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(data.samples.at(i));
  return out;
}

Dataset apply_artificial_masking(const Dataset& data, double ratio, std::uint64_t seed) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    if (out.samples[i].observed_count() == 0) continue;
    out.samples[i] = apply_artificial_masking(out.samples[i], ratio, derive_seed(seed, i));
  }
  return out;
}

Batch make_batch(std::span<const TimeSeriesSample* const> samples) {
  Batch b;
  b.size = static_cast<Eigen::Index>(samples.size());
  if (samples.empty()) return b;
  b.dims = samples[0]->dims();
  for (const auto* s : samples) {
    if (s->dims() != b.dims) throw ValidationError("make_batch: samples differ in variable count");
    b.steps = std::max(b.steps, s->steps());
  }
  b.lengths.resize(b.size);
  b.labels.resize(b.size);
  auto alloc = [&](std::vector<Matrix>& v, Eigen::Index cols) {
    v.assign(static_cast<std::size_t>(b.steps), Matrix::Zero(b.size, cols));
  };
  alloc(b.x_tilde, b.dims);
  alloc(b.mask, b.dims);
  alloc(b.delta, b.dims);
  alloc(b.imp_mask, b.dims);
  alloc(b.x_truth, b.dims);
  alloc(b.valid, 1);
  for (Eigen::Index i = 0; i < b.size; ++i) {
    const auto& s = *samples[static_cast<std::size_t>(i)];
    b.lengths(i) = static_cast<int>(s.steps());
    b.labels(i) = s.label;
    const bool has_imp = s.imp_mask.size() != 0;
    for (Eigen::Index t = 0; t < s.steps(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      b.x_tilde[k].row(i) = s.x_tilde.row(t);
      b.mask[k].row(i) = s.mask.row(t);
      b.delta[k].row(i) = s.delta.row(t);
      if (has_imp) {
        b.imp_mask[k].row(i) = s.imp_mask.row(t);
        b.x_truth[k].row(i) = s.x_truth.row(t);
      }
      b.valid[k](i, 0) = 1.0;
    }
    // Padded steps repeat a unit interval so every delta stays finite.
    for (Eigen::Index t = s.steps(); t < b.steps; ++t) {
      b.delta[static_cast<std::size_t>(t)].row(i).setOnes();
    }
  }
  return b;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices, bool reversed) {
  std::vector<TimeSeriesSample> storage;
  std::vector<const TimeSeriesSample*> ptrs;
  if (reversed) {
    storage.reserve(indices.size());
    for (auto i : indices) storage.push_back(reverse_in_time(data.samples.at(i)));
    for (const auto& s : storage) ptrs.push_back(&s);
  } else {
    for (auto i : indices) ptrs.push_back(&data.samples.at(i));
  }
  return make_batch(ptrs);
}

}  // namespace ugss
