#pragma once

#include <ugss/autodiff.hpp>
#include <ugss/data_model.hpp>
#include <ugss/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

namespace ugss::support {

/// Random sample with a given observation rate on an irregular clock.
inline TimeSeriesSample random_sample(Rng& rng, Eigen::Index steps, Eigen::Index dims, double observed = 0.6,
                                      int label = 0) {
  Matrix x = rng.normal_matrix(steps, dims);
  Matrix m(steps, dims);
  for (Eigen::Index t = 0; t < steps; ++t)
    for (Eigen::Index d = 0; d < dims; ++d) m(t, d) = rng.bernoulli(observed) ? 1.0 : 0.0;
  Vector s(steps);
  double clock = 0.0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    s(t) = clock;
    clock += rng.uniform(0.5, 3.0);
  }
  return make_sample(x, m, s, label);
}

/// Central-difference gradient check of `loss` w.r.t. every unmasked entry
/// of `params`. Returns the largest relative error.
inline double max_fd_error(const std::vector<ad::Parameter*>& params, const std::function<double()>& loss,
                           double h = 1e-6, double floor = 1e-4, std::string* where = nullptr) {
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      if (p->mask.size() != 0 && p->mask.data()[i] == 0.0) continue;
      const double v = p->value.data()[i];
      p->value.data()[i] = v + h;
      const double lp = loss();
      p->value.data()[i] = v - h;
      const double lm = loss();
      p->value.data()[i] = v;
      const double num = (lp - lm) / (2.0 * h);
      const double an = p->grad.data()[i];
      const double rel = std::abs(num - an) / std::max({std::abs(num), std::abs(an), floor});
      if (rel > worst) {
        worst = rel;
        if (where) *where = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return worst;
}

inline void randomize(const std::vector<ad::Parameter*>& params, std::uint64_t seed, double scale = 0.6) {
  Rng rng(seed);
  for (auto* p : params) {
    p->value = rng.uniform_matrix(p->value.rows(), p->value.cols(), -scale, scale);
    p->apply_mask();
  }
}

inline bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace ugss::support
