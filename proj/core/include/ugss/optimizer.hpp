#pragma once

#include "ugss/autodiff.hpp"

#include <vector>

namespace ugss::train {

/// Rectified Adam. Masked parameters are re-masked after every step.
class RAdam {
 public:
  RAdam(std::vector<ad::Parameter*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void zero_grad();
  /// Applies one update from the gradients currently held by the parameters.
  void step();

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<ad::Parameter*>& params, double max_norm);

double grad_norm(const std::vector<ad::Parameter*>& params);

}  // namespace ugss::train
