#include "ugss/optimizer.hpp"

#include <cmath>

namespace ugss::train {

RAdam::RAdam(std::vector<ad::Parameter*> params, double learning_rate, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* p : params_) {
    m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void RAdam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void RAdam::step() {
  ++t_;
  const double t = static_cast<double>(t_);
  const double b1t = std::pow(beta1_, t);
  const double b2t = std::pow(beta2_, t);
  const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
  const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
  double rect = 0.0;
  const bool adaptive = rho_t > 5.0;
  if (adaptive) {
    rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    const ad::Matrix& g = p->grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const ad::Matrix m_hat = m_[i] / (1.0 - b1t);
    if (adaptive) {
      const ad::Matrix v_hat = (v_[i] / (1.0 - b2t)).cwiseSqrt();
      p->value.array() -= lr_ * rect * m_hat.array() / (v_hat.array() + eps_);
    } else {
      p->value -= lr_ * m_hat;
    }
    p->apply_mask();
  }
}

double grad_norm(const std::vector<ad::Parameter*>& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<ad::Parameter*>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad *= s;
  }
  return norm;
}

}  // namespace ugss::train
