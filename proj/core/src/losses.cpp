#include "ugss/losses.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace ugss::train {

Var vrnn_loss(std::span<const VrnnStepTerms> steps) {
  if (steps.empty()) throw std::invalid_argument("vrnn_loss: no steps");
  Var total;
  for (const auto& s : steps) {
    Var nll = vrnn::gaussian_nll(s.x_tilde, s.reconstruction, s.mask);
    for (const auto& extra : s.extra_reconstructions) {
      nll = ad::add(nll, vrnn::gaussian_nll(s.x_tilde, extra, s.mask));
    }
    if (!s.extra_reconstructions.empty()) {
      nll = ad::scale(nll, 1.0 / static_cast<double>(s.extra_reconstructions.size() + 1));
    }
    const Var kl = ad::mul(vrnn::kl_gaussians(s.posterior, s.prior), s.valid);
    const Var step = ad::sum(ad::add(nll, kl));
    total = total.valid() ? ad::add(total, step) : step;
  }
  return total;
}

Var consistency_loss(std::span<const Var> a, std::span<const Var> b, std::span<const Var> valid) {
  if (a.size() != b.size() || a.size() != valid.size() || a.empty()) {
    throw std::invalid_argument("consistency_loss: stream lengths differ");
  }
  Tape& tape = *a[0].tape();
  double cells = 0.0;
  Var total;
  for (std::size_t t = 0; t < a.size(); ++t) {
    cells += valid[t].value().sum() * static_cast<double>(a[t].cols());
    const Var diff = ad::sum(ad::mul_col(ad::abs(ad::sub(a[t], b[t])), valid[t]));
    total = total.valid() ? ad::add(total, diff) : diff;
  }
  if (cells == 0.0) return tape.constant(ad::Matrix::Zero(1, 1));
  return ad::scale(total, 1.0 / cells);
}

Var imputation_loss(std::span<const Var> truth, std::span<const Var> x_hat, std::span<const Var> imp_mask,
                    bool per_sample_norm) {
  if (truth.size() != x_hat.size() || truth.size() != imp_mask.size() || truth.empty()) {
    throw std::invalid_argument("imputation_loss: stream lengths differ");
  }
  Tape& tape = *truth[0].tape();
  const Eigen::Index rows = truth[0].rows();
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(rows);
  Var per_row;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    counts += imp_mask[t].value().rowwise().sum();
    const Var err = ad::row_sum(ad::mul(ad::abs(ad::sub(truth[t], x_hat[t])), imp_mask[t]));
    per_row = per_row.valid() ? ad::add(per_row, err) : err;
  }
  if (counts.sum() == 0.0) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) spdlog::warn("imputation_loss: batch has no held-out entries; term is 0");
    return tape.constant(ad::Matrix::Zero(1, 1));
  }
  ad::Matrix weights(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double norm = per_sample_norm ? std::max(counts(i), 1.0) : 1.0;
    weights(i, 0) = 1.0 / (norm * static_cast<double>(rows));
  }
  return ad::sum(ad::mul_col(per_row, tape.constant(std::move(weights))));
}

Var focal_loss(const Var& prob, const Var& labels, double w1, double w2) {
  const Var p = ad::clamp(prob, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const Var y_hat = ad::add(ad::mul(p, labels), ad::mul(ad::one_minus(p), ad::one_minus(labels)));
  const Var weight = ad::pow(ad::one_minus(y_hat), w2);
  return ad::scale(ad::sum(ad::mul(weight, ad::log(y_hat))), -w1);
}

double focal_loss(double p, int y, double w1, double w2) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const double y_hat = y == 1 ? p : 1.0 - p;
  return -w1 * std::pow(1.0 - y_hat, w2) * std::log(y_hat);
}

double binary_cross_entropy(double p, int y) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

}  // namespace ugss::train
