#include "ugss/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ugss::eval {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  pos = neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("non-finite score at index " + std::to_string(i));
    if (labels[i] == 1) {
      ++pos;
    } else if (labels[i] == 0) {
      ++neg;
    } else {
      throw std::invalid_argument("label at index " + std::to_string(i) + " is not 0/1");
    }
  }
  if (pos == 0 || neg == 0) throw UndefinedMetric("metric needs at least one positive and one negative label");
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos, neg;
  check_binary(scores, labels, pos, neg);
  // Walk groups of tied scores from the top; each positive beats every
  // negative below its group and ties with the negatives inside it.
  const auto order = order_descending(scores);
  double wins = 0.0;
  std::size_t neg_below = neg;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? p : n) += 1;
      ++j;
    }
    neg_below -= n;
    wins += static_cast<double>(p) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(n));
    i = j;
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos, neg;
  check_binary(scores, labels, pos, neg);
  const auto order = order_descending(scores);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, p = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++p;
      ++j;
    }
    tp += p;
    seen += j - i;
    if (p > 0) {
      ap += (static_cast<double>(p) / static_cast<double>(pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    }
    i = j;
  }
  return ap;
}

double masked_mae(const Matrix& truth, const Matrix& x_hat, const Matrix& imp_mask) {
  if (truth.rows() != x_hat.rows() || truth.cols() != x_hat.cols() || imp_mask.rows() != truth.rows() ||
      imp_mask.cols() != truth.cols()) {
    throw std::invalid_argument("masked_mae: shape mismatch");
  }
  const double count = imp_mask.sum();
  if (count == 0.0) throw UndefinedMetric("masked_mae: no held-out entries");
  return ((truth - x_hat).cwiseAbs().cwiseProduct(imp_mask)).sum() / count;
}

double masked_mae(const Dataset& data, std::span<const Matrix> x_hat) {
  if (x_hat.size() != data.size()) throw std::invalid_argument("masked_mae: one imputation per sample required");
  double err = 0.0, count = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    if (s.imp_mask.size() == 0) continue;
    if (x_hat[i].rows() != s.steps() || x_hat[i].cols() != s.dims()) {
      throw std::invalid_argument("masked_mae: imputation " + std::to_string(i) + " has the wrong shape");
    }
    err += ((s.x_truth - x_hat[i]).cwiseAbs().cwiseProduct(s.imp_mask)).sum();
    count += s.imp_mask.sum();
  }
  if (count == 0.0) throw UndefinedMetric("masked_mae: no held-out entries");
  return err / count;
}

Correlation pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: lists differ in length");
  const std::size_t n = a.size();
  if (n < 3) throw UndefinedMetric("pearson: needs at least 3 points");
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedMetric("pearson: zero variance");
  Correlation c;
  c.n = n;
  c.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  if (std::abs(c.r) == 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.r * std::sqrt(dof / (1.0 - c.r * c.r));
    boost::math::students_t dist(dof);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

PerSampleErrors per_sample_errors(const Dataset& data, std::span<const Matrix> x_hat,
                                  std::span<const Matrix> uncertainty) {
  if (x_hat.size() != data.size() || uncertainty.size() != data.size()) {
    throw std::invalid_argument("per_sample_errors: one imputation per sample required");
  }
  PerSampleErrors out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    if (s.imp_mask.size() == 0) continue;
    const double count = s.imp_mask.sum();
    if (count == 0.0) continue;
    out.mae.push_back(((s.x_truth - x_hat[i]).cwiseAbs().cwiseProduct(s.imp_mask)).sum() / count);
    out.uncertainty.push_back(uncertainty[i].cwiseProduct(s.imp_mask).sum() / count);
    out.sample_index.push_back(i);
  }
  return out;
}

Correlation uncertainty_error_correlation(std::span<const double> mae, std::span<const double> uncertainty) {
  return pearson(mae, uncertainty);
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw UndefinedMetric("mean_std: no values");
  MeanStd m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw UndefinedMetric("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string imputation_plot_data(const TimeSeriesSample& s, const Matrix& x_hat, const Matrix& u,
                                 const std::vector<std::string>& names, double probability) {
  if (x_hat.rows() != s.steps() || x_hat.cols() != s.dims() || u.rows() != s.steps() || u.cols() != s.dims()) {
    throw std::invalid_argument("imputation_plot_data: shape mismatch");
  }
  if (static_cast<Eigen::Index>(names.size()) != s.dims()) {
    throw std::invalid_argument("imputation_plot_data: one name per variable required");
  }
  const bool has_imp = s.imp_mask.size() != 0;
  nlohmann::json doc;
  doc["record_id"] = s.record_id;
  doc["label"] = s.label;
  doc["probability"] = probability;
  doc["timestamps"] = std::vector<double>(s.timestamps.data(), s.timestamps.data() + s.timestamps.size());
  auto& vars = doc["variables"] = nlohmann::json::array();
  for (Eigen::Index d = 0; d < s.dims(); ++d) {
    nlohmann::json v;
    v["name"] = names[static_cast<std::size_t>(d)];
    v["observed"] = nlohmann::json::array();
    v["imputed"] = nlohmann::json::array();
    v["band"] = nlohmann::json::array();
    v["held_out"] = nlohmann::json::array();
    double err = 0.0, count = 0.0;
    for (Eigen::Index t = 0; t < s.steps(); ++t) {
      const double ts = s.timestamps(t);
      v["imputed"].push_back({ts, x_hat(t, d)});
      if (s.mask(t, d) != 0.0) {
        v["observed"].push_back({ts, s.x_tilde(t, d)});
      } else {
        v["band"].push_back({ts, x_hat(t, d) - u(t, d), x_hat(t, d) + u(t, d)});
      }
      if (has_imp && s.imp_mask(t, d) != 0.0) {
        v["held_out"].push_back({ts, s.x_truth(t, d)});
        err += std::abs(s.x_truth(t, d) - x_hat(t, d));
        count += 1.0;
      }
    }
    v["mae"] = count > 0.0 ? nlohmann::json(err / count) : nlohmann::json(nullptr);
    vars.push_back(std::move(v));
  }
  return doc.dump(2);
}

}  // namespace ugss::eval
