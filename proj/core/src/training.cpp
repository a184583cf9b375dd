#include "ugss/training.hpp"

#include "ugss/container.hpp"
#include "ugss/ingestion.hpp"
#include "ugss/optimizer.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace ugss::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(n, i + static_cast<std::size_t>(batch_size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

std::string describe(const LossBreakdown& l) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "vrnn=(%.4g, %.4g) cons=(%.4g, %.4g) imp=(%.4g, %.4g) cls=(%.4g, %.4g) total=%.4g",
                l.vrnn[0], l.vrnn[1], l.cons[0], l.cons[1], l.imp[0], l.imp[1], l.cls[0], l.cls[1], l.total);
  return buf;
}

// Higher is better.
double selection_score(const EpochRecord& r) {
  if (std::isfinite(r.val_auc)) return r.val_auc;
  if (std::isfinite(r.val_mae)) return -r.val_mae;
  return -r.loss.total;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

TestMetrics score_predictions(const Dataset& data, std::span<const double> probabilities,
                              std::span<const Matrix> x_hat, std::span<const Matrix> uncertainty) {
  TestMetrics m;
  m.samples = data.size();
  std::vector<int> labels;
  for (const auto& s : data.samples) labels.push_back(s.label);
  try {
    m.auc = eval::auc(probabilities, labels);
    m.auprc = eval::auprc(probabilities, labels);
  } catch (const eval::UndefinedMetric&) {
  }
  try {
    m.mae = eval::masked_mae(data, x_hat);
  } catch (const eval::UndefinedMetric&) {
  }
  if (!uncertainty.empty()) {
    const auto per = eval::per_sample_errors(data, x_hat, uncertainty);
    try {
      m.correlation = eval::uncertainty_error_correlation(per.mae, per.uncertainty);
    } catch (const eval::UndefinedMetric&) {
    }
  }
  return m;
}

TestMetrics evaluate_model(const UgssModel& model, const Dataset& data) {
  const auto preds = predict(model, data, model.config().batch_size);
  std::vector<double> probs;
  std::vector<Matrix> x_hat, unc;
  for (const auto& p : preds) {
    probs.push_back(p.probability);
    x_hat.push_back(p.x_hat);
    unc.push_back(p.uncertainty);
  }
  return score_predictions(data, probs, x_hat, unc);
}

TrainResult train(const ExperimentConfig& config, const Dataset& train_data, const Dataset& val,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_data.size() == 0) throw ValidationError("train: empty training set");
  TrainResult result{UgssModel(config, train_data.dims(), derive_seed(config.seed, 11)), {}, 0, 0.0};
  UgssModel& model = result.model;
  auto params = model.parameters();
  RAdam optimizer(params, config.learning_rate);
  Rng rng(derive_seed(config.seed, 12));
  const NoiseFn noise = gaussian_noise(rng);

  std::vector<Matrix> best_values;
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = optimizer.learning_rate();
    const auto batches = shuffled_batches(train_data.size(), config.batch_size, rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch fwd = make_batch(train_data, batches[b], false);
      std::optional<Batch> bwd;
      if (model.bidirectional()) bwd = make_batch(train_data, batches[b], true);
      Tape tape;
      ForwardResult r;
      try {
        r = run_model(tape, model, fwd, bwd ? &*bwd : nullptr, noise, noise);
      } catch (const NumericalError& e) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
      }
      if (!std::isfinite(r.breakdown.total) || r.breakdown.total > kDivergenceBound) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                               ": loss diverged, " + describe(r.breakdown));
      }
      optimizer.zero_grad();
      tape.backward(r.total);
      const double norm = clip_grad_norm(params, config.grad_clip);
      if (!std::isfinite(norm)) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                               ": non-finite gradient, " + describe(r.breakdown));
      }
      optimizer.step();
      rec.loss += r.breakdown;
    }
    rec.loss /= static_cast<double>(batches.size());

    rec.val_auc = rec.val_auprc = rec.val_mae = kNaN;
    if (val.size() > 0) {
      const TestMetrics vm = evaluate_model(model, val);
      if (vm.auc) rec.val_auc = *vm.auc;
      if (vm.auprc) rec.val_auprc = *vm.auprc;
      if (vm.mae) rec.val_mae = *vm.mae;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const double score = selection_score(rec);
    if (score > best) {
      best = score;
      result.best_epoch = epoch;
      best_values.clear();
      for (const auto* p : params) best_values.push_back(p->value);
      stale = 0;
    } else if (++stale >= config.lr_patience) {
      optimizer.set_learning_rate(optimizer.learning_rate() * config.lr_decay);
      stale = 0;
    }
    spdlog::debug("epoch {}: {} val_auc={:.4f} val_mae={:.4f} ({:.1f}s)", epoch, describe(rec.loss), rec.val_auc,
                  rec.val_mae, rec.seconds);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  result.best_score = best;
  return result;
}

std::vector<FoldSplit> make_folds(std::span<const int> labels, int folds, double val_fraction, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("make_folds: need at least 2 folds");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ValidationError("make_folds: val_fraction must be in [0, 1)");
  if (labels.size() < static_cast<std::size_t>(folds)) throw ValidationError("make_folds: fewer samples than folds");
  Rng rng(derive_seed(seed, 21));
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
  std::vector<std::vector<std::size_t>> fold_of(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (auto& cls : by_class) {
    std::shuffle(cls.begin(), cls.end(), rng.engine());
    for (std::size_t i : cls) fold_of[next++ % static_cast<std::size_t>(folds)].push_back(i);
  }

  std::vector<FoldSplit> out(static_cast<std::size_t>(folds));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].test = fold_of[k];
    std::array<std::vector<std::size_t>, 2> rest;
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (j == k) continue;
      for (std::size_t i : fold_of[j]) rest[labels[i] == 1 ? 1 : 0].push_back(i);
    }
    for (auto& cls : rest) {
      std::sort(cls.begin(), cls.end());
      std::shuffle(cls.begin(), cls.end(), rng.engine());
      const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(cls.size())));
      out[k].val.insert(out[k].val.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_val));
      out[k].train.insert(out[k].train.end(), cls.begin() + static_cast<std::ptrdiff_t>(n_val), cls.end());
    }
    std::sort(out[k].train.begin(), out[k].train.end());
    std::sort(out[k].val.begin(), out[k].val.end());
    std::sort(out[k].test.begin(), out[k].test.end());
  }
  return out;
}

std::string folds_to_json(const std::vector<FoldSplit>& folds) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : folds) j.push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
  return j.dump();
}

std::vector<FoldSplit> folds_from_json(const std::string& text) {
  std::vector<FoldSplit> out;
  for (const auto& f : nlohmann::json::parse(text)) {
    out.push_back({f.at("train").get<std::vector<std::size_t>>(), f.at("val").get<std::vector<std::size_t>>(),
                   f.at("test").get<std::vector<std::size_t>>()});
  }
  return out;
}

Dataset ensure_masked(const Dataset& data, double ratio, std::uint64_t seed) {
  for (const auto& s : data.samples) {
    if (s.held_out_count() > 0) return data;
  }
  if (ratio <= 0.0) return data;
  return apply_artificial_masking(data, ratio, seed);
}

PreparedFold prepare_fold(const Dataset& masked, const FoldSplit& split, const ExperimentConfig& config) {
  PreparedFold f;
  const Dataset train_raw = subset(masked, split.train);
  if (!masked.normalization.empty()) {
    f.train = train_raw;
    f.val = subset(masked, split.val);
    f.test = subset(masked, split.test);
    f.specs = masked.normalization;
    return f;
  }
  std::vector<std::string> dropped;
  f.specs = ingest::fit_preprocessor(train_raw, {config.winsor_low, config.winsor_high}, &dropped);
  for (const auto& name : dropped) spdlog::warn("variable '{}' dropped: constant or unobserved in training fold", name);
  f.train = ingest::apply_preprocessor(train_raw, f.specs);
  f.val = ingest::apply_preprocessor(subset(masked, split.val), f.specs);
  f.test = ingest::apply_preprocessor(subset(masked, split.test), f.specs);
  return f;
}

void aggregate(CvReport& report) {
  std::vector<double> auc, auprc, mae;
  for (const auto& f : report.folds) {
    if (f.test.auc) auc.push_back(*f.test.auc);
    if (f.test.auprc) auprc.push_back(*f.test.auprc);
    if (f.test.mae) mae.push_back(*f.test.mae);
  }
  if (!auc.empty()) report.auc = eval::mean_std(auc);
  if (!auprc.empty()) report.auprc = eval::mean_std(auprc);
  if (!mae.empty()) report.mae = eval::mean_std(mae);
}

CvReport cross_validate(const ExperimentConfig& config, const Dataset& raw, const FoldCallback& on_fold,
                        const EpochCallback& on_epoch) {
  config.validate();
  const Dataset masked = ensure_masked(raw, config.masking_ratio, config.seed);
  std::vector<int> labels;
  for (const auto& s : masked.samples) labels.push_back(s.label);
  const auto splits = make_folds(labels, config.folds, config.val_fraction, config.seed);
  std::vector<int> run = config.run_folds;
  if (run.empty()) {
    run.resize(static_cast<std::size_t>(config.folds));
    std::iota(run.begin(), run.end(), 0);
  }
  CvReport report;
  for (int k : run) {
    const PreparedFold fold = prepare_fold(masked, splits.at(static_cast<std::size_t>(k)), config);
    const TrainResult tr = train(config, fold.train, fold.val, on_epoch);
    FoldReport fr;
    fr.fold = k;
    fr.test = evaluate_model(tr.model, fold.test);
    fr.best_epoch = tr.best_epoch;
    fr.history = tr.history;
    if (on_fold) on_fold(k, tr, fold, fr);
    report.folds.push_back(std::move(fr));
  }
  aggregate(report);
  return report;
}

std::string normalization_to_json(const std::vector<VariableSpec>& specs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& v : specs) {
    j.push_back({{"name", v.name}, {"winsor_low", v.winsor_low}, {"winsor_high", v.winsor_high}, {"mean", v.mean},
                 {"std", v.std}});
  }
  return j.dump();
}

std::vector<VariableSpec> normalization_from_json(const std::string& text) {
  std::vector<VariableSpec> out;
  for (const auto& v : nlohmann::json::parse(text)) {
    out.push_back({v.at("name").get<std::string>(), v.at("winsor_low").get<double>(),
                   v.at("winsor_high").get<double>(), v.at("mean").get<double>(), v.at("std").get<double>()});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const UgssModel& model,
                     const std::vector<std::string>& variables, const std::vector<VariableSpec>& normalization) {
  Container c;
  for (const auto* p : model.parameters()) c.add_matrix(p->name, p->value);
  nlohmann::json meta;
  meta["kind"] = "ugss-checkpoint";
  meta["format_version"] = kContainerVersion;
  meta["dims"] = model.dims();
  meta["config"] = nlohmann::json::parse(to_json(model.config()));
  meta["variables"] = variables;
  meta["normalization"] = nlohmann::json::parse(normalization_to_json(normalization));
  c.meta_json = meta.dump();
  c.write(path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const auto meta = nlohmann::json::parse(c.meta_json);
  if (meta.value("kind", "") != "ugss-checkpoint") {
    throw ValidationError("'" + path.string() + "' is not a model checkpoint");
  }
  LoadedCheckpoint out;
  out.config = parse_config(meta.at("config").dump());
  out.variables = meta.at("variables").get<std::vector<std::string>>();
  out.normalization = normalization_from_json(meta.at("normalization").dump());
  out.model = std::make_unique<UgssModel>(out.config, meta.at("dims").get<Eigen::Index>(), 0);
  for (auto* p : out.model->parameters()) {
    const Array* a = c.find(p->name);
    if (a == nullptr) throw ValidationError("checkpoint is missing parameter '" + p->name + "'");
    Matrix v = c.matrix(p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ValidationError("checkpoint parameter '" + p->name + "' has the wrong shape");
    }
    p->value = std::move(v);
    p->apply_mask();
  }
  return out;
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : history) {
    j.push_back({{"epoch", r.epoch},
                 {"loss",
                  {{"vrnn", r.loss.vrnn},
                   {"cons", r.loss.cons},
                   {"imp", r.loss.imp},
                   {"cls", r.loss.cls},
                   {"total", r.loss.total}}},
                 {"val_auc", finite_or_null(r.val_auc)},
                 {"val_auprc", finite_or_null(r.val_auprc)},
                 {"val_mae", finite_or_null(r.val_mae)},
                 {"learning_rate", r.learning_rate},
                 {"seconds", r.seconds}});
  }
  return j.dump();
}

std::string metrics_to_json(const TestMetrics& m) {
  nlohmann::json j{{"auc", opt_json(m.auc)}, {"auprc", opt_json(m.auprc)}, {"mae", opt_json(m.mae)},
                   {"samples", m.samples}};
  if (m.correlation) {
    j["uncertainty_correlation"] = {{"r", m.correlation->r}, {"p_value", m.correlation->p_value},
                                    {"n", m.correlation->n}};
  } else {
    j["uncertainty_correlation"] = nullptr;
  }
  return j.dump();
}

std::string report_to_json(const CvReport& report) {
  nlohmann::json j;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : report.folds) {
    j["folds"].push_back({{"fold", f.fold}, {"best_epoch", f.best_epoch},
                          {"test", nlohmann::json::parse(metrics_to_json(f.test))}});
  }
  auto ms = [](const std::optional<eval::MeanStd>& m) {
    return m ? nlohmann::json{{"mean", m->mean}, {"std", m->std}} : nlohmann::json(nullptr);
  };
  j["summary"] = {{"auc", ms(report.auc)}, {"auprc", ms(report.auprc)}, {"mae", ms(report.mae)}};
  return j.dump();
}

std::string git_revision() {
  std::string out;
  if (FILE* pipe = popen("git rev-parse HEAD 2>/dev/null", "r")) {
    char buf[128];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
    pclose(pipe);
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

void write_run_manifest(const std::filesystem::path& path, const ExperimentConfig& config, const CvReport& report,
                        const std::string& model_kind) {
  nlohmann::json j;
  j["model"] = model_kind;
  j["config"] = nlohmann::json::parse(to_json(config));
  j["seed"] = config.seed;
  j["git_revision"] = git_revision();
  j["optimizer"] = "RAdam";
  j["per_epoch"] = nlohmann::json::object();
  for (const auto& f : report.folds) {
    j["per_epoch"][std::to_string(f.fold)] = nlohmann::json::parse(history_to_json(f.history));
  }
  j["metrics"] = nlohmann::json::parse(report_to_json(report));
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

}  // namespace ugss::train
