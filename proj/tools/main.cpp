#include "plot_svg.hpp"

#include <ugss/baselines.hpp>
#include <ugss/container.hpp>
#include <ugss/ingestion.hpp>
#include <ugss/training.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ugss;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

void print_summary(const train::CvReport& report) {
  for (const auto& f : report.folds) {
    std::cout << "fold " << f.fold << ": " << train::metrics_to_json(f.test) << "\n";
  }
  auto line = [](const char* name, const std::optional<eval::MeanStd>& m) {
    if (m) std::cout << name << " " << m->mean << " +/- " << m->std << "\n";
  };
  line("auc", report.auc);
  line("auprc", report.auprc);
  line("mae", report.mae);
}

fs::path fold_file(const fs::path& run, int fold, const char* suffix) {
  return run / ("fold" + std::to_string(fold) + suffix);
}

// Normalises and masks data for a stored model unless that was already done.
Dataset prepare_for_model(Dataset data, const std::vector<VariableSpec>& specs, const ExperimentConfig& config) {
  data = train::ensure_masked(data, config.masking_ratio, config.seed);
  if (data.normalization.empty() && !specs.empty()) data = ingest::apply_preprocessor(data, specs);
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ugss: uncertainty-gated stochastic sequential imputation and mortality prediction"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log per-epoch progress");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert raw data into the container format");
  ingest->require_subcommand(1);
  auto* physionet = ingest->add_subcommand("physionet", "PhysioNet 2012 record directory");
  std::string pn_dir, pn_out, pn_manifest, pn_outcomes;
  int grid_hours = 1, horizon_hours = 48;
  physionet->add_option("--dir", pn_dir, "Directory of <RecordID>.txt files")->required();
  physionet->add_option("--out", pn_out, "Output container")->required();
  physionet->add_option("--manifest", pn_manifest, "Variable manifest JSON");
  physionet->add_option("--outcomes", pn_outcomes, "Outcomes file");
  physionet->add_option("--grid-hours", grid_hours, "Bucket width in hours");
  physionet->add_option("--horizon-hours", horizon_hours, "Observation window in hours");

  auto* synthetic = ingest->add_subcommand("synthetic", "Generate a synthetic dataset");
  std::string syn_spec, syn_out;
  synthetic->add_option("--spec", syn_spec, "Generator spec JSON")->required();
  synthetic->add_option("--out", syn_out, "Output container")->required();

  auto* matrix = ingest->add_subcommand("matrix", "Merge pre-gridded containers from a directory");
  std::string mx_dir, mx_out;
  matrix->add_option("--dir", mx_dir, "Directory of *.ugss files")->required();
  matrix->add_option("--out", mx_out, "Output container")->required();

  // train
  auto* trn = app.add_subcommand("train", "Cross-validated training");
  std::string cfg_path, data_path, run_dir;
  trn->add_option("--config", cfg_path, "ExperimentConfig JSON")->required();
  trn->add_option("--data", data_path, "Dataset container")->required();
  trn->add_option("--out", run_dir, "Run directory")->required();

  // evaluate
  auto* evl = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  std::string ckpt_path, eval_data, eval_out;
  evl->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  evl->add_option("--data", eval_data, "Dataset container")->required();
  evl->add_option("--out", eval_out, "Write metrics JSON here");

  // baseline
  auto* bsl = app.add_subcommand("baseline", "Zero/mean-impute GRU baseline");
  std::string method = "mean", b_cfg, b_data, b_out;
  bsl->add_option("--method", method, "zero or mean")->check(CLI::IsMember({"zero", "mean"}));
  bsl->add_option("--config", b_cfg, "ExperimentConfig JSON")->required();
  bsl->add_option("--data", b_data, "Dataset container")->required();
  bsl->add_option("--out", b_out, "Run directory")->required();

  // plot
  auto* plt = app.add_subcommand("plot", "Imputation figure for one sample of a run");
  std::string plot_run, plot_out;
  std::int64_t sample_id = 0;
  plt->add_option("--run", plot_run, "Run directory from `ugss train`")->required();
  plt->add_option("--sample-id", sample_id, "Record id")->required();
  plt->add_option("--out", plot_out, "Output directory (default: run directory)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (physionet->parsed()) {
      ingest::PhysioNetOptions opt;
      opt.grid_hours = grid_hours;
      opt.horizon_hours = horizon_hours;
      if (!pn_manifest.empty()) opt.variables = ingest::load_variable_manifest(pn_manifest);
      if (!pn_outcomes.empty()) opt.outcomes = fs::path(pn_outcomes);
      const auto r = ingest::load_physionet(pn_dir, opt);
      save_dataset(r.data, pn_out);
      const auto& s = r.summary;
      std::cout << "records " << s.records_seen << ", kept " << r.data.size() << " (positives " << s.positives
                << "), dropped: no observations " << s.dropped_no_observations << ", no outcome "
                << s.dropped_no_outcome << "; malformed rows " << s.malformed_rows << ", invalid values "
                << s.invalid_values << "; missing rate " << s.missing_rate << "\n";
    } else if (synthetic->parsed()) {
      const auto spec = ingest::parse_synthetic_spec(read_file(syn_spec));
      const Dataset d = ingest::generate_synthetic(spec);
      save_dataset(d, syn_out);
      std::cout << "samples " << d.size() << ", positives " << d.positives() << ", missing rate "
                << d.missing_rate() << "\n";
    } else if (matrix->parsed()) {
      const Dataset d = ingest::load_gridded_matrix(mx_dir);
      save_dataset(d, mx_out);
      std::cout << "samples " << d.size() << ", variables " << d.dims() << "\n";
    } else if (trn->parsed()) {
      const ExperimentConfig config = parse_config(read_file(cfg_path));
      const Dataset raw = load_dataset(data_path);
      fs::create_directories(run_dir);
      const Dataset masked = train::ensure_masked(raw, config.masking_ratio, config.seed);
      std::vector<int> labels;
      for (const auto& s : masked.samples) labels.push_back(s.label);
      write_file(fs::path(run_dir) / "folds.json",
                 train::folds_to_json(train::make_folds(labels, config.folds, config.val_fraction, config.seed)));
      const auto report = train::cross_validate(
          config, raw,
          [&](int k, const train::TrainResult& tr, const train::PreparedFold& fold, const train::FoldReport&) {
            train::save_checkpoint(fold_file(run_dir, k, ".ckpt"), tr.model, fold.test.variable_names, fold.specs);
            save_dataset(fold.test, fold_file(run_dir, k, "_test.ugss"));
            spdlog::info("fold {} done (best epoch {})", k, tr.best_epoch);
          },
          [](const train::EpochRecord& r) {
            spdlog::debug("epoch {} loss {:.5g} cons {:.4g} val_auc {:.4f}", r.epoch, r.loss.total, r.loss.cons[0],
                          r.val_auc);
          });
      train::write_run_manifest(fs::path(run_dir) / "manifest.json", config, report, "ugss");
      write_file(fs::path(run_dir) / "metrics.json", train::report_to_json(report));
      print_summary(report);
    } else if (evl->parsed()) {
      const auto ck = train::load_checkpoint(ckpt_path);
      const Dataset data = prepare_for_model(load_dataset(eval_data), ck.normalization, ck.config);
      const auto m = train::evaluate_model(*ck.model, data);
      const std::string js = train::metrics_to_json(m);
      if (!eval_out.empty()) write_file(eval_out, js + "\n");
      std::cout << js << "\n";
    } else if (bsl->parsed()) {
      const ExperimentConfig config = parse_config(read_file(b_cfg));
      const auto m = baseline::parse_method(method);
      const Dataset raw = load_dataset(b_data);
      fs::create_directories(b_out);
      const auto report = baseline::baseline_cross_validate(
          config, m, raw,
          [&](int k, const baseline::BaselineResult& br, const train::PreparedFold& fold, const train::FoldReport&) {
            baseline::save_baseline(fold_file(b_out, k, ".ckpt"), br.model, fold.test.variable_names, fold.specs,
                                    config);
          });
      train::write_run_manifest(fs::path(b_out) / "manifest.json", config, report, "gru-" + method);
      write_file(fs::path(b_out) / "metrics.json", train::report_to_json(report));
      print_summary(report);
    } else if (plt->parsed()) {
      const fs::path run(plot_run);
      const fs::path out_dir = plot_out.empty() ? run : fs::path(plot_out);
      for (int k = 0;; ++k) {
        const fs::path test = fold_file(run, k, "_test.ugss");
        if (!fs::exists(test)) break;
        const Dataset data = load_dataset(test);
        for (std::size_t i = 0; i < data.size(); ++i) {
          if (data.samples[i].record_id != sample_id) continue;
          const auto ck = train::load_checkpoint(fold_file(run, k, ".ckpt"));
          const Dataset one = subset(data, std::vector<std::size_t>{i});
          const auto pred = train::predict(*ck.model, one, 1);
          const std::string js = eval::imputation_plot_data(one.samples[0], pred[0].x_hat, pred[0].uncertainty,
                                                            one.variable_names, pred[0].probability);
          fs::create_directories(out_dir);
          const std::string stem = "plot_" + std::to_string(sample_id);
          write_file(out_dir / (stem + ".json"), js + "\n");
          write_file(out_dir / (stem + ".svg"), cli::render_plot_svg(js));
          std::cout << (out_dir / (stem + ".svg")).string() << "\n";
          return 0;
        }
      }
      throw std::runtime_error("record " + std::to_string(sample_id) + " is not in any test fold of the run");
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
