// hest: simulate datasets, run filters, Monte Carlo batches and reports.

#include "hest/app.hpp"
#include "hest/errors.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

struct ScenarioArgs {
  std::string preset = "traj1";
  double duration = 0.0;  // 0 keeps the preset duration
  double gyro_rate = 90.0;
  double cam_rate = 30.0;
  int n_points = 4;
  double outlier_fraction = 0.0;
  double outlier_px = 100.0;
  std::vector<std::string> occlusions;
};

struct RunArgs {
  std::string estimator = "ekf_tight";
  std::vector<double> sigma_m2;
  std::string transition;
  double sigma_g = 0.01;
  double sigma_r = 1.0;
  double robust_c = 9.5;
  bool no_robust = false;
  bool robust_likelihood = false;
  bool max_weight = false;
  bool first_order = false;
  double p0 = 0.1;
  bool truth_init = false;
  std::uint64_t seed = 1;
};

void add_scenario_options(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("--preset", a.preset, "Trajectory preset (traj1..traj8)");
  cmd->add_option("--duration", a.duration, "Override the preset duration in seconds");
  cmd->add_option("--gyro-rate", a.gyro_rate, "Gyro rate in Hz")->check(CLI::PositiveNumber);
  cmd->add_option("--cam-rate", a.cam_rate, "Camera rate in Hz")->check(CLI::PositiveNumber);
  cmd->add_option("--n-points", a.n_points, "Number of tracked plane points")->check(CLI::Range(4, 10000));
  cmd->add_option("--outliers", a.outlier_fraction, "Fraction of gross pixel outliers")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--outlier-px", a.outlier_px, "Outlier displacement in pixels");
  cmd->add_option("--occlusion", a.occlusions, "Occlusion window START:END[:MIN_VISIBLE] (repeatable)");
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--estimator", a.estimator, "ekf_tight, ekf_loose or imm")
      ->check(CLI::IsMember({"ekf_tight", "ekf_loose", "imm"}));
  cmd->add_option("--sigma-m2", a.sigma_m2, "Model-confidence PSD; one value per IMM mode (e.g. 1e-7,0.1)")->delimiter(',');
  cmd->add_option("--transition", a.transition, "IMM transition matrix, rows split by ';' (e.g. 0.9,0.1;0.1,0.9)");
  cmd->add_option("--sigma-g", a.sigma_g, "Gyro noise PSD root (rad/s/sqrt(Hz))");
  cmd->add_option("--sigma-r", a.sigma_r, "Pixel noise standard deviation");
  cmd->add_option("--robust-c", a.robust_c, "SC/DCS threshold")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-robust", a.no_robust, "Disable the SC/DCS robust loss");
  cmd->add_flag("--robust-likelihood", a.robust_likelihood,
                "Fold robust weights into the IMM measurement likelihood");
  cmd->add_flag("--max-weight", a.max_weight, "Report the highest-weight IMM mode instead of the mixture");
  cmd->add_flag("--first-order", a.first_order, "First-order discretization instead of Van Loan");
  cmd->add_option("--p0", a.p0, "Initial covariance scale")->check(CLI::PositiveNumber);
  cmd->add_flag("--truth-init", a.truth_init, "Initialize at the true state");
  cmd->add_option("--seed", a.seed, "Master seed");
}

std::vector<double> parse_row(const std::string& text) {
  std::vector<double> row;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      row.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw hest::ConfigError("malformed number '" + item + "'");
    }
  }
  return row;
}

Eigen::MatrixXd parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    rows.push_back(parse_row(row));
  }
  if (rows.empty()) {
    throw hest::ConfigError("empty transition matrix");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw hest::ConfigError("transition matrix rows differ in length");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

hest::OcclusionWindow parse_occlusion(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    parts.push_back(parse_row(item).at(0));
  }
  if (parts.size() < 2 || parts.size() > 3) {
    throw hest::ConfigError("occlusion must be START:END[:MIN_VISIBLE], got '" + text + "'");
  }
  hest::OcclusionWindow w;
  w.start = parts[0];
  w.end = parts[1];
  w.min_visible = parts.size() == 3 ? static_cast<int>(parts[2]) : 0;
  return w;
}

hest::RunConfig resolve_run(const RunArgs& a, int n_runs) {
  hest::RunConfig c = hest::RunConfig::defaults_for(hest::parse_estimator(a.estimator));
  if (!a.sigma_m2.empty()) {
    c.sigma_m2 = a.sigma_m2;
    c.transition = hest::default_transition(c.sigma_m2.size());
  }
  if (!a.transition.empty()) {
    c.transition = parse_matrix(a.transition);
  }
  c.sigma_g = a.sigma_g;
  c.sigma_r = a.sigma_r;
  c.robust_c = a.robust_c;
  c.robust = !a.no_robust;
  c.robust_likelihood = a.robust_likelihood;
  c.imm_output = a.max_weight ? hest::ImmOutput::kMaxWeight : hest::ImmOutput::kFused;
  c.discretization = a.first_order ? hest::DiscretizationMethod::kFirstOrder : hest::DiscretizationMethod::kVanLoan;
  c.p0 = a.p0;
  c.truth_init = a.truth_init;
  c.seed = a.seed;
  c.n_monte_carlo = n_runs;
  c.validate();
  return c;
}

struct ResolvedScenario {
  hest::TrajectorySpec spec;
  hest::MeasurementOptions measurements;
  hest::ScenarioInfo info;
};

ResolvedScenario resolve_scenario(const ScenarioArgs& a, double sigma_g, double sigma_r) {
  ResolvedScenario r;
  r.spec = hest::trajectory_preset(a.preset);
  if (a.duration > 0.0) {
    r.spec.duration = a.duration;
  } else if (a.duration < 0.0) {
    throw hest::ConfigError("duration must be positive");
  }
  r.spec.gyro_rate = a.gyro_rate;
  r.spec.cam_rate = a.cam_rate;
  r.spec.validate();
  r.measurements.noise.sigma_g = sigma_g;
  r.measurements.noise.sigma_r = sigma_r;
  r.measurements.n_points = a.n_points;
  r.measurements.outlier_fraction = a.outlier_fraction;
  r.measurements.outlier_px = a.outlier_px;
  for (const std::string& o : a.occlusions) {
    r.measurements.occlusions.push_back(parse_occlusion(o));
  }
  r.measurements.validate();
  r.info.source = a.preset;
  r.info.duration = r.spec.duration;
  r.info.gyro_rate = r.spec.gyro_rate;
  r.info.cam_rate = r.spec.cam_rate;
  r.info.n_points = a.n_points;
  r.info.outlier_fraction = a.outlier_fraction;
  r.info.occlusions = r.measurements.occlusions;
  return r;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw hest::IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
}

void print_result_line(const hest::MonteCarloResult& r) {
  std::printf("%s: runs=%zu mean_r=%.6g std_r=%.3g nees_in_band=%.3f diverged=%zu\n",
              hest::to_string(r.config.estimator).c_str(), r.summary.n_runs, r.summary.mean_r, r.summary.std_r,
              r.summary.nees_in_band_fraction, r.summary.diverged_runs);
}

int cmd_report(const std::vector<std::string>& files) {
  struct Row {
    std::string file;
    std::string estimator;
    std::string source;
    double mean_r;
    double in_band;
    std::size_t runs;
  };
  std::vector<Row> rows;
  for (const std::string& f : files) {
    std::ifstream in(f);
    if (!in) {
      throw hest::IoError("cannot open '" + f + "'");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      const auto& res = j.at("results");
      rows.push_back({f, j.at("config").at("estimator").get<std::string>(),
                      j.at("scenario").at("source").get<std::string>(),
                      res.at("mean_r").is_null() ? std::nan("") : res.at("mean_r").get<double>(),
                      res.at("nees_in_band_fraction").is_null() ? std::nan("")
                                                                : res.at("nees_in_band_fraction").get<double>(),
                      res.at("n_runs").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw hest::ParseError(f, 0, e.what());
    }
  }
  std::printf("%-10s %-10s %6s %12s %10s %10s\n", "source", "estimator", "runs", "mean_r", "in_band", "diff_vs_imm");
  for (const Row& r : rows) {
    std::string diff = "-";
    if (r.estimator != "imm") {
      for (const Row& other : rows) {
        if (other.estimator == "imm" && other.source == r.source && r.mean_r != 0.0) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * hest::percent_diff(r.mean_r, other.mean_r));
          diff = buf;
          break;
        }
      }
    }
    std::printf("%-10s %-10s %6zu %12.6g %10.3f %10s\n", r.source.c_str(), r.estimator.c_str(), r.runs, r.mean_r,
                r.in_band, diff.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homography estimation on SL(3) from gyro and feature measurements"};
  app.require_subcommand(1);

  ScenarioArgs sim_args;
  std::string sim_out = "dataset";
  std::uint64_t sim_seed = 1;
  double sim_sigma_g = 0.01;
  double sim_sigma_r = 1.0;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a simulated dataset");
  add_scenario_options(simulate, sim_args);
  simulate->add_option("--seed", sim_seed, "Master seed; the data match run 0 of a montecarlo batch with the same seed");
  simulate->add_option("--sigma-g", sim_sigma_g, "Gyro noise PSD root (rad/s/sqrt(Hz))");
  simulate->add_option("--sigma-r", sim_sigma_r, "Pixel noise standard deviation");
  simulate->add_option("--out", sim_out, "Output directory");

  RunArgs filter_args;
  std::string filter_dataset;
  std::string filter_out = "filter_out";
  CLI::App* filter = app.add_subcommand("filter", "Run an estimator over a dataset");
  filter->add_option("--dataset", filter_dataset, "Path to manifest.json")->required();
  add_run_options(filter, filter_args);
  filter->add_option("--out", filter_out, "Output directory");

  ScenarioArgs mc_scenario;
  RunArgs mc_args;
  int mc_runs = 100;
  int mc_threads = 0;
  std::string mc_out = "montecarlo_out";
  CLI::App* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo batch on a simulated preset");
  add_scenario_options(montecarlo, mc_scenario);
  add_run_options(montecarlo, mc_args);
  montecarlo->add_option("--runs", mc_runs, "Number of runs")->check(CLI::PositiveNumber);
  montecarlo->add_option("--threads", mc_threads, "Worker threads (0 = hardware concurrency)");
  montecarlo->add_option("--out", mc_out, "Output directory");

  std::vector<std::string> report_files;
  CLI::App* report = app.add_subcommand("report", "Tabulate summary files");
  report->add_option("summaries", report_files, "summary.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) {
      const ResolvedScenario sc = resolve_scenario(sim_args, sim_sigma_g, sim_sigma_r);
      hest::MeasurementOptions opts = sc.measurements;
      opts.seed = hest::derive_seed(sim_seed, 0);
      const hest::SimDataset truth = hest::generate_trajectory(sc.spec);
      const hest::SimDataset data = hest::synthesize_measurements(truth, opts);
      hest::DatasetManifest manifest;
      manifest.intrinsics = opts.K;
      manifest.gyro_rate = sc.spec.gyro_rate;
      manifest.cam_rate = sc.spec.cam_rate;
      manifest.noise = opts.noise;
      hest::write_dataset(data, manifest, sim_out);
      std::printf("preset=%s duration=%.6g s gyro_samples=%zu frames=%zu max_s_dot_norm=%.6g\n",
                  sim_args.preset.c_str(), sc.spec.duration, data.gyro.size(), data.frames.size(),
                  hest::max_s_dot_norm(data));
      return 0;
    }
    if (*filter) {
      const hest::RunConfig cfg = resolve_run(filter_args, 1);
      const hest::LoadedDataset loaded = hest::read_dataset(filter_dataset);
      for (const std::string& w : loaded.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
      }
      const hest::TrialOutput trial =
          hest::run_trial(loaded.data, loaded.manifest.intrinsics, cfg, hest::derive_seed(cfg.seed, 0));
      ensure_dir(filter_out);
      hest::MonteCarloResult result;
      result.config = cfg;
      result.runs = {trial.report};
      result.summary = hest::aggregate(result.runs, cfg.confidence);
      hest::ScenarioInfo info;
      info.source = filter_dataset;
      info.gyro_rate = loaded.manifest.gyro_rate;
      info.cam_rate = loaded.manifest.cam_rate;
      info.duration = loaded.data.frames.empty() ? 0.0 : loaded.data.frames.back().t;
      hest::write_step_csv(fs::path(filter_out) / "steps.csv", result.runs);
      hest::write_estimates_csv(fs::path(filter_out) / "estimates.csv", trial.estimates);
      hest::write_text_file(fs::path(filter_out) / "summary.json", hest::summary_json(result, info));
      if (loaded.data.truth.empty()) {
        std::printf("%s: %zu frames processed; no truth stream, r_k and NEES unavailable\n",
                    hest::to_string(cfg.estimator).c_str(), trial.estimates.size());
      } else {
        print_result_line(result);
      }
      return 0;
    }
    if (*montecarlo) {
      const hest::RunConfig cfg = resolve_run(mc_args, mc_runs);
      const ResolvedScenario sc = resolve_scenario(mc_scenario, cfg.sigma_g, cfg.sigma_r);
      const hest::SimDataset truth = hest::generate_trajectory(sc.spec);
      const std::vector<hest::RunConfig> configs = {cfg};
      const auto results = hest::run_monte_carlo(truth, sc.measurements, configs, cfg.seed, mc_runs, mc_threads);
      ensure_dir(mc_out);
      hest::write_step_csv(fs::path(mc_out) / "steps.csv", results.front().runs);
      hest::write_text_file(fs::path(mc_out) / "summary.json", hest::summary_json(results.front(), sc.info));
      print_result_line(results.front());
      return 0;
    }
    if (*report) {
      return cmd_report(report_files);
    }
  } catch (const hest::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const hest::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const hest::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const hest::UnsupportedVersionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const hest::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return 0;
}
