#include "hest/app.hpp"

#include "hest/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace hest {

namespace {

using nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double homography_cov_trace(const BeliefState& b) { return b.cov.topLeftCorner<8, 8>().trace(); }

StepRecord make_record(double t, const BeliefState& est, const TruthSample* truth, std::vector<double> weights) {
  StepRecord rec;
  rec.t = t;
  rec.mode_weights = std::move(weights);
  rec.cov_trace = homography_cov_trace(est);
  if (truth == nullptr) {
    rec.r_k = kNaN;
    rec.nees = kNaN;
    return rec;
  }
  const HomographyError err = homography_error(est.mean.H, truth->H);
  rec.r_k = err.r;
  rec.diverged = err.diverged;
  if (err.diverged) {
    rec.nees = kNaN;
    return rec;
  }
  try {
    rec.nees = nees(log_vee(est.mean.H * truth->H.inverse(), LogOptions{0.0}), est.cov.topLeftCorner<8, 8>());
  } catch (const Error&) {
    rec.nees = kNaN;
    rec.diverged = true;
  }
  return rec;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(row);
  }
  return rows;
}

// JSON has no NaN; missing values become null.
ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kEkfTight:
      return "ekf_tight";
    case EstimatorKind::kEkfLoose:
      return "ekf_loose";
    case EstimatorKind::kImm:
      return "imm";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view name) {
  if (name == "ekf_tight") {
    return EstimatorKind::kEkfTight;
  }
  if (name == "ekf_loose") {
    return EstimatorKind::kEkfLoose;
  }
  if (name == "imm") {
    return EstimatorKind::kImm;
  }
  throw ConfigError("unknown estimator '" + std::string(name) + "' (expected ekf_tight, ekf_loose or imm)");
}

Eigen::MatrixXd default_transition(std::size_t n_modes, double stay) {
  const auto n = static_cast<Eigen::Index>(n_modes);
  if (n == 1) {
    return Eigen::MatrixXd::Identity(1, 1);
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(n, n, (1.0 - stay) / static_cast<double>(n - 1));
  p.diagonal().setConstant(stay);
  return p;
}

RunConfig RunConfig::defaults_for(EstimatorKind kind) {
  RunConfig c;
  c.estimator = kind;
  switch (kind) {
    case EstimatorKind::kEkfTight:
      c.sigma_m2 = {1e-7};
      break;
    case EstimatorKind::kEkfLoose:
      c.sigma_m2 = {1e-1};
      break;
    case EstimatorKind::kImm:
      c.sigma_m2 = {1e-7, 1e-1};
      break;
  }
  c.transition = default_transition(c.sigma_m2.size());
  return c;
}

void RunConfig::validate() const {
  if (estimator == EstimatorKind::kImm) {
    if (sigma_m2.size() < 2) {
      throw ConfigError("imm requires at least two sigma_m2 values");
    }
    imm().validate();
  } else {
    if (sigma_m2.size() != 1) {
      throw ConfigError(to_string(estimator) + " takes exactly one sigma_m2 value");
    }
    iekf().validate();
  }
  if (!(p0 > 0.0)) {
    throw ConfigError("p0 must be positive");
  }
  if (n_monte_carlo < 1) {
    throw ConfigError("the number of Monte Carlo runs must be at least 1");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("confidence must lie in (0, 1)");
  }
}

IekfConfig RunConfig::iekf() const {
  IekfConfig c;
  c.noise.sigma_g = sigma_g;
  c.noise.sigma_r = sigma_r;
  c.noise.sigma_m2 = sigma_m2.empty() ? 0.0 : sigma_m2.front();
  c.max_gn_iters = max_gn_iters;
  c.gn_tol = gn_tol;
  c.robust_c = robust_c;
  c.robust = robust;
  c.robust_likelihood = robust_likelihood;
  c.discretization = discretization;
  return c;
}

ImmConfig RunConfig::imm() const {
  ImmConfig c;
  c.mode_sigmas = sigma_m2;
  c.transition = transition;
  c.base = iekf();
  c.output = imm_output;
  return c;
}

Estimator::Estimator(const RunConfig& cfg, const BeliefState& initial)
    : cfg_(cfg), iekf_(cfg.iekf()), ekf_(initial) {
  if (cfg_.estimator == EstimatorKind::kImm) {
    imm_cfg_ = cfg_.imm();
    imm_ = imm_init(initial, imm_cfg_);
  }
}

void Estimator::step(std::span<const GyroSegment> segments, const FeatureFrame& frame, const CameraIntrinsics& K) {
  if (cfg_.estimator == EstimatorKind::kImm) {
    ImmStepResult r = imm_step(imm_, segments, frame, K, imm_cfg_);
    imm_ = std::move(r.state);
    diag_ = r.diagnostics;
    return;
  }
  for (const GyroSegment& seg : segments) {
    ekf_ = ekf_predict(ekf_, GyroSample{ekf_.mean.t, seg.omega}, seg.dt, iekf_);
  }
  ekf_ = ekf_correct(ekf_, frame, K, iekf_).belief;
}

BeliefState Estimator::output() const {
  if (cfg_.estimator == EstimatorKind::kImm) {
    return imm_output(imm_, imm_cfg_);
  }
  return ekf_;
}

std::vector<double> Estimator::weights() const {
  if (cfg_.estimator == EstimatorKind::kImm) {
    return std::vector<double>(imm_.weights.data(), imm_.weights.data() + imm_.weights.size());
  }
  return {1.0};
}

BeliefState initial_belief(const SimDataset& data, const RunConfig& cfg, std::uint64_t seed) {
  BeliefState b;
  b.cov = cfg.p0 * StateCovariance::Identity();
  if (data.truth.empty()) {
    b.mean.t = data.gyro.empty() ? 0.0 : data.gyro.front().t;
    return b;
  }
  const TruthSample& t0 = data.truth.front();
  b.mean = FilterState{t0.H, t0.Gamma, t0.t};
  if (cfg.truth_init) {
    return b;
  }
  std::mt19937_64 rng(seed ^ 0x1a2b3c4d5e6f7081ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector16d delta;
  for (int i = 0; i < 16; ++i) {
    delta(i) = std::sqrt(cfg.p0) * normal(rng);
  }
  b.mean = retract(b.mean, delta);
  return b;
}

TrialOutput run_trial(const SimDataset& data, const CameraIntrinsics& K, const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrialOutput out;
  out.report.steps.reserve(data.frames.size());
  out.estimates.reserve(data.frames.size());

  const BeliefState init = initial_belief(data, cfg, seed);
  Estimator est(cfg, init);
  double t_prev = init.mean.t;
  bool failed = false;
  BeliefState last = init;
  for (const FeatureFrame& frame : data.frames) {
    const TruthSample* truth = data.truth.empty() ? nullptr : truth_at(data, frame.t);
    if (!failed) {
      try {
        const std::vector<GyroSegment> segs = gyro_segments(data.gyro, t_prev, frame.t);
        est.step(segs, frame, K);
        last = est.output();
        if (!covariance_is_valid(last.cov)) {
          failed = true;
        }
      } catch (const Error&) {
        failed = true;
      }
    }
    t_prev = frame.t;
    StepRecord rec;
    if (failed) {
      rec.t = frame.t;
      rec.r_k = data.truth.empty() ? kNaN : kDivergenceSentinel;
      rec.nees = kNaN;
      rec.cov_trace = kNaN;
      rec.diverged = true;
      rec.mode_weights = est.weights();
    } else {
      rec = make_record(frame.t, last, truth, est.weights());
    }
    out.report.steps.push_back(std::move(rec));
    out.estimates.push_back(last);
  }
  finalize_trial(out.report, cfg.confidence);
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<MonteCarloResult> run_monte_carlo(const SimDataset& truth, const MeasurementOptions& measurements,
                                              std::span<const RunConfig> configs, std::uint64_t master_seed,
                                              int n_runs, int threads) {
  if (n_runs < 1) {
    throw ConfigError("montecarlo: at least one run is required");
  }
  for (const RunConfig& c : configs) {
    c.validate();
  }
  const auto n = static_cast<std::size_t>(n_runs);
  std::vector<MonteCarloResult> results(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    results[c].config = configs[c];
    results[c].runs.resize(n);
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) {
        return;
      }
      try {
        const std::uint64_t seed = derive_seed(master_seed, i);
        MeasurementOptions opts = measurements;
        opts.seed = seed;
        const SimDataset data = synthesize_measurements(truth, opts);
        for (std::size_t c = 0; c < configs.size(); ++c) {
          results[c].runs[i] = run_trial(data, measurements.K, configs[c], seed).report;
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next.store(n);
      }
    }
  };

  unsigned count = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  count = std::min<unsigned>(count, static_cast<unsigned>(n));
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(count);
    for (unsigned k = 0; k < count; ++k) {
      pool.emplace_back(worker);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
  for (MonteCarloResult& r : results) {
    r.summary = aggregate(r.runs, r.config.confidence);
  }
  return results;
}

std::string summary_json(const MonteCarloResult& result, const ScenarioInfo& scenario) {
  const RunConfig& c = result.config;
  ordered_json j;
  j["format"] = "hest-summary";
  j["version"] = 1;

  ordered_json cfg;
  cfg["estimator"] = to_string(c.estimator);
  cfg["sigma_m2"] = c.sigma_m2;
  cfg["transition"] = matrix_json(c.transition);
  cfg["sigma_g"] = c.sigma_g;
  cfg["sigma_r"] = c.sigma_r;
  cfg["robust_c"] = c.robust_c;
  cfg["robust"] = c.robust;
  cfg["robust_likelihood"] = c.robust_likelihood;
  cfg["max_gn_iters"] = c.max_gn_iters;
  cfg["gn_tol"] = c.gn_tol;
  cfg["discretization"] = c.discretization == DiscretizationMethod::kVanLoan ? "van_loan" : "first_order";
  cfg["imm_output"] = c.imm_output == ImmOutput::kFused ? "fused" : "max_weight";
  cfg["p0"] = c.p0;
  cfg["truth_init"] = c.truth_init;
  cfg["seed"] = c.seed;
  cfg["n_monte_carlo"] = c.n_monte_carlo;
  cfg["confidence"] = c.confidence;
  cfg["seed_derivation"] = "splitmix64(master + 0x9e3779b97f4a7c15 * (index + 1))";
  j["config"] = cfg;

  ordered_json sc;
  sc["source"] = scenario.source;
  sc["duration"] = scenario.duration;
  sc["gyro_rate"] = scenario.gyro_rate;
  sc["cam_rate"] = scenario.cam_rate;
  sc["n_points"] = scenario.n_points;
  sc["outlier_fraction"] = scenario.outlier_fraction;
  ordered_json occ = ordered_json::array();
  for (const OcclusionWindow& w : scenario.occlusions) {
    occ.push_back({{"start", w.start}, {"end", w.end}, {"min_visible", w.min_visible}});
  }
  sc["occlusions"] = occ;
  j["scenario"] = sc;

  const AggregateSummary& s = result.summary;
  ordered_json res;
  res["n_runs"] = s.n_runs;
  res["mean_r"] = number_or_null(s.mean_r);
  res["std_r"] = number_or_null(s.std_r);
  res["nees_band"] = {number_or_null(s.band_lo), number_or_null(s.band_hi)};
  res["nees_in_band_fraction"] = number_or_null(s.nees_in_band_fraction);
  res["diverged_runs"] = s.diverged_runs;
  ordered_json per_run = ordered_json::array();
  for (const TrialReport& r : result.runs) {
    per_run.push_back(number_or_null(r.mean_r));
  }
  res["per_run_mean_r"] = per_run;
  j["results"] = res;
  return j.dump(2) + "\n";
}

void write_estimates_csv(const std::filesystem::path& path, const std::vector<BeliefState>& estimates) {
  std::string text = "t,h00,h01,h02,h10,h11,h12,h20,h21,h22,g00,g01,g02,g10,g11,g12,g20,g21,g22,cov_trace\n";
  for (const BeliefState& b : estimates) {
    text += format_double(b.mean.t);
    for (int k = 0; k < 9; ++k) {
      text += ',' + format_double(b.mean.H.matrix()(k / 3, k % 3));
    }
    for (int k = 0; k < 9; ++k) {
      text += ',' + format_double(b.mean.Gamma(k / 3, k % 3));
    }
    text += ',' + format_double(homography_cov_trace(b)) + '\n';
  }
  write_text_file(path, text);
}

}  // namespace hest
