#pragma once

#include <Eigen/Dense>

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mfoc/control_opt.hpp"
#include "mfoc/mckean.hpp"
#include "mfoc/problem.hpp"

namespace mfoc {

struct StudyCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Machine-readable outcome of one study. Runtime is kept out of the JSON so
/// reruns are byte-identical.
struct StudyReport {
  std::string kind;
  std::uint64_t seed = 0;
  nlohmann::json config;   // echo of every parameter, filled by the caller
  nlohmann::json points = nlohmann::json::array();
  nlohmann::json fits = nlohmann::json::object();
  std::vector<StudyCheck> checks;
  std::string csv;         // per-point data table
  double runtime_seconds = 0.0;

  bool passed() const;
};

nlohmann::json to_json(const StudyReport& report);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares fit of log(y) against log(x).
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

/// Exact W1 between a 1D measure and N(mean, sd^2) via the CDF integral.
double w1_to_normal_1d(const EmpiricalMeasure& mu, double mean, double sd);

struct ChaosStudyOptions {
  std::vector<Eigen::Index> followers{16, 64, 256, 1024};
  int replicates = 10;
  int realizations = 32;                // per replicate, averaged
  Eigen::Index reference_samples = 32768;
  double max_slope = -0.35;
  MckeanOptions mckean;                 // tol and max_iter of the reference solve
  unsigned threads = 1;
};

/// Couples the particle system with copies of the limit SDE (same initial
/// points and Brownian streams) for each M and reports
/// E[max_i sup_t |X_i - X~_i|] and the leader analogue, a log-log slope, and
/// the gap between finite-particle and mean-field costs. Zero controls.
StudyReport run_chaos_study(const ProblemSpec& problem, const ChaosStudyOptions& options);

struct GammaStudyOptions {
  std::vector<Eigen::Index> leaders{2, 4, 8, 16};
};

/// Minimizes the configured objective for each leader count (leader initial
/// points drawn from a fixed law, nested in m) and checks the Cauchy-type
/// trend of the minima.
StudyReport run_gamma_study(const OptProblem& base, const GammaStudyOptions& options);

struct StabilityStudyOptions {
  std::vector<double> scales{0.1, 0.2, 0.4};
  double max_ratio_spread = 1.5;
  MckeanOptions mckean;
  unsigned threads = 1;
};

/// Translates the zero-control leader flow by scale * e_1 and reports
/// sup_t E|X^1 - X^2| / int W1(nu^1, nu^2) dt under common noise.
StudyReport run_stability_study(const ProblemSpec& problem, const StabilityStudyOptions& options);

struct FpLevel {
  Eigen::Index samples = 1000;
  Eigen::Index cells = 100;
};

struct FpCheckOptions {
  std::vector<FpLevel> levels{{1000, 100}, {4000, 200}, {10000, 400}};
  double x_min = -5.0;
  double x_max = 5.0;
  std::optional<double> reference_mean;      // Gaussian reference at t = T
  std::optional<double> reference_variance;
  double max_w1 = 0.05;
  MckeanOptions mckean;
  unsigned threads = 1;
};

/// W1 between the quantized grid density and the particle law at T/2 and T on
/// each refinement level, plus an optional Gaussian reference at T. d = 1.
StudyReport run_fp_crosscheck(const ProblemSpec& problem, const FpCheckOptions& options);

}  // namespace mfoc
