// Acceptance suite: one [PASS]/[FAIL] line per criterion 1-10. Study criteria
// run through the CLI so that criterion 10 can compare the written files.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "mfoc/config.hpp"
#include "mfoc/control_opt.hpp"
#include "mfoc/cost.hpp"
#include "mfoc/measures.hpp"
#include "mfoc/particle_sim.hpp"

namespace fs = std::filesystem;
using namespace mfoc;

namespace {

const fs::path kConfigs = MFOC_CONFIG_DIR;
const fs::path kRuns = fs::absolute("acceptance_runs");

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(4) << v;
  return out.str();
}

Verdict within_limit(Verdict v, double seconds, double limit) {
  v.detail += "; runtime " + fmt(seconds) + " s (limit " + fmt(limit) + " s)";
  v.pass = v.pass && seconds < limit;
  return v;
}

// ---------------------------------------------------------------------------
// Criterion 1

double brute_force_w1(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<int> perm(static_cast<std::size_t>(a.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) total += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).norm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.cols());
}

Verdict criterion_w1_oracle() {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> atoms(1, 8), dims(1, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const int n = atoms(gen), d = dims(gen);
    Eigen::MatrixXd a(d, n), b(d, n);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      a(k) = normal(gen);
      b(k) = normal(gen);
    }
    const double solver = wasserstein1(EmpiricalMeasure::uniform(a), EmpiricalMeasure::uniform(b));
    worst = std::max(worst, std::abs(solver - brute_force_w1(a, b)));
  }
  return {worst <= 1e-12, "200 pairs, max |solver - brute force| = " + fmt(worst) + " (tol 1e-12)"};
}

// ---------------------------------------------------------------------------
// Criterion 2

Verdict criterion_brownian_variance() {
  ProblemSpec p;
  p.dim = 1;
  p.horizon = 1.0;
  p.dt = 0.01;
  p.sigma = 0.5;
  p.followers = 10000;
  p.leaders = 0;
  p.follower_init = InitialLaw::gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  p.cost.target = EmpiricalMeasure::dirac(Eigen::VectorXd::Zero(1));
  p.seed = 42;
  const auto controls = ControlSchedule::zeros(1, 0, 1, p.horizon, p.gain);
  const auto traj = simulate_finite(p, controls, p.noise(), 0);
  const Eigen::ArrayXd inc = (traj.followers.back() - traj.followers.front()).row(0).array();
  const double var = (inc - inc.mean()).square().sum() / static_cast<double>(inc.size() - 1);
  return {var >= 0.95 && var <= 1.05, "M = 10^4, sample variance " + fmt(var) + " (accept [0.95, 1.05])"};
}

// ---------------------------------------------------------------------------
// Criterion 6

Verdict criterion_cost_identities() {
  const RunConfig cfg = load_config(kConfigs / "steering.toml");
  ProblemSpec p = cfg.problem;
  p.followers = 100;
  const NoisePlan noise = p.noise();

  const auto zero = ControlSchedule::zeros(1, 1, 4, p.horizon, p.gain);
  const double zero_term = cost_finite(simulate_batch(p, zero, noise, 0, 2, 1), zero, p.cost).control;

  // Quadratic phi: a constant control c costs T |c|^2 whatever the gain.
  const double c = 0.6;
  const auto constant = ControlSchedule::constant(Eigen::MatrixXd::Constant(1, 1, c), 1, p.horizon, p.gain);
  const double constant_term = cost_finite(simulate_batch(p, constant, noise, 0, 2, 1), constant, p.cost).control;
  const double constant_error = std::abs(constant_term - p.horizon * c * c);

  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> leaders(1, 6), dims(1, 3), steps(1, 12);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  CostSpec spec;
  spec.phi = PhiKind::quadratic_weighted;
  double worst = 0.0;
  bool any_coincidence = false;
  for (int instance = 0; instance < 50; ++instance) {
    const int m = leaders(gen), d = dims(gen), n = steps(gen);
    std::vector<double> times(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) times[static_cast<std::size_t>(k)] = 0.1 * k;
    std::vector<Eigen::MatrixXd> values, paths;
    std::vector<double> gains;
    for (int k = 0; k < n; ++k) {
      Eigen::MatrixXd u(d, m), y(d, m);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        u(i) = unit(gen);
        y(i) = 3.0 * unit(gen);
      }
      values.push_back(u);
      paths.push_back(y);
      gains.push_back(unit(gen));
    }
    const ControlSchedule controls(0.1 * n, values, {});
    const auto id = phi_atomic_identity(controls, paths, gains, times, spec);
    // Independent direct side: leader average of phi, left-endpoint rule.
    double direct = 0.0;
    for (int k = 0; k < n; ++k) {
      const double g = gains[static_cast<std::size_t>(k)];
      direct += 0.1 * values[static_cast<std::size_t>(k)].colwise().squaredNorm().mean() * (1.0 + g * g);
    }
    worst = std::max({worst, std::abs(id.atomic - id.direct), std::abs(id.direct - direct)});
    any_coincidence = any_coincidence || id.coincidence;
  }

  const bool pass = zero_term == 0.0 && constant_error <= 1e-12 && worst <= 1e-12 && !any_coincidence;
  return {pass, "zero-control term " + fmt(zero_term) + "; |const - T c^2| = " + fmt(constant_error) +
                    "; atomic identity max gap " + fmt(worst) + " over 50 instances"};
}

// ---------------------------------------------------------------------------
// Criterion 8

Verdict criterion_optimizer() {
  const RunConfig cfg = load_config(kConfigs / "steering.toml");
  const OptResult steering = optimize(cfg.opt_problem());
  const double ratio = steering.cost_value / steering.baseline_cost;

  OptProblem single = cfg.opt_problem();
  single.intervals = 1;
  single.optimize_gain = false;
  single.max_evaluations = 81;
  const double kappa = single.problem.kappa;
  double oracle = std::numeric_limits<double>::infinity(), oracle_u = 0.0;
  for (int k = 0; k <= 40; ++k) {
    const double u = -kappa + k * kappa / 20.0;
    const auto controls =
        ControlSchedule::constant(Eigen::MatrixXd::Constant(1, 1, u), 1, single.problem.horizon, single.problem.gain);
    const double cost = estimate_cost(single, controls).mean;
    if (cost < oracle) {
      oracle = cost;
      oracle_u = u;
    }
  }
  const OptResult found = optimize(single);
  const double rel = found.cost_value / oracle - 1.0;
  return {ratio <= 0.9 && rel <= 0.02,
          "steering optimum / baseline = " + fmt(ratio) + " (<= 0.9); single control " +
              fmt(found.controls.interval(0)(0, 0)) + " costs " + fmt(found.cost_value) + " vs grid " +
              fmt(oracle) + " at u = " + fmt(oracle_u) + ", excess " + fmt(100.0 * rel) + "% (<= 2%)"};
}

// ---------------------------------------------------------------------------
// CLI studies

struct StudyRun {
  bool launched = false;
  int exit_code = -1;
  double seconds = 0.0;
  nlohmann::json summary;
};

StudyRun run_study(const std::string& kind, const std::string& config, int threads, const fs::path& out) {
  StudyRun run;
  const std::string command = std::string(MFOC_CLI_PATH) + " study " + kind + " --config " +
                              (kConfigs / config).string() + " --threads " + std::to_string(threads) +
                              " --out " + out.string() + " > " + (out / (kind + ".log")).string() + " 2>&1";
  fs::create_directories(out);
  const Stopwatch clock;
  const int status = std::system(command.c_str());
  run.seconds = clock.seconds();
  run.launched = WIFEXITED(status);
  run.exit_code = run.launched ? WEXITSTATUS(status) : -1;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.is_directory() && entry.path().filename().string().rfind(kind + "_seed", 0) == 0) {
      std::ifstream in(entry.path() / (entry.path().filename().string() + "_summary.json"));
      if (in) run.summary = nlohmann::json::parse(in, nullptr, false);
    }
  }
  return run;
}

const nlohmann::json* check_named(const StudyRun& run, const std::string& name) {
  if (!run.summary.is_object() || !run.summary.contains("checks")) return nullptr;
  for (const auto& c : run.summary["checks"])
    if (c.value("name", "") == name) return &c;
  return nullptr;
}

Verdict study_checks(const StudyRun& run, const std::vector<std::string>& names) {
  Verdict v{true, ""};
  if (!run.launched || run.summary.is_discarded() || run.summary.is_null()) {
    return {false, "study did not produce a summary (exit code " + std::to_string(run.exit_code) + ")"};
  }
  for (const auto& name : names) {
    const auto* c = check_named(run, name);
    if (!v.detail.empty()) v.detail += "; ";
    if (c == nullptr) {
      v.pass = false;
      v.detail += name + " missing";
      continue;
    }
    v.pass = v.pass && c->at("pass").get<bool>();
    v.detail += name + " " + fmt(c->at("value").get<double>()) + " vs " + fmt(c->at("threshold").get<double>());
  }
  return v;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() == ".log") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    files[fs::relative(entry.path(), dir).string()] = buffer.str();
  }
  return files;
}

Verdict timed(const std::function<Verdict()>& body, double limit) {
  const Stopwatch clock;
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  return within_limit(v, clock.seconds(), limit);
}

void report(int id, const std::string& name, const Verdict& v, bool& all) {
  std::cout << (v.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << " (" << name << "): " << v.detail << std::endl;
  all = all && v.pass;
}

}  // namespace

int main() {
  bool all = true;
  fs::remove_all(kRuns);

  report(1, "W1 oracle equivalence", timed(criterion_w1_oracle, 10.0), all);
  report(2, "Brownian variance", timed(criterion_brownian_variance, 5.0), all);

  const fs::path serial = kRuns / "threads1", wide = kRuns / "threads8";
  const StudyRun fp = run_study("fpcheck", "fpcheck.toml", 1, serial);
  report(3, "OU stationarity",
         within_limit(study_checks(fp, {"finest_fp_vs_particles", "particles_vs_reference", "fp_vs_reference"}),
                      fp.seconds, 60.0),
         all);

  const StudyRun chaos = run_study("chaos", "chaos.toml", 1, serial);
  report(4, "propagation of chaos",
         within_limit(study_checks(chaos, {"follower_slope", "strictly_decreasing_per_replicate"}), chaos.seconds, 600.0),
         all);

  const StudyRun stability = run_study("stability", "stability.toml", 1, serial);
  report(5, "stability linearity", within_limit(study_checks(stability, {"ratio_spread"}), stability.seconds, 120.0),
         all);

  report(6, "cost identities", timed(criterion_cost_identities, 10.0), all);

  Verdict gap = study_checks(chaos, {"cost_gap_decreasing"});
  gap.detail += "; same run as criterion 4";
  report(7, "chaos of costs", gap, all);

  report(8, "optimizer sanity", timed(criterion_optimizer, 300.0), all);

  const StudyRun gamma = run_study("gamma", "gamma.toml", 1, serial);
  report(9, "convergence of minima in m",
         within_limit(study_checks(gamma, {"all_points_optimized", "cauchy_trend"}), gamma.seconds, 1200.0), all);

  bool identical = true;
  std::string detail;
  for (const auto& [kind, config] : std::vector<std::pair<std::string, std::string>>{
           {"fpcheck", "fpcheck.toml"}, {"chaos", "chaos.toml"}, {"stability", "stability.toml"}, {"gamma", "gamma.toml"}}) {
    const StudyRun rerun = run_study(kind, config, 8, wide / kind);
    const StudyRun& first = kind == "fpcheck" ? fp : kind == "chaos" ? chaos : kind == "stability" ? stability : gamma;
    fs::path first_dir;
    for (const auto& entry : fs::directory_iterator(serial))
      if (entry.is_directory() && entry.path().filename().string().rfind(kind + "_seed", 0) == 0) first_dir = entry.path();
    const auto a = snapshot(first_dir);
    const auto b = snapshot(wide / kind / first_dir.filename());
    const bool same = !a.empty() && a == b && first.exit_code == rerun.exit_code;
    identical = identical && same;
    if (!detail.empty()) detail += ", ";
    detail += kind + (same ? " identical (" : " DIFFERENT (") + std::to_string(a.size()) + " files)";
  }
  report(10, "determinism, --threads 1 vs 8", {identical, detail}, all);

  return all ? 0 : 1;
}
