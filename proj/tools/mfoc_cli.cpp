// Command-line driver: simulate, mckean, optimize and the convergence studies.
// Exit codes: 0 pass, 1 threshold failure, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mfoc/config.hpp"
#include "mfoc/control_opt.hpp"
#include "mfoc/cost.hpp"
#include "mfoc/io.hpp"
#include "mfoc/mckean.hpp"
#include "mfoc/particle_sim.hpp"
#include "mfoc/studies.hpp"

namespace {

enum ExitCode : int { kPass = 0, kThreshold = 1, kConfig = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  unsigned threads = 1;
  std::string controls;  // optional OptResult JSON
};

std::string dump(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

class RunDirectory {
 public:
  RunDirectory(const std::string& root, const std::string& kind, std::uint64_t seed)
      : stem_(kind + "_seed" + std::to_string(seed)), dir_(std::filesystem::path(root) / stem_) {}

  void write(const std::string& suffix, const std::string& content) const {
    mfoc::write_text_file(dir_ / (stem_ + suffix), content);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::string stem_;
  std::filesystem::path dir_;
};

mfoc::RunConfig load(const Common& common) {
  mfoc::RunConfig cfg = mfoc::load_config(common.config);
  if (common.seed) cfg.set_seed(*common.seed);
  cfg.set_threads(common.threads);
  return cfg;
}

mfoc::ControlSchedule controls_for(const mfoc::RunConfig& cfg, const Common& common) {
  const auto& p = cfg.problem;
  if (common.controls.empty())
    return mfoc::ControlSchedule::zeros(p.dim, p.leaders, cfg.optimize.intervals, p.horizon, p.gain);
  std::ifstream in(common.controls);
  if (!in) throw mfoc::ConfigError("cannot open controls file '" + common.controls + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw mfoc::ConfigError(std::string("controls file: ") + e.what());
  }
  return mfoc::opt_result_from_json(doc).controls;
}

int run_simulate(const Common& common) {
  const mfoc::RunConfig cfg = load(common);
  const auto controls = controls_for(cfg, common);
  const auto batch = mfoc::simulate_batch(cfg.problem, controls, cfg.problem.noise(), 0,
                                          static_cast<std::size_t>(cfg.simulate.realizations), common.threads);
  const RunDirectory dir(common.out, "simulate", cfg.problem.seed);
  std::ostringstream csv;
  mfoc::write_trajectory_csv(csv, batch, cfg.simulate.stride);
  dir.write(".csv", csv.str());
  const auto cost = mfoc::cost_finite(batch, controls, cfg.problem.cost);
  dir.write("_summary.json", dump({{"kind", "simulate"}, {"seed", cfg.problem.seed},
                                   {"config", mfoc::config_echo(cfg)}, {"cost", mfoc::to_json(cost)}}));
  std::cout << "simulate: cost " << mfoc::format_double(cost.total) << " -> " << dir.path().string() << '\n';
  return kPass;
}

int run_mckean(const Common& common) {
  const mfoc::RunConfig cfg = load(common);
  const auto controls = controls_for(cfg, common);
  const auto solution = mfoc::solve_mckean(cfg.problem, controls, cfg.problem.noise(), cfg.mckean);
  const RunDirectory dir(common.out, "mckean", cfg.problem.seed);

  std::ostringstream csv;
  csv << "t,kind,index";
  for (Eigen::Index k = 0; k < cfg.problem.dim; ++k) csv << ",x_" << (k + 1);
  csv << '\n';
  const auto& times = solution.law_flow.times();
  for (std::size_t n = 0; n < times.size(); ++n) {
    if (n % cfg.simulate.stride != 0 && n + 1 != times.size()) continue;
    auto emit = [&](const Eigen::MatrixXd& agents, char kind) {
      for (Eigen::Index i = 0; i < agents.cols(); ++i) {
        csv << mfoc::format_double(times[n]) << ',' << kind << ',' << i;
        for (Eigen::Index k = 0; k < agents.rows(); ++k) csv << ',' << mfoc::format_double(agents(k, i));
        csv << '\n';
      }
    };
    emit(solution.law_flow[n].atoms(), 'F');
    emit(solution.leaders[n], 'L');
  }
  dir.write(".csv", csv.str());
  const auto cost = mfoc::cost_chaos(solution, controls, cfg.problem.cost);
  dir.write("_summary.json", dump({{"kind", "mckean"},
                                   {"seed", cfg.problem.seed},
                                   {"config", mfoc::config_echo(cfg)},
                                   {"iterations", solution.iterations},
                                   {"residual", solution.residual},
                                   {"residual_history", solution.residual_history},
                                   {"cost", mfoc::to_json(cost)}}));
  std::cout << "mckean: " << solution.iterations << " iterations, residual "
            << mfoc::format_double(solution.residual) << " -> " << dir.path().string() << '\n';
  return kPass;
}

int run_optimize(const Common& common) {
  const mfoc::RunConfig cfg = load(common);
  mfoc::OptProblem opt = cfg.opt_problem();
  if (!common.controls.empty()) opt.warm_start = controls_for(cfg, common);
  const mfoc::OptResult result = mfoc::optimize(opt);
  const RunDirectory dir(common.out, "optimize", cfg.problem.seed);

  std::ostringstream trace;
  trace << "start,evaluation,cost,step,best\n";
  for (const auto& e : result.trace) {
    trace << e.start << ',' << e.evaluation << ',' << mfoc::format_double(e.cost) << ','
          << mfoc::format_double(e.step) << ',' << mfoc::format_double(e.best) << '\n';
  }
  dir.write("_trace.csv", trace.str());
  nlohmann::json doc = mfoc::to_json(result);
  doc["config"] = mfoc::config_echo(cfg);
  dir.write("_result.json", dump(doc));
  const bool ok = result.cost_value <= result.baseline_cost + 2.0 * result.baseline_std_error;
  std::cout << "optimize: cost " << mfoc::format_double(result.cost_value) << " (baseline "
            << mfoc::format_double(result.baseline_cost) << ", " << result.evaluations << " evaluations"
            << (result.budget_exhausted ? ", budget exhausted" : "") << ") -> " << dir.path().string() << '\n';
  return ok ? kPass : kThreshold;
}

int run_study(const Common& common, const std::string& kind) {
  const mfoc::RunConfig cfg = load(common);
  const auto start = std::chrono::steady_clock::now();
  mfoc::StudyReport report;
  if (kind == "chaos") {
    report = mfoc::run_chaos_study(cfg.problem, cfg.chaos);
  } else if (kind == "gamma") {
    report = mfoc::run_gamma_study(cfg.opt_problem(), cfg.gamma);
  } else if (kind == "stability") {
    report = mfoc::run_stability_study(cfg.problem, cfg.stability);
  } else {
    report = mfoc::run_fp_crosscheck(cfg.problem, cfg.fpcheck);
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.config = mfoc::config_echo(cfg);

  const RunDirectory dir(common.out, kind, cfg.problem.seed);
  dir.write("_config.json", dump(report.config));
  dir.write(".csv", report.csv);
  dir.write("_summary.json", dump(mfoc::to_json(report)));

  std::cout << "study " << kind << " (" << mfoc::format_double(report.runtime_seconds) << " s)\n";
  for (const auto& c : report.checks) {
    std::cout << "  " << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << mfoc::format_double(c.value)
              << " vs " << mfoc::format_double(c.threshold) << '\n';
  }
  std::cout << "  -> " << dir.path().string() << '\n';
  return report.passed() ? kPass : kThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field leader/follower control: simulation, optimization and convergence studies"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "TOML configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", common.seed, "override the configured 64-bit seed");
    cmd->add_option("--out", common.out, "output root directory")->capture_default_str();
    cmd->add_option("--threads", common.threads, "worker threads (wall time only)")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "finite particle realizations");
  add_common(simulate);
  simulate->add_option("--controls", common.controls, "optimize result JSON to replay");
  auto* mckean = app.add_subcommand("mckean", "Picard solve of the mean-field system");
  add_common(mckean);
  mckean->add_option("--controls", common.controls, "optimize result JSON to replay");
  auto* optimize = app.add_subcommand("optimize", "minimize the configured objective");
  add_common(optimize);
  optimize->add_option("--controls", common.controls, "optimize result JSON used as a warm start");

  auto* study = app.add_subcommand("study", "convergence studies");
  study->require_subcommand(1);
  std::string study_kind;
  for (const char* kind : {"chaos", "gamma", "stability", "fpcheck"}) {
    auto* sub = study->add_subcommand(kind);
    add_common(sub);
    sub->final_callback([&study_kind, kind] { study_kind = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfig;
  }

  try {
    if (simulate->parsed()) return run_simulate(common);
    if (mckean->parsed()) return run_mckean(common);
    if (optimize->parsed()) return run_optimize(common);
    return run_study(common, study_kind);
  } catch (const mfoc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const mfoc::ParameterError& e) {
    std::cerr << "invalid parameters: " << e.what() << '\n';
    return kConfig;
  } catch (const mfoc::ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n  residuals:";
    for (double r : e.residuals()) std::cerr << ' ' << mfoc::format_double(r);
    std::cerr << '\n';
    return kNumeric;
  } catch (const mfoc::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}
