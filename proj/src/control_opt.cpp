#include "mfoc/control_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfoc/parallel.hpp"
#include "mfoc/particle_sim.hpp"

namespace mfoc {

namespace {

constexpr double kSpsaAlpha = 0.602;
constexpr double kSpsaGamma = 0.101;
constexpr double kFirstMove = 0.1;  // box units

/// Optimization variables in box coordinates z in [-1, 1]^P: controls scaled
/// by kappa (interval, leader, component order), then optionally the gain
/// parameters scaled by (delta, lambda).
class Parametrization {
 public:
  explicit Parametrization(const OptProblem& opt)
      : problem_(opt.problem), intervals_(opt.intervals), with_gain_(opt.optimize_gain) {}

  Eigen::Index size() const {
    return intervals_ * problem_.dim * problem_.leaders + (with_gain_ ? 2 : 0);
  }

  ControlSchedule decode(const Eigen::VectorXd& z) const {
    std::vector<Eigen::MatrixXd> values;
    Eigen::Index k = 0;
    for (Eigen::Index q = 0; q < intervals_; ++q) {
      Eigen::MatrixXd u(problem_.dim, problem_.leaders);
      for (Eigen::Index j = 0; j < problem_.leaders; ++j)
        for (Eigen::Index i = 0; i < problem_.dim; ++i) u(i, j) = problem_.kappa * z(k++);
      values.push_back(std::move(u));
    }
    GainSpec gain = problem_.gain;
    if (with_gain_) {
      gain.theta0 = gain.delta * z(k++);
      gain.theta1 = gain.lambda * z(k++);
    }
    return ControlSchedule(problem_.horizon, std::move(values), gain);
  }

  Eigen::VectorXd encode(const ControlSchedule& controls) const {
    Eigen::VectorXd z(size());
    Eigen::Index k = 0;
    for (Eigen::Index q = 0; q < intervals_; ++q)
      for (Eigen::Index j = 0; j < problem_.leaders; ++j)
        for (Eigen::Index i = 0; i < problem_.dim; ++i)
          z(k++) = controls.interval(q)(i, j) / problem_.kappa;
    if (with_gain_) {
      const GainSpec& g = controls.gain();
      z(k++) = g.delta > 0.0 ? g.theta0 / g.delta : 0.0;
      z(k++) = g.lambda > 0.0 ? g.theta1 / g.lambda : 0.0;
    }
    return project_K(z, 1.0);
  }

 private:
  const ProblemSpec& problem_;
  Eigen::Index intervals_;
  bool with_gain_;
};

struct Evaluated {
  Eigen::VectorXd z;
  CostEstimate estimate;
};

/// Single-start search state shared by both methods.
class StartRun {
 public:
  StartRun(const OptProblem& opt, const Parametrization& params, int start, int budget,
           unsigned threads)
      : local_(opt), params_(params), start_(start), budget_(budget) {
    local_.threads = threads;
  }

  bool can_evaluate(int count = 1) const { return used_ + count <= budget_; }
  int remaining() const { return budget_ - used_; }
  int used() const { return used_; }

  double evaluate(const Eigen::VectorXd& z, double step) {
    Eigen::VectorXd p = project_K(z, 1.0);
    CostEstimate e = estimate_cost(local_, params_.decode(p));
    trace_.push_back(TraceEntry{start_, used_, e.mean, step, 0.0});
    ++used_;
    if (!best_ || e.mean < best_->estimate.mean) best_ = Evaluated{std::move(p), e};
    return trace_.back().cost;
  }

  std::vector<TraceEntry>& trace() { return trace_; }
  const std::optional<Evaluated>& best() const { return best_; }

 private:
  OptProblem local_;
  const Parametrization& params_;
  int start_;
  int budget_;
  int used_ = 0;
  std::vector<TraceEntry> trace_;
  std::optional<Evaluated> best_;
};

Eigen::VectorXd rademacher(const NoisePlan& noise, int start, std::uint32_t iteration, Eigen::Index size) {
  Eigen::VectorXd delta(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const double u = noise.uniform(Stream::perturbation, static_cast<std::uint32_t>(start),
                                   static_cast<std::uint32_t>(i), iteration);
    delta(i) = u < 0.5 ? -1.0 : 1.0;
  }
  return delta;
}

bool run_spsa(StartRun& run, const OptProblem& opt, Eigen::VectorXd z, int start) {
  const NoisePlan noise = opt.problem.noise();
  const Eigen::Index size = z.size();
  run.evaluate(z, 0.0);
  const double stability = 0.1 * static_cast<double>(run.remaining() / 2);
  double a0 = 0.0;
  double last_move = 0.0;
  for (std::uint32_t k = 0; run.can_evaluate(2); ++k) {
    const double ck = opt.perturbation / std::pow(static_cast<double>(k) + 1.0, kSpsaGamma);
    const Eigen::VectorXd delta = rademacher(noise, start, k, size);
    const Eigen::VectorXd plus = project_K(z + ck * delta, 1.0);
    const Eigen::VectorXd minus = project_K(z - ck * delta, 1.0);
    const double f_plus = run.evaluate(plus, last_move);
    const double f_minus = run.evaluate(minus, last_move);
    Eigen::VectorXd gradient(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      const double spread = plus(i) - minus(i);
      gradient(i) = spread != 0.0 ? (f_plus - f_minus) / spread : 0.0;
    }
    const double gmax = gradient.cwiseAbs().maxCoeff();
    if (gmax == 0.0) continue;
    if (a0 == 0.0) a0 = kFirstMove * std::pow(1.0 + stability, kSpsaAlpha) / gmax;
    const double decay = std::pow((1.0 + stability) / (static_cast<double>(k) + 1.0 + stability), kSpsaAlpha);
    const double ak = a0 * decay / std::pow(1.0 + stability, kSpsaAlpha);
    // A near-zero first estimate would make a0 huge: cap every move at the
    // first-move length under the same decay.
    const double move = std::min(ak * gmax, kFirstMove * decay);
    const Eigen::VectorXd next = project_K(z - (move / gmax) * gradient, 1.0);
    last_move = (next - z).cwiseAbs().maxCoeff();
    z = next;
  }
  if (run.can_evaluate()) run.evaluate(z, last_move);
  return true;
}

bool run_coordinate(StartRun& run, const OptProblem& opt, Eigen::VectorXd z) {
  const Eigen::Index size = z.size();
  double width = opt.perturbation;
  double reach = 0.25;
  double f = run.evaluate(z, 0.0);
  while (run.can_evaluate(static_cast<int>(2 * size) + 1)) {
    Eigen::VectorXd gradient(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      Eigen::VectorXd hi = z, lo = z;
      hi(i) = std::min(1.0, z(i) + width);
      lo(i) = std::max(-1.0, z(i) - width);
      const double f_hi = run.evaluate(hi, 0.0);
      const double f_lo = run.evaluate(lo, 0.0);
      gradient(i) = hi(i) > lo(i) ? (f_hi - f_lo) / (hi(i) - lo(i)) : 0.0;
    }
    const double gmax = gradient.cwiseAbs().maxCoeff();
    if (gmax == 0.0) return false;
    const Eigen::VectorXd direction = -gradient / gmax;
    bool accepted = false;
    for (double t = reach; t >= 1e-3 && run.can_evaluate(); t *= 0.5) {
      const Eigen::VectorXd trial = project_K(z + t * direction, 1.0);
      const double f_trial = run.evaluate(trial, t);
      if (f_trial < f) {
        z = trial;
        f = f_trial;
        reach = std::min(1.0, 2.0 * t);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      reach *= 0.25;
      width *= 0.5;
      if (reach < 1e-3) return false;
    }
  }
  return true;
}

}  // namespace

void OptProblem::validate() const {
  problem.validate();
  if (!(problem.kappa > 0.0)) throw ParameterError("optimize: kappa must be positive");
  if (intervals < 1) throw ParameterError("optimize: need at least one control interval");
  if (samples < 1) throw ParameterError("optimize: need at least one sample");
  if (starts < 1) throw ParameterError("optimize: need at least one start");
  if (max_evaluations < starts) throw ParameterError("optimize: budget below one evaluation per start");
  if (!(perturbation > 0.0 && perturbation <= 1.0))
    throw ParameterError("optimize: perturbation must lie in (0, 1]");
  if (problem.steps() % intervals != 0)
    throw ParameterError("optimize: interval count must divide the step count");
}

Eigen::VectorXd project_K(const Eigen::VectorXd& u, double kappa) {
  if (!(kappa > 0.0)) throw ParameterError("project_K: kappa must be positive");
  return u.cwiseMax(-kappa).cwiseMin(kappa);
}

CostEstimate estimate_cost(const OptProblem& opt, const ControlSchedule& controls) {
  const ProblemSpec& problem = opt.problem;
  const NoisePlan noise = problem.noise();
  CostEstimate out;
  if (opt.objective == Objective::finite_particle) {
    const auto batch = simulate_batch(problem, controls, noise, 0,
                                      static_cast<std::size_t>(opt.samples), opt.threads);
    out.breakdown = cost_finite(batch, controls, problem.cost);
  } else {
    std::vector<CostBreakdown> per_cloud(static_cast<std::size_t>(opt.samples));
    MckeanOptions base = opt.mckean;
    base.samples = problem.law_samples;
    const unsigned outer = std::min<unsigned>(std::max(1u, opt.threads), static_cast<unsigned>(opt.samples));
    base.threads = std::max(1u, opt.threads / outer);
    parallel_for(per_cloud.size(), outer, [&](std::size_t s) {
      MckeanOptions local = base;
      local.sample_id = base.sample_id + static_cast<std::uint32_t>(s);
      per_cloud[s] = cost_chaos(solve_mckean(problem, controls, noise, local), controls, problem.cost);
    });
    out.breakdown = average(per_cloud);
  }
  out.mean = out.breakdown.total;
  out.std_error = out.breakdown.std_error;
  return out;
}

OptResult optimize(const OptProblem& opt) {
  opt.validate();
  const Parametrization params(opt);
  const Eigen::Index size = params.size();
  const NoisePlan noise = opt.problem.noise();

  const ControlSchedule zero = ControlSchedule::zeros(opt.problem.dim, opt.problem.leaders,
                                                      opt.intervals, opt.problem.horizon, opt.problem.gain);
  const CostEstimate baseline = estimate_cost(opt, zero);
  if (size == 0) {
    OptResult result(zero);
    result.cost_value = result.baseline_cost = baseline.mean;
    result.std_error = result.baseline_std_error = baseline.std_error;
    result.evaluations = 1;
    return result;
  }

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(params.encode(zero));
  for (int s = 1; s < opt.starts; ++s) {
    if (s == 1 && opt.warm_start) {
      starts.push_back(params.encode(*opt.warm_start));
      continue;
    }
    Eigen::VectorXd z(size);
    for (Eigen::Index i = 0; i < size; ++i)
      z(i) = 2.0 * noise.uniform(Stream::start_point, static_cast<std::uint32_t>(s),
                                 static_cast<std::uint32_t>(i), 0) - 1.0;
    starts.push_back(z);
  }

  const int per_start = (opt.max_evaluations - 1) / opt.starts;
  const int extra = (opt.max_evaluations - 1) - per_start * opt.starts;
  const unsigned outer = std::min<unsigned>(std::max(1u, opt.threads), static_cast<unsigned>(opt.starts));
  const unsigned inner = std::max(1u, opt.threads / outer);

  std::vector<std::optional<StartRun>> runs(starts.size());
  std::vector<char> exhausted(starts.size(), 0);
  parallel_for(starts.size(), outer, [&](std::size_t s) {
    const int budget = std::max(1, per_start + (s == 0 ? extra : 0));
    runs[s].emplace(opt, params, static_cast<int>(s), budget, inner);
    const bool out_of_budget = opt.method == SearchMethod::spsa
                                   ? run_spsa(*runs[s], opt, starts[s], static_cast<int>(s))
                                   : run_coordinate(*runs[s], opt, starts[s]);
    exhausted[s] = out_of_budget ? 1 : 0;
  });

  OptResult result(zero);
  result.baseline_cost = baseline.mean;
  result.baseline_std_error = baseline.std_error;
  result.cost_value = baseline.mean;
  result.std_error = baseline.std_error;
  result.evaluations = 1;
  double running = baseline.mean;
  std::optional<Evaluated> best;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    for (auto& entry : runs[s]->trace()) {
      running = std::min(running, entry.cost);
      entry.best = running;
      result.trace.push_back(entry);
    }
    result.evaluations += runs[s]->used();
    result.budget_exhausted = result.budget_exhausted || exhausted[s] != 0;
    const auto& candidate = runs[s]->best();
    if (candidate && (!best || candidate->estimate.mean < best->estimate.mean)) best = candidate;
  }
  if (best && best->estimate.mean < baseline.mean) {
    result.controls = params.decode(best->z);
    result.cost_value = best->estimate.mean;
    result.std_error = best->estimate.std_error;
  }
  return result;
}

nlohmann::json to_json(const OptResult& result) {
  nlohmann::json controls = nlohmann::json::array();
  for (Eigen::Index q = 0; q < result.controls.intervals(); ++q) {
    nlohmann::json interval = nlohmann::json::array();
    const Eigen::MatrixXd& u = result.controls.interval(q);
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      nlohmann::json leader = nlohmann::json::array();
      for (Eigen::Index i = 0; i < u.rows(); ++i) leader.push_back(u(i, j));
      interval.push_back(std::move(leader));
    }
    controls.push_back(std::move(interval));
  }
  const GainSpec& g = result.controls.gain();
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : result.trace) {
    trace.push_back({{"start", e.start}, {"evaluation", e.evaluation}, {"cost", e.cost},
                     {"step", e.step}, {"best", e.best}});
  }
  return {{"horizon", result.controls.horizon()},
          {"dimension", result.controls.dim()},
          {"controls", std::move(controls)},
          {"gain", {{"theta0", g.theta0}, {"theta1", g.theta1}, {"delta", g.delta}, {"lambda", g.lambda}}},
          {"cost_value", result.cost_value},
          {"std_error", result.std_error},
          {"baseline_cost", result.baseline_cost},
          {"baseline_std_error", result.baseline_std_error},
          {"budget_exhausted", result.budget_exhausted},
          {"evaluations", result.evaluations},
          {"trace", std::move(trace)}};
}

OptResult opt_result_from_json(const nlohmann::json& doc) {
  try {
    const auto dim = doc.at("dimension").get<Eigen::Index>();
    std::vector<Eigen::MatrixXd> values;
    for (const auto& interval : doc.at("controls")) {
      Eigen::MatrixXd u(dim, static_cast<Eigen::Index>(interval.size()));
      for (std::size_t j = 0; j < interval.size(); ++j) {
        if (interval[j].size() != static_cast<std::size_t>(dim))
          throw ConfigError("opt result: control vector has the wrong dimension");
        for (Eigen::Index i = 0; i < dim; ++i)
          u(i, static_cast<Eigen::Index>(j)) = interval[j][static_cast<std::size_t>(i)].get<double>();
      }
      values.push_back(std::move(u));
    }
    const auto& g = doc.at("gain");
    GainSpec gain{g.at("theta0").get<double>(), g.at("theta1").get<double>(),
                  g.at("delta").get<double>(), g.at("lambda").get<double>()};
    OptResult result(ControlSchedule(doc.at("horizon").get<double>(), std::move(values), gain));
    result.cost_value = doc.at("cost_value").get<double>();
    result.std_error = doc.at("std_error").get<double>();
    result.baseline_cost = doc.at("baseline_cost").get<double>();
    result.baseline_std_error = doc.at("baseline_std_error").get<double>();
    result.budget_exhausted = doc.at("budget_exhausted").get<bool>();
    result.evaluations = doc.at("evaluations").get<int>();
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("opt result: ") + e.what());
  }
}

}  // namespace mfoc
