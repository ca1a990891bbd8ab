#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <vector>

#include "mfoc/cost.hpp"
#include "mfoc/mckean.hpp"
#include "mfoc/problem.hpp"

namespace mfoc {

enum class Objective { finite_particle, mckean };
enum class SearchMethod { spsa, coordinate };

struct OptProblem {
  ProblemSpec problem;                // carries kappa, the cost spec and the CRN seed
  Objective objective = Objective::mckean;
  Eigen::Index intervals = 1;         // n_u
  Eigen::Index samples = 1;           // particle realizations or independent law clouds
  MckeanOptions mckean;               // `samples` field ignored; law size is problem.law_samples
  bool optimize_gain = true;          // false: gain frozen at problem.gain

  SearchMethod method = SearchMethod::spsa;
  int starts = 4;                     // start 0 is the zero control
  int max_evaluations = 200;          // budget over all starts
  double perturbation = 0.1;          // SPSA c_0 / finite-difference width, box units
  unsigned threads = 1;
  std::optional<ControlSchedule> warm_start;  // replaces the first random start

  void validate() const;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  CostBreakdown breakdown;
};

struct TraceEntry {
  int start = 0;
  int evaluation = 0;  // index within the start
  double cost = 0.0;
  double step = 0.0;   // box units: SPSA latest move length, coordinate line-search trial (0 for probes)
  double best = 0.0;   // running minimum over the whole trace so far
};

struct OptResult {
  explicit OptResult(ControlSchedule best) : controls(std::move(best)) {}

  ControlSchedule controls;
  double cost_value = 0.0;
  double std_error = 0.0;
  double baseline_cost = 0.0;
  double baseline_std_error = 0.0;
  bool budget_exhausted = false;
  int evaluations = 0;
  std::vector<TraceEntry> trace;
};

/// Component-wise clamp onto the box [-kappa, kappa]^d.
Eigen::VectorXd project_K(const Eigen::VectorXd& u, double kappa);

/// Monte Carlo cost of `controls`, always with the problem's NoisePlan (common
/// random numbers): identical controls give bit-identical estimates.
CostEstimate estimate_cost(const OptProblem& opt, const ControlSchedule& controls);

/// Projected SPSA or coordinate finite-difference descent with multi-start.
/// Returns the best evaluated point; running out of budget sets a flag.
OptResult optimize(const OptProblem& opt);

nlohmann::json to_json(const OptResult& result);
/// Restores controls and scalars (not the trace) for warm restarts.
OptResult opt_result_from_json(const nlohmann::json& doc);

}  // namespace mfoc
