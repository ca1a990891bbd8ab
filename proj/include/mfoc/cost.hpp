#pragma once

#include <Eigen/Dense>

#include <json.hpp>
#include <vector>

#include "mfoc/mckean.hpp"
#include "mfoc/particle_sim.hpp"
#include "mfoc/problem.hpp"

namespace mfoc {

/// Running cost L(mu, nu) >= 0. W1 in d >= 2 goes through wasserstein1_capped
/// with `spec.transport`.
double lagrangian(const CostSpec& spec, const EmpiricalMeasure& mu, const EmpiricalMeasure* nu);

/// phi(u, xi): |u|^2 or |u|^2 (1 + xi^2). Convex, superlinear, phi(0, .) = 0.
double phi(const CostSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u, double xi);

struct CostBreakdown {
  double lagrangian = 0.0;  // time integral of L, averaged over samples
  double control = 0.0;     // (1/m) sum_j time integral of phi(u_j, g(mu_t))
  double total = 0.0;
  double std_error = 0.0;   // of `total` over samples (0 for a single sample)
  std::size_t samples = 0;
};

/// Cost of one path pair. `followers[n]` are the follower atoms (uniform
/// weights), `leaders[n]` the leader positions at grid time n. Left-endpoint
/// rule in time.
CostBreakdown path_cost(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& followers,
                        const std::vector<Eigen::MatrixXd>& leaders, const ControlSchedule& controls,
                        const CostSpec& spec);

/// Finite-particle cost: sample mean of path_cost over the batch.
CostBreakdown cost_finite(const std::vector<EnsembleTrajectory>& batch,
                          const ControlSchedule& controls, const CostSpec& spec);

/// Mean-field cost with follower law from the solved law flow.
CostBreakdown cost_chaos(const MckeanSolution& solution, const ControlSchedule& controls,
                         const CostSpec& spec);

/// Aggregates independent per-sample breakdowns into mean and standard error.
CostBreakdown average(const std::vector<CostBreakdown>& samples);

struct AtomicIdentity {
  double direct = 0.0;        // (1/m) sum_j int phi(u_j, g) dt
  double atomic = 0.0;        // int sum_y phi(d theta / d nu (y), g) nu({y}) dt
  bool coincidence = false;   // coinciding leaders carried different controls
};

/// Control cost computed twice: as the leader average and through the
/// Radon-Nikodym density of the control measure theta = (1/m) sum_j u_j delta_{y_j}
/// against nu = (1/m) sum_j delta_{y_j}. Leaders at equal positions are merged
/// and share the mean of their controls. Controls are zeroed on steps where the
/// gain vanishes. `gains[n]` is g(mu) on step n.
AtomicIdentity phi_atomic_identity(const ControlSchedule& controls,
                                   const std::vector<Eigen::MatrixXd>& leaders,
                                   const std::vector<double>& gains,
                                   const std::vector<double>& times, const CostSpec& spec);

nlohmann::json to_json(const CostBreakdown& cost);

}  // namespace mfoc
