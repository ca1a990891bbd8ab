#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mfoc/fields.hpp"
#include "mfoc/measures.hpp"
#include "mfoc/problem.hpp"
#include "mfoc/rng.hpp"

namespace mfoc {

/// M noisy followers and m controlled leaders at time t (columns are agents).
struct EnsembleState {
  Eigen::MatrixXd followers;
  Eigen::MatrixXd leaders;
  double t = 0.0;
};

/// One realization of the finite-particle system on the problem's time grid.
struct EnsembleTrajectory {
  std::uint32_t sample_id = 0;
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> followers;  // d x M per time
  std::vector<Eigen::MatrixXd> leaders;    // d x m per time
};

enum class Population { followers, leaders };

/// Uniform empirical measure of one population; throws ParameterError if empty.
EmpiricalMeasure empirical_of(const EnsembleState& state, Population which);
EmpiricalMeasure empirical_of(const Eigen::MatrixXd& agents);

/// One explicit Euler-Maruyama step. Both measures are frozen at the start of
/// the step:
///   X_i += v(X_i, mu, nu) dt + sqrt(2 sigma dt) xi_i
///   y_j += (w(y_j, mu, nu) + u_j g(mu)) dt
/// `noise` holds one standard normal column per follower.
EnsembleState em_step(const EnsembleState& state, const FieldSpec& v, const FieldSpec& w,
                      const Eigen::MatrixXd& controls, const GainSpec& gain, double sigma,
                      double dt, const Eigen::MatrixXd& noise);

/// Full trajectory for realization `sample_id`. Follower initial positions are
/// drawn i.i.d. from the follower law; leader positions come from the problem.
EnsembleTrajectory simulate_finite(const ProblemSpec& problem, const ControlSchedule& controls,
                                   const NoisePlan& noise, std::uint32_t sample_id = 0);

/// Same, starting from given initial follower positions.
EnsembleTrajectory simulate_finite_from(const ProblemSpec& problem,
                                        const ControlSchedule& controls, const NoisePlan& noise,
                                        std::uint32_t sample_id,
                                        const Eigen::MatrixXd& initial_followers);

/// Realizations first_sample .. first_sample + count - 1, run on `threads` workers.
std::vector<EnsembleTrajectory> simulate_batch(const ProblemSpec& problem,
                                               const ControlSchedule& controls,
                                               const NoisePlan& noise, std::uint32_t first_sample,
                                               std::size_t count, unsigned threads = 1);

/// CSV export: sample_id,t,kind,index,x_1..x_d with kind F (follower) or L
/// (leader), every `stride`-th grid time plus the final one.
void write_trajectory_csv(std::ostream& out, const std::vector<EnsembleTrajectory>& batch,
                          std::size_t stride = 1);

}  // namespace mfoc
