#include "mfoc/particle_sim.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "mfoc/io.hpp"
#include "mfoc/parallel.hpp"

namespace mfoc {

namespace {

void check_finite(const Eigen::MatrixXd& agents, const char* population, double t) {
  if (agents.allFinite()) return;
  for (Eigen::Index i = 0; i < agents.cols(); ++i) {
    if (!agents.col(i).allFinite()) {
      std::ostringstream msg;
      msg << "blow-up: " << population << ' ' << i << " became non-finite at t = " << t;
      throw BlowUpError(msg.str(), population, static_cast<std::size_t>(i));
    }
  }
}

}  // namespace

EmpiricalMeasure empirical_of(const Eigen::MatrixXd& agents) {
  if (agents.cols() == 0) throw ParameterError("empirical_of: empty population");
  return EmpiricalMeasure::uniform(agents);
}

EmpiricalMeasure empirical_of(const EnsembleState& state, Population which) {
  return empirical_of(which == Population::followers ? state.followers : state.leaders);
}

EnsembleState em_step(const EnsembleState& state, const FieldSpec& v, const FieldSpec& w,
                      const Eigen::MatrixXd& controls, const GainSpec& gain, double sigma,
                      double dt, const Eigen::MatrixXd& noise) {
  if (!(dt > 0.0)) throw ParameterError("em_step: dt must be positive");
  if (!(sigma >= 0.0)) throw ParameterError("em_step: sigma must be >= 0");
  const Eigen::Index m = state.leaders.cols();
  if (controls.cols() != m || (m > 0 && controls.rows() != state.leaders.rows()))
    throw ParameterError("em_step: one control column per leader required");
  if (sigma > 0.0 && (noise.rows() != state.followers.rows() ||
                      noise.cols() != state.followers.cols()))
    throw ParameterError("em_step: one noise column per follower required");

  const EmpiricalMeasure mu = empirical_of(state.followers);
  std::optional<EmpiricalMeasure> nu;
  if (m > 0) nu.emplace(empirical_of(state.leaders));
  const EmpiricalMeasure* nu_ptr = nu ? &*nu : nullptr;

  EnsembleState next{state.followers, state.leaders, state.t + dt};

  const FieldEvaluator follower_field(v, state.t, mu, nu_ptr);
  const double diffusion = std::sqrt(2.0 * sigma * dt);
  for (Eigen::Index i = 0; i < state.followers.cols(); ++i) {
    next.followers.col(i) += dt * follower_field(state.followers.col(i));
    if (sigma > 0.0) next.followers.col(i) += diffusion * noise.col(i);
  }
  check_finite(next.followers, "follower", next.t);

  if (m > 0) {
    const FieldEvaluator leader_field(w, state.t, mu, nu_ptr);
    const double g = eval_gain(gain, mu);
    for (Eigen::Index j = 0; j < m; ++j) {
      next.leaders.col(j) += dt * (leader_field(state.leaders.col(j)) + g * controls.col(j));
    }
    check_finite(next.leaders, "leader", next.t);
  }
  return next;
}

EnsembleTrajectory simulate_finite_from(const ProblemSpec& problem,
                                        const ControlSchedule& controls, const NoisePlan& noise,
                                        std::uint32_t sample_id,
                                        const Eigen::MatrixXd& initial_followers) {
  const Eigen::Index steps = problem.steps();
  controls.validate(problem.kappa, steps);
  if (controls.leaders() != problem.leaders || (problem.leaders > 0 && controls.dim() != problem.dim))
    throw ParameterError("simulate: control schedule does not match the leader population");
  if (initial_followers.rows() != problem.dim)
    throw ParameterError("simulate: initial follower dimension mismatch");

  EnsembleTrajectory traj;
  traj.sample_id = sample_id;
  traj.times = problem.time_grid();
  traj.followers.reserve(static_cast<std::size_t>(steps + 1));
  traj.leaders.reserve(static_cast<std::size_t>(steps + 1));

  EnsembleState state{initial_followers, problem.leader_positions(), 0.0};
  traj.followers.push_back(state.followers);
  traj.leaders.push_back(state.leaders);

  const Eigen::Index followers = state.followers.cols();
  const Eigen::MatrixXd no_noise;
  for (Eigen::Index n = 0; n < steps; ++n) {
    const Eigen::MatrixXd xi =
        problem.sigma > 0.0
            ? noise.brownian_block(problem.dim, sample_id, followers, static_cast<std::uint32_t>(n))
            : no_noise;
    state = em_step(state, problem.v, problem.w, controls.at_step(n, steps), controls.gain(),
                    problem.sigma, problem.dt, xi);
    state.t = traj.times[n + 1];
    traj.followers.push_back(state.followers);
    traj.leaders.push_back(state.leaders);
  }
  return traj;
}

EnsembleTrajectory simulate_finite(const ProblemSpec& problem, const ControlSchedule& controls,
                                   const NoisePlan& noise, std::uint32_t sample_id) {
  problem.validate();
  const Eigen::MatrixXd initial = problem.follower_init.sample_block(
      noise, Stream::follower_init, sample_id, problem.followers);
  return simulate_finite_from(problem, controls, noise, sample_id, initial);
}

std::vector<EnsembleTrajectory> simulate_batch(const ProblemSpec& problem,
                                               const ControlSchedule& controls,
                                               const NoisePlan& noise, std::uint32_t first_sample,
                                               std::size_t count, unsigned threads) {
  std::vector<EnsembleTrajectory> batch(count);
  parallel_for(count, threads, [&](std::size_t k) {
    batch[k] = simulate_finite(problem, controls, noise, first_sample + static_cast<std::uint32_t>(k));
  });
  return batch;
}

void write_trajectory_csv(std::ostream& out, const std::vector<EnsembleTrajectory>& batch,
                          std::size_t stride) {
  if (stride == 0) stride = 1;
  Eigen::Index dim = 0;
  for (const auto& traj : batch) {
    if (!traj.followers.empty()) dim = traj.followers.front().rows();
  }
  out << "sample_id,t,kind,index";
  for (Eigen::Index k = 0; k < dim; ++k) out << ",x_" << (k + 1);
  out << '\n';

  auto emit = [&](const EnsembleTrajectory& traj, std::size_t n, const Eigen::MatrixXd& agents,
                  char kind) {
    for (Eigen::Index i = 0; i < agents.cols(); ++i) {
      out << traj.sample_id << ',' << format_double(traj.times[n]) << ',' << kind << ',' << i;
      for (Eigen::Index k = 0; k < agents.rows(); ++k) out << ',' << format_double(agents(k, i));
      out << '\n';
    }
  };
  for (const auto& traj : batch) {
    for (std::size_t n = 0; n < traj.times.size(); ++n) {
      if (n % stride != 0 && n + 1 != traj.times.size()) continue;
      emit(traj, n, traj.followers[n], 'F');
      emit(traj, n, traj.leaders[n], 'L');
    }
  }
}

}  // namespace mfoc
