#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "mfoc/measures.hpp"
#include "mfoc/problem.hpp"
#include "mfoc/rng.hpp"

namespace mfoc {

struct MckeanOptions {
  Eigen::Index samples = 1000;  // N, size of the law cloud
  // On sup_t of the mean sample-wise distance between successive iterates,
  // an upper bound on sup_t W1 (samples share noise and initial points).
  double tol = 1e-3;
  int max_iter = 50;
  std::uint32_t sample_id = 0;  // Brownian/initial streams shared with particle runs of this id
  unsigned threads = 1;
};

/// Law of the representative follower (N-atom uniform cloud per grid time)
/// together with the leader paths it induces.
struct MckeanSolution {
  MeasureFlow law_flow;
  std::vector<Eigen::MatrixXd> leaders;  // d x m per grid time
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;  // residual after iterations 2, 3, ...
};

/// sup over grid times of W1 between two flows on the same grid. Exact; throws
/// SubsampleRequired in d >= 2 when clouds exceed the transport cap.
double picard_residual(const MeasureFlow& a, const MeasureFlow& b,
                       const TransportOptions& options = {});

/// Picard iteration for the coupled follower-law / leader system.
///
/// The map sends a law flow mu^k to the flow of N frozen-noise samples driven
/// by (mu^k, nu), where the leader path nu solves the leader ODE against the
/// same mu^k. The initial guess is the initial cloud held constant in time
/// unless `initial_guess` is given. The iteration stops once two successive
/// iterates are within `tol` (see MckeanOptions::tol), so at least two
/// iterations are always run.
/// Throws ConvergenceError after `max_iter` iterations.
MckeanSolution solve_mckean(const ProblemSpec& problem, const ControlSchedule& controls,
                            const NoisePlan& noise, const MckeanOptions& options,
                            const std::optional<MeasureFlow>& initial_guess = std::nullopt);

/// Same iteration with the leader measure replaced by a prescribed flow
/// `nu_flow` on the problem grid (the controlled leader ODE is not solved).
MckeanSolution solve_fixed_nu(const ProblemSpec& problem, const MeasureFlow& nu_flow,
                              const NoisePlan& noise, const MckeanOptions& options,
                              const std::optional<MeasureFlow>& initial_guess = std::nullopt);

/// One application of the Picard map to `law`, returning the new law flow and
/// leader paths (iterations = 1, residual = distance to `law` as for `tol`).
MckeanSolution picard_step(const ProblemSpec& problem, const ControlSchedule& controls,
                           const NoisePlan& noise, const MckeanOptions& options,
                           const MeasureFlow& law);

/// Paths of independent copies of the limit follower SDE driven by a solved
/// law flow, started at `initial` (d x K) and using Brownian streams of
/// (sample_id, particle k). Returns one d x K matrix per grid time.
std::vector<Eigen::MatrixXd> propagate_copies(const ProblemSpec& problem,
                                              const MckeanSolution& solution,
                                              const Eigen::MatrixXd& initial,
                                              const NoisePlan& noise, std::uint32_t sample_id);

}  // namespace mfoc
