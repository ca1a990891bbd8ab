#include "mfoc/mckean.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfoc/fields.hpp"
#include "mfoc/parallel.hpp"

namespace mfoc {

namespace {

// The Picard map with Brownian increments and initial cloud frozen.
class PicardMap {
 public:
  PicardMap(const ProblemSpec& problem, const ControlSchedule* controls,
            const MeasureFlow* nu_flow, const NoisePlan& noise, const MckeanOptions& options)
      : problem_(problem),
        controls_(controls),
        nu_flow_(nu_flow),
        steps_(problem.steps()),
        times_(problem.time_grid()),
        threads_(options.threads) {
    problem.validate();
    if (options.samples < 2) throw ParameterError("mckean: need at least 2 law samples");
    if (!(options.tol > 0.0)) throw ParameterError("mckean: tol must be positive");
    if (options.max_iter < 2) throw ParameterError("mckean: max_iter must be >= 2");
    if (controls_ != nullptr) {
      controls_->validate(problem.kappa, steps_);
      if (controls_->leaders() != problem.leaders)
        throw ParameterError("mckean: control schedule does not match the leader population");
    }
    if (nu_flow_ != nullptr) {
      if (static_cast<Eigen::Index>(nu_flow_->size()) != steps_ + 1)
        throw ParameterError("mckean: nu flow must live on the problem time grid");
      for (std::size_t n = 0; n < times_.size(); ++n) {
        if (std::abs(nu_flow_->times()[n] - times_[n]) > 1e-9)
          throw ParameterError("mckean: nu flow grid differs from the problem grid");
      }
      if ((*nu_flow_)[0].dim() != problem.dim) throw ParameterError("mckean: nu flow dimension mismatch");
    }

    const Eigen::Index n_samples = options.samples;
    initial_ = problem.follower_init.sample_block(noise, Stream::follower_init, options.sample_id,
                                                  n_samples);
    if (problem.sigma > 0.0) {
      const double scale = std::sqrt(2.0 * problem.sigma * problem.dt);
      increments_.resize(static_cast<std::size_t>(steps_));
      parallel_for(static_cast<std::size_t>(steps_), threads_, [&](std::size_t n) {
        increments_[n] = scale * noise.brownian_block(problem.dim, options.sample_id, n_samples,
                                                      static_cast<std::uint32_t>(n));
      });
    }
  }

  const Eigen::MatrixXd& initial() const { return initial_; }
  const std::vector<double>& times() const { return times_; }

  MeasureFlow frozen_initial_law() const {
    const EmpiricalMeasure mu0 = EmpiricalMeasure::uniform(initial_);
    return MeasureFlow(times_, std::vector<EmpiricalMeasure>(times_.size(), mu0));
  }

  // Applies the map to `law`; returns the new cloud (one d x N matrix per time)
  // and the leader paths.
  void apply(const MeasureFlow& law, std::vector<Eigen::MatrixXd>& cloud,
             std::vector<Eigen::MatrixXd>& leaders) const {
    if (static_cast<Eigen::Index>(law.size()) != steps_ + 1)
      throw ParameterError("mckean: law flow must live on the problem time grid");

    std::vector<std::optional<EmpiricalMeasure>> nu(times_.size());
    leaders.assign(times_.size(), Eigen::MatrixXd());
    if (nu_flow_ != nullptr) {
      for (std::size_t n = 0; n < times_.size(); ++n) {
        nu[n] = (*nu_flow_)[n];
        leaders[n] = (*nu_flow_)[n].atoms();
      }
    } else if (problem_.leaders > 0) {
      // Leader ODE against the frozen law iterate; nu is the leaders' own cloud.
      Eigen::MatrixXd y = problem_.leader_positions();
      for (Eigen::Index n = 0; n <= steps_; ++n) {
        leaders[n] = y;
        nu[n] = EmpiricalMeasure::uniform(y);
        if (n == steps_) break;
        const EmpiricalMeasure& mu = law[n];
        const FieldEvaluator field(problem_.w, times_[n], mu, &*nu[n]);
        const double g = eval_gain(controls_->gain(), mu);
        const Eigen::MatrixXd& u = controls_->at_step(n, steps_);
        Eigen::MatrixXd next = y;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
          next.col(j) += problem_.dt * (field(y.col(j)) + g * u.col(j));
        }
        if (!next.allFinite()) throw BlowUpError("blow-up: leader path became non-finite", "leader", 0);
        y = std::move(next);
      }
    } else {
      for (auto& l : leaders) l = Eigen::MatrixXd(problem_.dim, 0);
    }

    std::vector<FieldEvaluator> fields;
    fields.reserve(static_cast<std::size_t>(steps_));
    for (Eigen::Index n = 0; n < steps_; ++n) {
      fields.emplace_back(problem_.v, times_[n], law[n], nu[n] ? &*nu[n] : nullptr);
    }

    const Eigen::Index n_samples = initial_.cols();
    cloud.assign(times_.size(), Eigen::MatrixXd(problem_.dim, n_samples));
    cloud[0] = initial_;
    const std::size_t blocks = std::max<std::size_t>(1, std::min<std::size_t>(64, n_samples));
    parallel_for(blocks, threads_, [&](std::size_t b) {
      const Eigen::Index begin = static_cast<Eigen::Index>(b) * n_samples / static_cast<Eigen::Index>(blocks);
      const Eigen::Index end = static_cast<Eigen::Index>(b + 1) * n_samples / static_cast<Eigen::Index>(blocks);
      for (Eigen::Index i = begin; i < end; ++i) {
        for (Eigen::Index n = 0; n < steps_; ++n) {
          cloud[n + 1].col(i) = cloud[n].col(i) + problem_.dt * fields[n](cloud[n].col(i));
          if (!increments_.empty()) cloud[n + 1].col(i) += increments_[n].col(i);
        }
      }
    });
    for (Eigen::Index n = 1; n <= steps_; ++n) {
      if (!cloud[n].allFinite()) {
        for (Eigen::Index i = 0; i < n_samples; ++i) {
          if (!cloud[n].col(i).allFinite()) {
            std::ostringstream msg;
            msg << "blow-up: law sample " << i << " became non-finite at t = " << times_[n];
            throw BlowUpError(msg.str(), "law sample", static_cast<std::size_t>(i));
          }
        }
      }
    }
  }

 private:
  const ProblemSpec& problem_;
  const ControlSchedule* controls_;
  const MeasureFlow* nu_flow_;
  Eigen::Index steps_;
  std::vector<double> times_;
  unsigned threads_;
  Eigen::MatrixXd initial_;
  std::vector<Eigen::MatrixXd> increments_;  // already scaled by sqrt(2 sigma dt)
};

MeasureFlow to_flow(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& cloud) {
  std::vector<EmpiricalMeasure> measures;
  measures.reserve(cloud.size());
  for (const auto& c : cloud) measures.push_back(EmpiricalMeasure::uniform(c));
  return MeasureFlow(times, std::move(measures));
}

// sup_t of the mean distance between matching samples of two iterates: an
// upper bound on sup_t W1, since both iterates share noise and initial points.
double iterate_distance(const MeasureFlow& previous, const MeasureFlow& next) {
  double sup = 0.0;
  for (std::size_t n = 0; n < next.size(); ++n) {
    const auto& a = previous[n];
    const auto& b = next[n];
    const double d = a.size() == b.size() ? (a.atoms() - b.atoms()).colwise().norm().mean()
                                          : wasserstein1_capped(a, b, TransportOptions{});
    sup = std::max(sup, d);
  }
  return sup;
}

MckeanSolution iterate(const PicardMap& map, const MckeanOptions& options,
                       const std::optional<MeasureFlow>& initial_guess) {
  MeasureFlow law = initial_guess ? *initial_guess : map.frozen_initial_law();
  std::vector<Eigen::MatrixXd> cloud;
  std::vector<Eigen::MatrixXd> leaders;
  std::vector<double> history;

  map.apply(law, cloud, leaders);
  law = to_flow(map.times(), cloud);
  for (int k = 2; k <= options.max_iter; ++k) {
    map.apply(law, cloud, leaders);
    MeasureFlow next = to_flow(map.times(), cloud);
    const double residual = iterate_distance(law, next);
    history.push_back(residual);
    law = std::move(next);
    if (residual <= options.tol) {
      return MckeanSolution{std::move(law), std::move(leaders), k, residual, std::move(history)};
    }
  }
  std::ostringstream msg;
  msg << "mckean: no convergence within " << options.max_iter << " iterations (last residual "
      << history.back() << ", tol " << options.tol << ")";
  throw ConvergenceError(msg.str(), std::move(history));
}

}  // namespace

double picard_residual(const MeasureFlow& a, const MeasureFlow& b, const TransportOptions& options) {
  if (a.size() != b.size()) throw ParameterError("picard_residual: flows on different grids");
  double sup = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (std::abs(a.times()[n] - b.times()[n]) > 1e-12)
      throw ParameterError("picard_residual: flows on different grids");
    sup = std::max(sup, wasserstein1(a[n], b[n], options));
  }
  return sup;
}

MckeanSolution solve_mckean(const ProblemSpec& problem, const ControlSchedule& controls,
                            const NoisePlan& noise, const MckeanOptions& options,
                            const std::optional<MeasureFlow>& initial_guess) {
  const PicardMap map(problem, &controls, nullptr, noise, options);
  return iterate(map, options, initial_guess);
}

MckeanSolution solve_fixed_nu(const ProblemSpec& problem, const MeasureFlow& nu_flow,
                              const NoisePlan& noise, const MckeanOptions& options,
                              const std::optional<MeasureFlow>& initial_guess) {
  const PicardMap map(problem, nullptr, &nu_flow, noise, options);
  return iterate(map, options, initial_guess);
}

MckeanSolution picard_step(const ProblemSpec& problem, const ControlSchedule& controls,
                           const NoisePlan& noise, const MckeanOptions& options,
                           const MeasureFlow& law) {
  const PicardMap map(problem, &controls, nullptr, noise, options);
  std::vector<Eigen::MatrixXd> cloud;
  std::vector<Eigen::MatrixXd> leaders;
  map.apply(law, cloud, leaders);
  MeasureFlow next = to_flow(map.times(), cloud);
  const double residual = iterate_distance(law, next);
  return MckeanSolution{std::move(next), std::move(leaders), 1, residual, {residual}};
}

std::vector<Eigen::MatrixXd> propagate_copies(const ProblemSpec& problem,
                                              const MckeanSolution& solution,
                                              const Eigen::MatrixXd& initial,
                                              const NoisePlan& noise, std::uint32_t sample_id) {
  const Eigen::Index steps = problem.steps();
  const auto& law = solution.law_flow;
  if (static_cast<Eigen::Index>(law.size()) != steps + 1)
    throw ParameterError("propagate_copies: solution grid differs from the problem grid");
  if (initial.rows() != problem.dim) throw ParameterError("propagate_copies: dimension mismatch");

  std::vector<Eigen::MatrixXd> paths;
  paths.reserve(static_cast<std::size_t>(steps + 1));
  paths.push_back(initial);
  const double scale = std::sqrt(2.0 * problem.sigma * problem.dt);
  for (Eigen::Index n = 0; n < steps; ++n) {
    std::optional<EmpiricalMeasure> nu;
    if (solution.leaders[n].cols() > 0) nu.emplace(EmpiricalMeasure::uniform(solution.leaders[n]));
    const FieldEvaluator field(problem.v, law.times()[n], law[n], nu ? &*nu : nullptr);
    Eigen::MatrixXd next = paths.back();
    for (Eigen::Index i = 0; i < next.cols(); ++i) next.col(i) += problem.dt * field(paths.back().col(i));
    if (problem.sigma > 0.0) {
      next += scale * noise.brownian_block(problem.dim, sample_id, initial.cols(),
                                           static_cast<std::uint32_t>(n));
    }
    if (!next.allFinite()) throw BlowUpError("blow-up: limit copy became non-finite", "copy", 0);
    paths.push_back(std::move(next));
  }
  return paths;
}

}  // namespace mfoc
