#include "mfoc/cost.hpp"

#include <cmath>

namespace mfoc {

double lagrangian(const CostSpec& spec, const EmpiricalMeasure& mu, const EmpiricalMeasure* nu) {
  switch (spec.lagrangian) {
    case LagrangianKind::w1_to_target:
    case LagrangianKind::squared_w1_to_target: {
      if (!spec.target) throw ParameterError("lagrangian: target measure required");
      if (spec.target->dim() != mu.dim()) throw ParameterError("lagrangian: target dimension mismatch");
      const double w = wasserstein1_capped(mu, *spec.target, spec.transport);
      return spec.lagrangian == LagrangianKind::w1_to_target ? w : w * w;
    }
    case LagrangianKind::leader_follower_w1:
      if (nu == nullptr) throw ParameterError("lagrangian: leader measure required");
      if (nu->dim() != mu.dim()) throw ParameterError("lagrangian: leader dimension mismatch");
      return wasserstein1_capped(mu, *nu, spec.transport);
  }
  throw UnsupportedSpec("lagrangian: unknown kind");
}

double phi(const CostSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& u, double xi) {
  const double sq = u.squaredNorm();
  return spec.phi == PhiKind::quadratic ? sq : sq * (1.0 + xi * xi);
}

CostBreakdown path_cost(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& followers,
                        const std::vector<Eigen::MatrixXd>& leaders, const ControlSchedule& controls,
                        const CostSpec& spec) {
  if (times.size() < 2 || followers.size() != times.size() || leaders.size() != times.size())
    throw ParameterError("cost: paths must cover the time grid");
  const auto steps = static_cast<Eigen::Index>(times.size() - 1);
  const Eigen::Index m = controls.leaders();

  CostBreakdown out;
  out.samples = 1;
  for (Eigen::Index n = 0; n < steps; ++n) {
    const auto k = static_cast<std::size_t>(n);
    const double dt = times[k + 1] - times[k];
    const EmpiricalMeasure mu = EmpiricalMeasure::uniform(followers[k]);
    std::optional<EmpiricalMeasure> nu;
    if (leaders[k].cols() > 0) nu.emplace(EmpiricalMeasure::uniform(leaders[k]));
    out.lagrangian += dt * lagrangian(spec, mu, nu ? &*nu : nullptr);
    if (m > 0) {
      const double g = eval_gain(controls.gain(), mu);
      const Eigen::MatrixXd& u = controls.at_step(n, steps);
      double running = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) running += phi(spec, u.col(j), g);
      out.control += dt * running / static_cast<double>(m);
    }
  }
  out.total = out.lagrangian + out.control;
  if (!std::isfinite(out.total)) throw NumericError("cost: non-finite value");
  return out;
}

CostBreakdown average(const std::vector<CostBreakdown>& samples) {
  if (samples.empty()) throw ParameterError("cost: empty batch");
  CostBreakdown out;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    out.lagrangian += s.lagrangian;
    out.control += s.control;
    out.total += s.total;
  }
  out.lagrangian /= n;
  out.control /= n;
  out.total /= n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (const auto& s : samples) ss += (s.total - out.total) * (s.total - out.total);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  out.samples = samples.size();
  return out;
}

CostBreakdown cost_finite(const std::vector<EnsembleTrajectory>& batch,
                          const ControlSchedule& controls, const CostSpec& spec) {
  if (batch.empty()) throw ParameterError("cost_finite: empty batch");
  std::vector<CostBreakdown> per_sample;
  per_sample.reserve(batch.size());
  for (const auto& traj : batch)
    per_sample.push_back(path_cost(traj.times, traj.followers, traj.leaders, controls, spec));
  return average(per_sample);
}

CostBreakdown cost_chaos(const MckeanSolution& solution, const ControlSchedule& controls,
                         const CostSpec& spec) {
  const auto& flow = solution.law_flow;
  if (flow.size() < 2) throw ParameterError("cost_chaos: empty law flow");
  std::vector<Eigen::MatrixXd> clouds;
  clouds.reserve(flow.size());
  for (const auto& mu : flow.measures()) {
    if (!mu.has_uniform_weights()) throw ParameterError("cost_chaos: law flow must be a uniform cloud");
    clouds.push_back(mu.atoms());
  }
  return path_cost(flow.times(), clouds, solution.leaders, controls, spec);
}

AtomicIdentity phi_atomic_identity(const ControlSchedule& controls,
                                   const std::vector<Eigen::MatrixXd>& leaders,
                                   const std::vector<double>& gains,
                                   const std::vector<double>& times, const CostSpec& spec) {
  if (times.size() < 2 || leaders.size() + 1 < times.size() || gains.size() + 1 < times.size())
    throw ParameterError("phi_atomic_identity: leader paths and gains must cover every step");
  const auto steps = static_cast<Eigen::Index>(times.size() - 1);
  const Eigen::Index m = controls.leaders();
  if (m == 0) return {};
  const double inv_m = 1.0 / static_cast<double>(m);

  AtomicIdentity out;
  for (Eigen::Index n = 0; n < steps; ++n) {
    const auto k = static_cast<std::size_t>(n);
    const double dt = times[k + 1] - times[k];
    const double g = gains[k];
    Eigen::MatrixXd u = controls.at_step(n, steps);
    if (g == 0.0) u.setZero();
    const Eigen::MatrixXd& y = leaders[k];
    if (y.cols() != m) throw ParameterError("phi_atomic_identity: one path per leader required");

    double direct = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) direct += inv_m * phi(spec, u.col(j), g);
    out.direct += dt * direct;

    // Atoms of nu are the distinct leader positions; the density of theta at
    // an atom is the mean control of the leaders sitting there.
    std::vector<bool> merged(static_cast<std::size_t>(m), false);
    double atomic = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (merged[static_cast<std::size_t>(j)]) continue;
      Eigen::VectorXd sum = u.col(j);
      Eigen::Index count = 1;
      for (Eigen::Index l = j + 1; l < m; ++l) {
        if (merged[static_cast<std::size_t>(l)] || y.col(l) != y.col(j)) continue;
        merged[static_cast<std::size_t>(l)] = true;
        if (u.col(l) != u.col(j)) out.coincidence = true;
        sum += u.col(l);
        ++count;
      }
      const double mass = static_cast<double>(count) * inv_m;
      atomic += mass * phi(spec, sum / static_cast<double>(count), g);
    }
    out.atomic += dt * atomic;
  }
  return out;
}

nlohmann::json to_json(const CostBreakdown& cost) {
  return {{"lagrangian", cost.lagrangian},
          {"control", cost.control},
          {"total", cost.total},
          {"std_error", cost.std_error},
          {"samples", cost.samples}};
}

}  // namespace mfoc
