#include "mfoc/studies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mfoc/cost.hpp"
#include "mfoc/fokker_planck.hpp"
#include "mfoc/io.hpp"
#include "mfoc/parallel.hpp"
#include "mfoc/particle_sim.hpp"

namespace mfoc {

namespace {

StudyCheck make_check(std::string name, double value, double threshold, bool pass) {
  return StudyCheck{std::move(name), value, threshold, pass};
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

MeasureFlow leader_flow(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& leaders) {
  std::vector<EmpiricalMeasure> measures;
  measures.reserve(leaders.size());
  for (const auto& y : leaders) measures.push_back(EmpiricalMeasure::uniform(y));
  return MeasureFlow(times, std::move(measures));
}

double sup_path_gap(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  double worst = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n].cols() == 0) continue;
    worst = std::max(worst, (a[n] - b[n]).colwise().norm().maxCoeff());
  }
  return worst;
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const auto& c : cells) {
    if (!row.empty()) row += ',';
    row += c;
  }
  return row + '\n';
}

}  // namespace

bool StudyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const StudyCheck& c) { return c.pass; });
}

nlohmann::json to_json(const StudyReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  return {{"kind", report.kind},   {"seed", report.seed},     {"config", report.config},
          {"points", report.points}, {"fits", report.fits}, {"checks", std::move(checks)},
          {"pass", report.passed()}};
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("fit_loglog: need at least two points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ParameterError("fit_loglog: values must be positive");
    lx(i) = std::log(x[i]);
    ly(i) = std::log(y[i]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const Eigen::VectorXd dx = lx.array() - mx, dy = ly.array() - my;
  LogLogFit fit;
  fit.slope = dx.dot(dy) / dx.squaredNorm();
  fit.intercept = my - fit.slope * mx;
  const double ss_res = (dy - fit.slope * dx).squaredNorm();
  const double ss_tot = dy.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double w1_to_normal_1d(const EmpiricalMeasure& mu, double mean, double sd) {
  if (mu.dim() != 1) throw ParameterError("w1_to_normal_1d: measure must be one-dimensional");
  if (!(sd > 0.0)) throw ParameterError("w1_to_normal_1d: sd must be positive");
  const auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2)); };
  const auto pdf = [&](double x) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  };
  // Antiderivative of the normal CDF, zero at -infinity.
  const auto primitive = [&](double x) { return (x - mean) * cdf(x) + sd * pdf(x); };
  // int_a^b |level - Phi(x)| dx, splitting at the crossing point.
  const auto segment = [&](double a, double b, double level) {
    const auto signed_part = [&](double lo, double hi) {
      return level * (hi - lo) - (primitive(hi) - primitive(lo));
    };
    if (cdf(a) >= level) return -signed_part(a, b);
    if (cdf(b) <= level) return signed_part(a, b);
    double lo = a, hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < level ? lo : hi) = mid;
    }
    const double cross = 0.5 * (lo + hi);
    return signed_part(a, cross) - signed_part(cross, b);
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(mu.size()));
  for (Eigen::Index i = 0; i < mu.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return mu.atoms()(0, a) < mu.atoms()(0, b);
  });

  const double first = mu.atoms()(0, order.front());
  double total = primitive(first);  // int_{-inf}^{first} Phi
  double level = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    level += mu.weights()(order[k]);
    const double a = mu.atoms()(0, order[k]);
    if (k + 1 == order.size()) break;
    const double b = mu.atoms()(0, order[k + 1]);
    if (b > a) total += segment(a, b, std::min(level, 1.0));
  }
  const double last = mu.atoms()(0, order.back());
  total += sd * pdf(last) - (last - mean) * (1.0 - cdf(last));  // int_{last}^{inf} (1 - Phi)
  return total;
}

StudyReport run_chaos_study(const ProblemSpec& problem, const ChaosStudyOptions& options) {
  problem.validate();
  if (options.followers.size() < 2) throw ParameterError("chaos study: need at least two population sizes");
  if (options.replicates < 1 || options.realizations < 1)
    throw ParameterError("chaos study: replicates and realizations must be >= 1");

  const NoisePlan noise = problem.noise();
  const ControlSchedule controls =
      ControlSchedule::zeros(problem.dim, problem.leaders, 1, problem.horizon, problem.gain);

  // Reference law on its own sample id; realizations use ids 1, 2, ...
  MckeanOptions ref_options = options.mckean;
  ref_options.samples = options.reference_samples;
  ref_options.sample_id = 0;
  ref_options.threads = options.threads;
  const MckeanSolution reference = solve_mckean(problem, controls, noise, ref_options);
  const CostBreakdown mean_field_cost = cost_chaos(reference, controls, problem.cost);

  const std::size_t sizes = options.followers.size();
  const auto reps = static_cast<std::size_t>(options.replicates);
  const auto per_rep = static_cast<std::size_t>(options.realizations);

  struct Cell {
    double follower = 0.0, leader = 0.0;  // replicate means
    std::vector<double> costs;
  };
  std::vector<Cell> cells(sizes * reps);
  parallel_for(cells.size(), options.threads, [&](std::size_t idx) {
    const std::size_t i = idx / reps, r = idx % reps;
    ProblemSpec sized = problem;
    sized.followers = options.followers[i];
    Cell& cell = cells[idx];
    for (std::size_t k = 0; k < per_rep; ++k) {
      const auto sample = static_cast<std::uint32_t>(1 + r * per_rep + k);
      const EnsembleTrajectory traj = simulate_finite(sized, controls, noise, sample);
      const auto copies = propagate_copies(sized, reference, traj.followers.front(), noise, sample);
      cell.follower += sup_path_gap(traj.followers, copies);
      cell.leader += sup_path_gap(traj.leaders, reference.leaders);
      cell.costs.push_back(path_cost(traj.times, traj.followers, traj.leaders, controls, problem.cost).total);
    }
    cell.follower /= static_cast<double>(per_rep);
    cell.leader /= static_cast<double>(per_rep);
  });

  StudyReport report;
  report.kind = "chaos";
  report.seed = problem.seed;
  std::ostringstream csv;
  csv << "followers,replicate,follower_error,leader_error,coupling_error\n";

  std::vector<double> axis, follower_means, coupling_means, gaps, gap_errors;
  for (std::size_t i = 0; i < sizes; ++i) {
    std::vector<double> fol, cpl, costs;
    for (std::size_t r = 0; r < reps; ++r) {
      const Cell& c = cells[i * reps + r];
      fol.push_back(c.follower);
      cpl.push_back(c.follower + c.leader);
      costs.insert(costs.end(), c.costs.begin(), c.costs.end());
      csv << csv_row({std::to_string(options.followers[i]), std::to_string(r), format_double(c.follower),
                      format_double(c.leader), format_double(c.follower + c.leader)});
    }
    const double finite_cost = mean_of(costs);
    const double gap = std::abs(finite_cost - mean_field_cost.total);
    axis.push_back(static_cast<double>(options.followers[i]));
    follower_means.push_back(mean_of(fol));
    coupling_means.push_back(mean_of(cpl));
    gaps.push_back(gap);
    gap_errors.push_back(stderr_of(costs));
    report.points.push_back({{"followers", options.followers[i]},
                             {"follower_error", {{"mean", mean_of(fol)}, {"std_error", stderr_of(fol)}}},
                             {"coupling_error", {{"mean", mean_of(cpl)}, {"std_error", stderr_of(cpl)}}},
                             {"finite_cost", {{"mean", finite_cost}, {"std_error", stderr_of(costs)}}},
                             {"cost_gap", gap},
                             {"replicates", options.replicates},
                             {"realizations_per_replicate", options.realizations}});
  }
  report.csv = csv.str();

  const bool trivially_zero =
      std::all_of(follower_means.begin(), follower_means.end(), [](double e) { return e == 0.0; });
  report.fits["mean_field_cost"] = to_json(mean_field_cost);
  report.fits["reference_iterations"] = reference.iterations;
  report.fits["reference_residual"] = reference.residual;

  if (trivially_zero) {
    report.checks.push_back(make_check("coupling_error_zero", 0.0, 0.0, true));
  } else {
    const LogLogFit fit = fit_loglog(axis, follower_means);
    const LogLogFit coupled = fit_loglog(axis, coupling_means);
    report.fits["follower_slope"] = {{"slope", fit.slope}, {"r_squared", fit.r_squared}};
    report.fits["coupling_slope"] = {{"slope", coupled.slope}, {"r_squared", coupled.r_squared}};
    report.checks.push_back(make_check("follower_slope", fit.slope, options.max_slope, fit.slope <= options.max_slope));

    std::size_t violations = 0;
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t i = 0; i + 1 < sizes; ++i)
        if (!(cells[(i + 1) * reps + r].follower < cells[i * reps + r].follower)) ++violations;
    report.checks.push_back(make_check("strictly_decreasing_per_replicate",
                                       static_cast<double>(violations), 0.0, violations == 0));
  }

  // |finite cost - mean-field cost| must not grow by more than twice the
  // standard error of the difference between neighbouring gaps.
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < sizes; ++i) {
    const double slack = 2.0 * std::hypot(gap_errors[i], gap_errors[i + 1]);
    worst_excess = std::max(worst_excess, gaps[i + 1] - gaps[i] - slack);
  }
  report.checks.push_back(make_check("cost_gap_decreasing", worst_excess, 0.0, worst_excess <= 0.0));
  return report;
}

StudyReport run_gamma_study(const OptProblem& base, const GammaStudyOptions& options) {
  if (options.leaders.size() < 3) throw ParameterError("gamma study: need at least three leader counts");
  if (base.problem.leader_init.positions)
    throw ParameterError("gamma study: leader initial points must be drawn from a law");

  StudyReport report;
  report.kind = "gamma";
  report.seed = base.problem.seed;
  std::ostringstream csv;
  csv << "leaders,min_cost,std_error,baseline_cost,evaluations,status\n";

  struct Point {
    bool ok = false;
    double cost = 0.0, std_error = 0.0;
    std::optional<MckeanSolution> solution;
  };
  std::vector<Point> points(options.leaders.size());
  for (std::size_t i = 0; i < options.leaders.size(); ++i) {
    OptProblem opt = base;
    opt.problem.leaders = options.leaders[i];
    nlohmann::json entry = {{"leaders", options.leaders[i]}};
    try {
      const OptResult result = optimize(opt);
      MckeanOptions mk = opt.mckean;
      mk.samples = opt.problem.law_samples;
      mk.threads = opt.threads;
      points[i] = Point{true, result.cost_value, result.std_error,
                        solve_mckean(opt.problem, result.controls, opt.problem.noise(), mk)};
      entry["min_cost"] = {{"mean", result.cost_value}, {"std_error", result.std_error}};
      entry["baseline_cost"] = result.baseline_cost;
      entry["evaluations"] = result.evaluations;
      entry["status"] = "ok";
      csv << csv_row({std::to_string(options.leaders[i]), format_double(result.cost_value),
                      format_double(result.std_error), format_double(result.baseline_cost),
                      std::to_string(result.evaluations), "ok"});
    } catch (const std::exception& e) {
      entry["status"] = std::string("failed: ") + e.what();
      csv << csv_row({std::to_string(options.leaders[i]), "", "", "", "", "failed"});
    }
    report.points.push_back(std::move(entry));
  }
  report.csv = csv.str();

  // W1 between successive minimizing flows at t = T (follower and leader laws).
  nlohmann::json successive = nlohmann::json::array();
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!points[i].ok || !points[i + 1].ok) continue;
    const auto& a = *points[i].solution;
    const auto& b = *points[i + 1].solution;
    const auto& transport = base.problem.cost.transport;
    nlohmann::json item = {{"from", options.leaders[i]},
                           {"to", options.leaders[i + 1]},
                           {"cost_difference", std::abs(points[i + 1].cost - points[i].cost)},
                           {"follower_w1_at_T",
                            wasserstein1_capped(a.law_flow.measures().back(), b.law_flow.measures().back(), transport)}};
    if (a.leaders.back().cols() > 0 && b.leaders.back().cols() > 0) {
      item["leader_w1_at_T"] = wasserstein1_capped(EmpiricalMeasure::uniform(a.leaders.back()),
                                                   EmpiricalMeasure::uniform(b.leaders.back()), transport);
    }
    successive.push_back(std::move(item));
  }
  report.fits["successive"] = std::move(successive);

  const bool all_ok = std::all_of(points.begin(), points.end(), [](const Point& p) { return p.ok; });
  report.checks.push_back(make_check("all_points_optimized", all_ok ? 1.0 : 0.0, 1.0, all_ok));
  if (all_ok) {
    const std::size_t n = points.size();
    const double first = std::abs(points[1].cost - points[0].cost);
    const double last = std::abs(points[n - 1].cost - points[n - 2].cost);
    const double slack = 2.0 * std::hypot(points[n - 1].std_error, points[n - 2].std_error);
    report.checks.push_back(make_check("cauchy_trend", last, first + slack, last <= first + slack));
  }
  return report;
}

StudyReport run_stability_study(const ProblemSpec& problem, const StabilityStudyOptions& options) {
  problem.validate();
  if (problem.leaders < 1) throw ParameterError("stability study: need at least one leader");
  if (options.scales.empty()) throw ParameterError("stability study: no perturbation scales");

  const NoisePlan noise = problem.noise();
  MckeanOptions mk = options.mckean;
  mk.samples = problem.law_samples;
  mk.threads = options.threads;
  const ControlSchedule controls =
      ControlSchedule::zeros(problem.dim, problem.leaders, 1, problem.horizon, problem.gain);
  const MckeanSolution free_run = solve_mckean(problem, controls, noise, mk);
  const auto times = problem.time_grid();
  const MeasureFlow nu_ref = leader_flow(times, free_run.leaders);
  const MckeanSolution base = solve_fixed_nu(problem, nu_ref, noise, mk);

  StudyReport report;
  report.kind = "stability";
  report.seed = problem.seed;
  std::ostringstream csv;
  csv << "scale,sup_mean_abs_difference,integrated_w1,ratio\n";

  std::vector<double> ratios;
  for (double scale : options.scales) {
    if (!(scale >= 0.0)) throw ParameterError("stability study: scales must be >= 0");
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(problem.dim);
    shift(0) = scale;
    const MeasureFlow nu_shifted = translate(nu_ref, shift);
    const MckeanSolution moved = solve_fixed_nu(problem, nu_shifted, noise, mk);

    double sup_diff = 0.0;
    for (std::size_t n = 0; n < times.size(); ++n) {
      const Eigen::MatrixXd delta = base.law_flow[n].atoms() - moved.law_flow[n].atoms();
      sup_diff = std::max(sup_diff, delta.colwise().norm().mean());
    }
    double integrated = 0.0;
    for (std::size_t n = 0; n + 1 < times.size(); ++n)
      integrated += (times[n + 1] - times[n]) * wasserstein1_capped(nu_ref[n], nu_shifted[n], problem.cost.transport);

    nlohmann::json entry = {{"scale", scale}, {"sup_mean_abs_difference", sup_diff}, {"integrated_w1", integrated}};
    std::string ratio_text;
    if (integrated > 0.0) {
      const double ratio = sup_diff / integrated;
      entry["ratio"] = ratio;
      ratio_text = format_double(ratio);
      if (sup_diff > 0.0) ratios.push_back(ratio);
    }
    csv << csv_row({format_double(scale), format_double(sup_diff), format_double(integrated), ratio_text});
    report.points.push_back(std::move(entry));
  }
  report.csv = csv.str();

  if (ratios.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    const double spread = *hi / *lo;
    report.fits["ratio_spread"] = spread;
    report.checks.push_back(make_check("ratio_spread", spread, options.max_ratio_spread,
                                       spread <= options.max_ratio_spread));
  } else if (ratios.empty()) {
    // The field ignores the leaders (or every scale is zero): no response at all.
    double worst = 0.0;
    for (const auto& p : report.points) worst = std::max(worst, p["sup_mean_abs_difference"].get<double>());
    report.checks.push_back(make_check("zero_response", worst, 0.0, worst == 0.0));
  }
  return report;
}

StudyReport run_fp_crosscheck(const ProblemSpec& problem, const FpCheckOptions& options) {
  if (problem.dim != 1) throw UnsupportedSpec("fp crosscheck: only d = 1 is supported");
  problem.validate();
  if (options.levels.empty()) throw ParameterError("fp crosscheck: no refinement levels");
  if (options.reference_mean.has_value() != options.reference_variance.has_value())
    throw ParameterError("fp crosscheck: reference needs both mean and variance");

  const NoisePlan noise = problem.noise();
  const ControlSchedule controls =
      ControlSchedule::zeros(problem.dim, problem.leaders, 1, problem.horizon, problem.gain);
  const auto times = problem.time_grid();
  const std::size_t mid = (times.size() - 1) / 2, end = times.size() - 1;

  StudyReport report;
  report.kind = "fpcheck";
  report.seed = problem.seed;
  std::ostringstream csv;
  csv << "samples,cells,t,w1_fp_particles,w1_particles_reference,w1_fp_reference\n";

  std::vector<double> w1_mid, w1_end, law_ref, fp_ref;
  for (const FpLevel& level : options.levels) {
    ProblemSpec sized = problem;
    sized.law_samples = level.samples;
    MckeanOptions mk = options.mckean;
    mk.samples = level.samples;
    mk.threads = options.threads;
    const MckeanSolution law = solve_mckean(sized, controls, noise, mk);
    std::optional<MeasureFlow> nu;
    if (problem.leaders > 0) nu.emplace(leader_flow(times, law.leaders));
    const DensityFlow density = fp_solve(sized, nu, GridSpec{options.x_min, options.x_max, level.cells});

    nlohmann::json entry = {{"samples", level.samples}, {"cells", level.cells},
                            {"picard_iterations", law.iterations}};
    for (const std::size_t n : {mid, end}) {
      const EmpiricalMeasure fp_measure = quantize(density.densities[n]);
      const double w1 = wasserstein1(fp_measure, law.law_flow[n]);
      std::string to_ref_law, to_ref_fp;
      if (options.reference_mean && n == end) {
        const double sd = std::sqrt(*options.reference_variance);
        const double a = w1_to_normal_1d(law.law_flow[n], *options.reference_mean, sd);
        const double b = w1_to_normal_1d(fp_measure, *options.reference_mean, sd);
        law_ref.push_back(a);
        fp_ref.push_back(b);
        entry["w1_particles_reference"] = a;
        entry["w1_fp_reference"] = b;
        to_ref_law = format_double(a);
        to_ref_fp = format_double(b);
      }
      (n == mid ? w1_mid : w1_end).push_back(w1);
      entry[n == mid ? "w1_at_half_T" : "w1_at_T"] = w1;
      csv << csv_row({std::to_string(level.samples), std::to_string(level.cells), format_double(times[n]),
                      format_double(w1), to_ref_law, to_ref_fp});
    }
    entry["max_substeps"] = *std::max_element(density.substeps.begin(), density.substeps.end());
    report.points.push_back(std::move(entry));
  }
  report.csv = csv.str();

  const double finest = std::max(w1_mid.back(), w1_end.back());
  report.checks.push_back(make_check("finest_fp_vs_particles", finest, options.max_w1, finest <= options.max_w1));
  if (options.levels.size() > 1) {
    report.checks.push_back(make_check("refinement_improves", w1_end.back(), w1_end.front(),
                                       w1_end.back() <= w1_end.front()));
  }
  if (options.reference_mean) {
    report.checks.push_back(make_check("particles_vs_reference", law_ref.back(), options.max_w1,
                                       law_ref.back() <= options.max_w1));
    report.checks.push_back(make_check("fp_vs_reference", fp_ref.back(), options.max_w1,
                                       fp_ref.back() <= options.max_w1));
  }
  return report;
}

}  // namespace mfoc
