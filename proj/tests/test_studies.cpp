#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfoc/studies.hpp"
#include "test_support.hpp"

using namespace mfoc;
using mfoc::testing::coupled_1d;
using mfoc::testing::plain_1d;
using mfoc::testing::scalar_matrix;
using mfoc::testing::scalar_vector;

namespace {

// Midpoint quadrature of |F_mu - Phi|, split at the atoms so that F_mu is
// constant on every piece.
double w1_quadrature(const EmpiricalMeasure& mu, double mean, double sd) {
  std::vector<double> cuts{mean - 12.0 * sd - 10.0, mean + 12.0 * sd + 10.0};
  for (Eigen::Index i = 0; i < mu.size(); ++i) cuts.push_back(mu.atoms()(0, i));
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
    const double a = cuts[piece], b = cuts[piece + 1];
    if (b <= a) continue;
    double f = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      if (mu.atoms()(0, i) <= a) f += mu.weights()(i);
    const int cells = 200000;
    const double h = (b - a) / cells;
    for (int k = 0; k < cells; ++k) {
      const double x = a + (k + 0.5) * h;
      total += std::abs(f - 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2))) * h;
    }
  }
  return total;
}

const StudyCheck* find_check(const StudyReport& report, const std::string& name) {
  for (const auto& c : report.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("log-log fit recovers an exact power law") {
  const std::vector<double> x{1.0, 4.0, 16.0, 64.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  const auto fit = fit_loglog(x, y);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), ParameterError);
  CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, 0.0}), ParameterError);
}

TEST_CASE("W1 from a Dirac to a normal is sd sqrt(2/pi)") {
  const auto dirac = EmpiricalMeasure::dirac(scalar_vector(0.3));
  CHECK(w1_to_normal_1d(dirac, 0.3, 2.0) == doctest::Approx(2.0 * std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-12));
  // Off-centre Dirac: E|Z - c| for Z ~ N(0, 1).
  const double c = 1.5;
  const double expected = 2.0 * std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi) + c * std::erf(c / std::numbers::sqrt2);
  CHECK(w1_to_normal_1d(EmpiricalMeasure::dirac(scalar_vector(c)), 0.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("W1 to a normal agrees with quadrature on weighted clouds") {
  Eigen::MatrixXd atoms(1, 5);
  atoms << -1.0, 0.2, 0.2, 0.7, 3.0;
  Eigen::VectorXd weights(5);
  weights << 0.1, 0.3, 0.2, 0.25, 0.15;
  const EmpiricalMeasure mu(atoms, weights);
  CHECK(w1_to_normal_1d(mu, 0.5, 0.8) == doctest::Approx(w1_quadrature(mu, 0.5, 0.8)).epsilon(1e-6));
  CHECK_THROWS_AS(w1_to_normal_1d(mu, 0.0, 0.0), ParameterError);
}

TEST_CASE("chaos study: law-independent fields give zero coupling error") {
  ProblemSpec p = plain_1d(0.5, 0.05, 0.3, 10);
  p.v.external.linear = scalar_matrix(-1.0);
  ChaosStudyOptions o;
  o.followers = {4, 8, 16};
  o.replicates = 2;
  o.realizations = 3;
  o.reference_samples = 64;
  const auto report = run_chaos_study(p, o);
  REQUIRE(find_check(report, "coupling_error_zero") != nullptr);
  for (const auto& point : report.points) CHECK(point.at("coupling_error").at("mean").get<double>() == 0.0);
}

TEST_CASE("chaos study on the coupled benchmark") {
  ProblemSpec p = coupled_1d(16);
  ChaosStudyOptions o;
  o.followers = {8, 32, 128};
  o.replicates = 3;
  o.realizations = 6;
  o.reference_samples = 4096;
  o.mckean.tol = 1e-8;
  const auto report = run_chaos_study(p, o);
  CHECK(report.points.size() == 3);
  CHECK(find_check(report, "follower_slope") != nullptr);
  CHECK(find_check(report, "cost_gap_decreasing") != nullptr);
  const double e8 = report.points[0].at("follower_error").at("mean").get<double>();
  const double e128 = report.points[2].at("follower_error").at("mean").get<double>();
  CHECK(e128 < e8);
  CHECK(report.fits.at("follower_slope").at("slope").get<double>() < 0.0);

  o.threads = 3;
  CHECK(to_json(run_chaos_study(p, o)) == to_json(report));
}

TEST_CASE("stability study: leader-blind fields show no response") {
  ProblemSpec p = plain_1d(0.5, 0.05, 0.2, 10);
  p.law_samples = 200;
  p.v.follower_kernels.push_back(LinearKernel{scalar_matrix(-1.0)});
  const auto report = run_stability_study(p, StabilityStudyOptions{});
  const auto* check = find_check(report, "zero_response");
  REQUIRE(check != nullptr);
  CHECK(check->pass);
}

TEST_CASE("stability study: linear leader coupling responds linearly") {
  ProblemSpec p = coupled_1d(16);
  p.law_samples = 300;
  StabilityStudyOptions o;
  o.mckean.tol = 1e-10;
  const auto report = run_stability_study(p, o);
  const auto* check = find_check(report, "ratio_spread");
  REQUIRE(check != nullptr);
  CHECK(check->value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(report.passed());
}

TEST_CASE("Fokker-Planck cross-check on an Ornstein-Uhlenbeck law") {
  ProblemSpec p = plain_1d(1.0, 0.01, 0.25, 10, 0.25);
  p.leaders = 0;
  p.v.external.linear = scalar_matrix(-1.0);
  FpCheckOptions o;
  o.levels = {{500, 100}, {4000, 200}};
  o.reference_mean = 0.0;
  o.reference_variance = 0.25;
  o.max_w1 = 0.06;
  const auto report = run_fp_crosscheck(p, o);
  CHECK(report.points.size() == 2);
  CHECK(report.passed());
  o.reference_variance.reset();
  CHECK_THROWS_AS(run_fp_crosscheck(p, o), ParameterError);
}

TEST_CASE("gamma study needs drawn leaders and reports every count") {
  OptProblem base;
  base.problem = coupled_1d(16);
  base.problem.law_samples = 100;
  base.objective = Objective::finite_particle;
  base.starts = 1;
  base.max_evaluations = 7;
  base.samples = 2;
  GammaStudyOptions o;
  o.leaders = {1, 2, 3};
  CHECK_THROWS_AS(run_gamma_study(base, o), ParameterError);

  base.problem.leader_init.positions.reset();
  base.problem.leader_init.law = InitialLaw::gaussian(scalar_vector(1.0), scalar_matrix(0.1));
  const auto report = run_gamma_study(base, o);
  CHECK(report.points.size() == 3);
  CHECK(report.fits.at("successive").size() == 2);
  CHECK(find_check(report, "cauchy_trend") != nullptr);
}
