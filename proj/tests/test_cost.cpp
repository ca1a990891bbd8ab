#include <doctest.h>

#include <random>

#include "mfoc/cost.hpp"
#include "mfoc/mckean.hpp"
#include "mfoc/particle_sim.hpp"
#include "test_support.hpp"

using namespace mfoc;
using mfoc::testing::coupled_1d;
using mfoc::testing::plain_1d;
using mfoc::testing::scalar_vector;

namespace {

CostSpec quadratic_to(double target) {
  CostSpec spec;
  spec.target = EmpiricalMeasure::dirac(scalar_vector(target));
  return spec;
}

// Independent oracle: W1 to a Dirac is the mean distance; gain recomputed from
// its formula; per-step terms summed in plain loops.
double resummed_cost(const std::vector<double>& times, const std::vector<Eigen::MatrixXd>& followers,
                     const ControlSchedule& controls, double target) {
  const auto steps = static_cast<Eigen::Index>(times.size() - 1);
  const GainSpec& g = controls.gain();
  double total = 0.0;
  for (Eigen::Index n = 0; n < steps; ++n) {
    const Eigen::MatrixXd& x = followers[static_cast<std::size_t>(n)];
    const double dt = times[static_cast<std::size_t>(n) + 1] - times[static_cast<std::size_t>(n)];
    total += dt * (x.array() - target).abs().mean();
    const double gain = std::clamp(g.theta0 + g.theta1 * std::tanh(x.array().abs().mean()), -g.delta, g.delta);
    const Eigen::MatrixXd& u = controls.at_step(n, steps);
    double running = 0.0;
    for (Eigen::Index j = 0; j < u.cols(); ++j) running += u.col(j).squaredNorm() * (1.0 + gain * gain);
    total += dt * running / static_cast<double>(u.cols());
  }
  return total;
}

}  // namespace

TEST_CASE("lagrangian examples") {
  const auto origin = EmpiricalMeasure::dirac(scalar_vector(0.0));
  const auto two = EmpiricalMeasure::dirac(scalar_vector(2.0));
  CostSpec spec = quadratic_to(2.0);
  CHECK(lagrangian(spec, two, nullptr) == 0.0);
  CHECK(lagrangian(spec, origin, nullptr) == 2.0);
  spec.lagrangian = LagrangianKind::squared_w1_to_target;
  CHECK(lagrangian(spec, origin, nullptr) == 4.0);
  spec.lagrangian = LagrangianKind::leader_follower_w1;
  CHECK(lagrangian(spec, two, &two) == 0.0);
  CHECK_THROWS_AS(lagrangian(spec, two, nullptr), ParameterError);
  CostSpec wrong_dim;
  wrong_dim.target = EmpiricalMeasure::dirac(Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(lagrangian(wrong_dim, origin, nullptr), ParameterError);
}

TEST_CASE("phi examples") {
  CostSpec spec;
  CHECK(phi(spec, Eigen::Vector2d::Zero(), 7.0) == 0.0);
  CHECK(phi(spec, Eigen::Vector2d(3.0, 4.0), -1.3) == 25.0);
  spec.phi = PhiKind::quadratic_weighted;
  CHECK(phi(spec, Eigen::Vector2d(1.0, 0.0), 2.0) == 5.0);
  CHECK(phi(spec, Eigen::Vector2d::Zero(), 2.0) == 0.0);
}

TEST_CASE("phi is convex in u on random triples") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (PhiKind kind : {PhiKind::quadratic, PhiKind::quadratic_weighted}) {
    CostSpec spec;
    spec.phi = kind;
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::Vector3d a(normal(gen), normal(gen), normal(gen)), b(normal(gen), normal(gen), normal(gen));
      const double lambda = unit(gen), xi = normal(gen);
      CHECK(phi(spec, lambda * a + (1.0 - lambda) * b, xi) <=
            lambda * phi(spec, a, xi) + (1.0 - lambda) * phi(spec, b, xi) + 1e-12);
    }
  }
}

TEST_CASE("phi grows superlinearly") {
  CostSpec spec;
  const Eigen::Vector2d u(0.3, -0.1);
  double previous = 0.0;
  for (double r : {1.0, 10.0, 100.0, 1000.0}) {
    const double ratio = phi(spec, r * u, 0.5) / r;
    CHECK(ratio > previous);
    previous = ratio;
  }
}

TEST_CASE("zero controls give an exactly zero control term") {
  ProblemSpec p = coupled_1d(40);
  const auto controls = ControlSchedule::zeros(1, 1, 2, p.horizon, p.gain);
  const auto batch = simulate_batch(p, controls, p.noise(), 0, 3, 1);
  CHECK(cost_finite(batch, controls, p.cost).control == 0.0);
}

TEST_CASE("constant control with unit gain costs T |c|^2") {
  ProblemSpec p = plain_1d(1.5, 0.01, 0.1, 20);
  p.gain = GainSpec{1.0, 0.0, 1.0, 1.0};
  const double c = 0.7;
  const auto controls = ControlSchedule::constant(Eigen::MatrixXd::Constant(1, 1, c), 3, p.horizon, p.gain);
  const auto batch = simulate_batch(p, controls, p.noise(), 0, 2, 1);
  CHECK(std::abs(cost_finite(batch, controls, p.cost).control - 1.5 * c * c) <= 1e-12);
}

TEST_CASE("finite and mean-field costs match an independent re-summation") {
  ProblemSpec p = coupled_1d(30);
  p.law_samples = 200;
  p.gain = GainSpec{0.6, 0.3, 0.9, 0.5};
  p.cost.phi = PhiKind::quadratic_weighted;
  std::vector<Eigen::MatrixXd> values{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, -0.2)};
  const ControlSchedule controls(p.horizon, values, p.gain);

  const auto batch = simulate_batch(p, controls, p.noise(), 0, 4, 1);
  double oracle = 0.0;
  for (const auto& traj : batch) oracle += resummed_cost(traj.times, traj.followers, controls, 2.0);
  oracle /= 4.0;
  CHECK(cost_finite(batch, controls, p.cost).total == doctest::Approx(oracle).epsilon(1e-12));

  MckeanOptions o;
  o.samples = p.law_samples;
  const auto sol = solve_mckean(p, controls, p.noise(), o);
  std::vector<Eigen::MatrixXd> clouds;
  for (const auto& mu : sol.law_flow.measures()) clouds.push_back(mu.atoms());
  CHECK(cost_chaos(sol, controls, p.cost).total ==
        doctest::Approx(resummed_cost(sol.law_flow.times(), clouds, controls, 2.0)).epsilon(1e-12));
}

TEST_CASE("empty batch is an error") {
  ProblemSpec p = plain_1d();
  CHECK_THROWS_AS(cost_finite({}, ControlSchedule::zeros(1, 1, 1, p.horizon, p.gain), p.cost), ParameterError);
}

TEST_CASE("mean-field cost is invariant under relabelling leaders and controls together") {
  ProblemSpec p = coupled_1d(30);
  p.law_samples = 300;
  p.leaders = 3;
  Eigen::MatrixXd y0(1, 3), u(1, 3);
  y0 << 1.0, -0.5, 2.0;
  u << 0.3, -0.6, 0.1;
  const std::vector<int> perm{2, 0, 1};
  Eigen::MatrixXd y0p(1, 3), up(1, 3);
  for (int j = 0; j < 3; ++j) {
    y0p(0, j) = y0(0, perm[j]);
    up(0, j) = u(0, perm[j]);
  }
  MckeanOptions o;
  o.samples = p.law_samples;
  p.leader_init.positions = y0;
  const auto c1 = ControlSchedule::constant(u, 1, p.horizon, p.gain);
  const double e1 = cost_chaos(solve_mckean(p, c1, p.noise(), o), c1, p.cost).total;
  p.leader_init.positions = y0p;
  const auto c2 = ControlSchedule::constant(up, 1, p.horizon, p.gain);
  const double e2 = cost_chaos(solve_mckean(p, c2, p.noise(), o), c2, p.cost).total;
  CHECK(std::abs(e1 - e2) <= 1e-12);
}

TEST_CASE("atomic identity for the control cost") {
  const std::vector<double> times{0.0, 0.5, 1.0};
  const std::vector<double> gains{1.0, 0.7};
  CostSpec spec;
  spec.phi = PhiKind::quadratic_weighted;

  SUBCASE("single leader: both sides identical") {
    const ControlSchedule c(1.0, {Eigen::MatrixXd::Constant(1, 1, 0.4), Eigen::MatrixXd::Constant(1, 1, -1.0)}, {});
    const std::vector<Eigen::MatrixXd> y{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1)};
    const auto id = phi_atomic_identity(c, y, gains, times, spec);
    CHECK(id.direct == id.atomic);
    CHECK_FALSE(id.coincidence);
  }
  SUBCASE("two distinct leaders with distinct controls") {
    Eigen::MatrixXd u(1, 2);
    u << 0.3, -0.8;
    const auto c = ControlSchedule::constant(u, 2, 1.0, {});
    Eigen::MatrixXd y(1, 2);
    y << 0.0, 1.0;
    const auto id = phi_atomic_identity(c, {y, y}, gains, times, spec);
    const double expected = 0.5 * (0.09 + 0.64) * (0.5 * 2.0 + 0.5 * 1.49);
    CHECK(std::abs(id.direct - expected) <= 1e-12);
    CHECK(std::abs(id.atomic - id.direct) <= 1e-12);
  }
  SUBCASE("zero controls") {
    const auto c = ControlSchedule::zeros(2, 3, 1, 1.0, {});
    const std::vector<Eigen::MatrixXd> y(2, Eigen::MatrixXd::Random(2, 3));
    const auto id = phi_atomic_identity(c, y, gains, times, spec);
    CHECK(id.direct == 0.0);
    CHECK(id.atomic == 0.0);
  }
  SUBCASE("coinciding leaders with different controls raise the flag") {
    Eigen::MatrixXd u(1, 2);
    u << 1.0, -1.0;
    const auto c = ControlSchedule::constant(u, 1, 1.0, {});
    const std::vector<Eigen::MatrixXd> y(2, Eigen::MatrixXd::Zero(1, 2));
    const auto id = phi_atomic_identity(c, y, gains, times, spec);
    CHECK(id.coincidence);
    CHECK(id.atomic == 0.0);  // the merged density is the mean control, zero here
    CHECK(id.direct > 0.0);
  }
  SUBCASE("controls are zeroed where the gain vanishes") {
    const auto c = ControlSchedule::constant(Eigen::MatrixXd::Ones(1, 1), 1, 1.0, {});
    const std::vector<Eigen::MatrixXd> y(2, Eigen::MatrixXd::Zero(1, 1));
    const auto id = phi_atomic_identity(c, y, {0.0, 1.0}, times, spec);
    CHECK(id.direct == doctest::Approx(0.5 * 2.0));
  }
}

TEST_CASE("cost breakdown JSON") {
  CostBreakdown b{1.0, 0.5, 1.5, 0.1, 4};
  const auto j = to_json(b);
  CHECK(j.at("total").get<double>() == 1.5);
  CHECK(j.at("samples").get<int>() == 4);
}
