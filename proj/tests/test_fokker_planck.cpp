#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mfoc/fokker_planck.hpp"
#include "mfoc/studies.hpp"
#include "test_support.hpp"

using namespace mfoc;
using mfoc::testing::plain_1d;
using mfoc::testing::scalar_matrix;
using mfoc::testing::scalar_vector;

namespace {

double grid_mean(const GridDensity& rho) { return rho.centers().dot(rho.values()) * rho.dx(); }

double grid_variance(const GridDensity& rho) {
  const double m = grid_mean(rho);
  return (rho.centers().array() - m).square().matrix().dot(rho.values()) * rho.dx();
}

}  // namespace

TEST_CASE("initial cell averages integrate the Gaussian exactly") {
  const GridSpec grid{-4.0, 4.0, 160};
  const auto law = InitialLaw::gaussian(scalar_vector(0.5), scalar_matrix(0.25));
  const auto rho = GridDensity::from_law(grid, law);
  CHECK(rho.mass() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(grid_mean(rho) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(grid_variance(rho) == doctest::Approx(0.25 + rho.dx() * rho.dx() / 12.0).epsilon(1e-4));
}

TEST_CASE("explicit steps conserve mass and positivity") {
  const GridSpec grid{-3.0, 3.0, 120};
  auto rho = GridDensity::from_law(grid, InitialLaw::gaussian(scalar_vector(1.0), scalar_matrix(0.1)));
  Eigen::VectorXd drift = -2.0 * rho.centers();
  const double dt = fp_stable_dt(rho, drift, 0.3);
  for (int k = 0; k < 400; ++k) {
    rho = fp_step(rho, drift, 0.3, dt);
    CHECK((rho.values().array() >= 0.0).all());
  }
  CHECK(std::abs(rho.mass() - 1.0) <= 1e-12);
}

TEST_CASE("a step beyond the stability bound is refused") {
  const GridSpec grid{-1.0, 1.0, 40};
  const auto rho = GridDensity::from_law(grid, InitialLaw::gaussian(scalar_vector(0.0), scalar_matrix(0.1)));
  const Eigen::VectorXd drift = Eigen::VectorXd::Constant(40, 1.0);
  const double limit = fp_stable_dt(rho, drift, 0.5);
  CHECK(limit == doctest::Approx(0.9 / (2.0 / rho.dx() + 1.0 / (rho.dx() * rho.dx()))));
  CHECK_NOTHROW(fp_step(rho, drift, 0.5, limit));
  CHECK_THROWS_AS(fp_step(rho, drift, 0.5, 1.01 * limit), StepSizeError);
}

TEST_CASE("constant drift transports the mean exactly") {
  ProblemSpec p = plain_1d(1.0, 0.05, 0.0, 10, 0.04);
  p.leaders = 0;
  p.v.external.offset = scalar_vector(1.5);
  const auto flow = fp_solve(p, std::nullopt, GridSpec{-2.0, 4.0, 300});
  CHECK(grid_mean(flow.densities.back()) == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("pure diffusion adds 2 sigma t to the variance") {
  ProblemSpec p = plain_1d(0.5, 0.05, 0.4, 10, 0.2);
  p.leaders = 0;
  const auto flow = fp_solve(p, std::nullopt, GridSpec{-6.0, 6.0, 480});
  const double expected = 0.2 + 2.0 * 0.4 * 0.5 + std::pow(flow.densities.back().dx(), 2) / 12.0;
  CHECK(grid_variance(flow.densities.back()) == doctest::Approx(expected).epsilon(2e-3));
}

TEST_CASE("OU relaxes to its stationary Gaussian") {
  ProblemSpec p = plain_1d(5.0, 0.01, 0.25, 10, 1.0);
  p.leaders = 0;
  p.follower_init = InitialLaw::gaussian(scalar_vector(1.0), scalar_matrix(0.5));
  p.v.external.linear = scalar_matrix(-1.0);
  const auto flow = fp_solve(p, std::nullopt, GridSpec{-5.0, 5.0, 400});
  CHECK(w1_to_normal_1d(quantize(flow.densities.back()), 0.0, 0.5) < 0.02);
}

TEST_CASE("quantization keeps mass and drops empty cells") {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(20);
  values(3) = 1.0;
  values(10) = 1.0;
  const GridDensity rho(GridSpec{0.0, 1.0, 20}, values * 10.0);
  const auto mu = quantize(rho);
  CHECK(mu.size() == 2);
  CHECK(mu.weights().sum() == doctest::Approx(1.0));
  CHECK(mu.atoms()(0, 0) == doctest::Approx(0.175));
}

TEST_CASE("multi-dimensional problems are unsupported") {
  ProblemSpec p = plain_1d();
  p.dim = 2;
  CHECK_THROWS_AS(fp_solve(p, std::nullopt, GridSpec{}), UnsupportedSpec);
}

TEST_CASE("density CSV header") {
  ProblemSpec p = plain_1d(0.1, 0.05, 0.1, 10, 0.5);
  p.leaders = 0;
  const auto flow = fp_solve(p, std::nullopt, GridSpec{-3.0, 3.0, 30});
  std::ostringstream out;
  write_density_csv(out, flow, 1);
  CHECK(out.str().rfind("t,cell_center,density\n", 0) == 0);
}
