#include "mfoc/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mfoc/fields.hpp"
#include "mfoc/io.hpp"

namespace mfoc {

namespace {

constexpr double kCourant = 0.9;

Eigen::VectorXd interface_velocities(const Eigen::VectorXd& drift) {
  const Eigen::Index n = drift.size();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n + 1);  // a(0), a(n) are walls
  for (Eigen::Index i = 1; i < n; ++i) a(i) = 0.5 * (drift(i - 1) + drift(i));
  return a;
}

}  // namespace

GridDensity::GridDensity(GridSpec grid, Eigen::VectorXd values)
    : grid_(grid), values_(std::move(values)) {
  if (grid_.cells < 16) throw ParameterError("grid density: need at least 16 cells");
  if (!(grid_.x_max > grid_.x_min)) throw ParameterError("grid density: empty domain");
  if (values_.size() != grid_.cells) throw ParameterError("grid density: one value per cell required");
  if (!values_.allFinite() || (values_.array() < 0.0).any())
    throw ParameterError("grid density: values must be finite and nonnegative");
  if (std::abs(mass() - 1.0) > 1e-10) throw ParameterError("grid density: mass must be 1");
}

GridDensity GridDensity::from_law(const GridSpec& grid, const InitialLaw& law) {
  if (law.dim() != 1) throw UnsupportedSpec("grid density: only d = 1 is supported");
  const double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.cells);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(grid.cells);
  for (const auto& c : law.components()) {
    const double mean = c.mean(0);
    const double sd = std::sqrt(c.cov(0, 0));
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); };
    for (Eigen::Index i = 0; i < grid.cells; ++i) {
      const double left = grid.x_min + static_cast<double>(i) * dx;
      mass(i) += c.weight * (cdf(left + dx) - cdf(left));
    }
  }
  const double total = mass.sum();
  if (!(total > 0.0)) throw ParameterError("grid density: law has no mass on the domain");
  return GridDensity(grid, mass / (total * dx));
}

Eigen::VectorXd GridDensity::centers() const {
  Eigen::VectorXd c(cells());
  for (Eigen::Index i = 0; i < cells(); ++i) c(i) = center(i);
  return c;
}

double fp_stable_dt(const GridDensity& rho, const Eigen::VectorXd& drift, double sigma) {
  if (drift.size() != rho.cells()) throw ParameterError("fp: one drift value per cell required");
  const double dx = rho.dx();
  const double speed = interface_velocities(drift).cwiseAbs().maxCoeff();
  const double rate = 2.0 * speed / dx + 2.0 * sigma / (dx * dx);
  return rate > 0.0 ? kCourant / rate : std::numeric_limits<double>::infinity();
}

GridDensity fp_step(const GridDensity& rho, const Eigen::VectorXd& drift, double sigma, double dt) {
  if (!(dt > 0.0)) throw ParameterError("fp_step: dt must be positive");
  if (!(sigma >= 0.0)) throw ParameterError("fp_step: sigma must be >= 0");
  if (!drift.allFinite()) throw NumericError("fp_step: non-finite drift");
  const double limit = fp_stable_dt(rho, drift, sigma);
  if (dt > limit) {
    std::ostringstream msg;
    msg << "fp_step: dt = " << dt << " exceeds the stability limit " << limit;
    throw StepSizeError(msg.str());
  }

  const Eigen::Index n = rho.cells();
  const double dx = rho.dx();
  const Eigen::VectorXd& r = rho.values();
  const Eigen::VectorXd a = interface_velocities(drift);

  Eigen::VectorXd flux = Eigen::VectorXd::Zero(n + 1);
  for (Eigen::Index f = 1; f < n; ++f) {
    const double advective = a(f) > 0.0 ? a(f) * r(f - 1) : a(f) * r(f);
    const double diffusive = -sigma * (r(f) - r(f - 1)) / dx;
    flux(f) = advective + diffusive;
  }
  Eigen::VectorXd next = r - (dt / dx) * (flux.tail(n) - flux.head(n));
  // Under the step restriction every update is a convex combination; clear roundoff negatives.
  next = next.cwiseMax(0.0);
  next /= next.sum() * dx;
  return GridDensity(rho.grid(), std::move(next));
}

EmpiricalMeasure quantize(const GridDensity& rho) {
  std::vector<double> atoms;
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < rho.cells(); ++i) {
    if (rho.values()(i) > 0.0) {
      atoms.push_back(rho.center(i));
      weights.push_back(rho.values()(i) * rho.dx());
    }
  }
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  w /= w.sum();
  Eigen::MatrixXd x = Eigen::Map<Eigen::MatrixXd>(atoms.data(), 1, static_cast<Eigen::Index>(atoms.size()));
  return EmpiricalMeasure(std::move(x), std::move(w));
}

DensityFlow fp_solve(const ProblemSpec& problem, const std::optional<MeasureFlow>& nu_flow,
                     const GridSpec& grid) {
  if (problem.dim != 1) throw UnsupportedSpec("fp_solve: only d = 1 is supported");
  problem.validate();
  const auto times = problem.time_grid();
  if (nu_flow && nu_flow->size() != times.size())
    throw ParameterError("fp_solve: nu flow must live on the problem time grid");

  DensityFlow out;
  out.times = times;
  GridDensity rho = GridDensity::from_law(grid, problem.follower_init);
  out.densities.push_back(rho);
  const Eigen::VectorXd centers = rho.centers();

  auto drift_of = [&](const GridDensity& density, double t, const EmpiricalMeasure* nu) {
    const EmpiricalMeasure mu = quantize(density);
    const FieldEvaluator field(problem.v, t, mu, nu);
    Eigen::VectorXd drift(density.cells());
    for (Eigen::Index i = 0; i < density.cells(); ++i) drift(i) = field(centers.segment(i, 1))(0);
    return drift;
  };

  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const EmpiricalMeasure* nu = nu_flow ? &(*nu_flow)[n] : nullptr;
    const double step = times[n + 1] - times[n];
    // Margin 0.8 absorbs the drift change across sub-steps of one outer step.
    const double limit = 0.8 * fp_stable_dt(rho, drift_of(rho, times[n], nu), problem.sigma);
    const Eigen::Index sub = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(step / limit)));
    const double h = step / static_cast<double>(sub);
    for (Eigen::Index s = 0; s < sub; ++s) {
      const double t = times[n] + static_cast<double>(s) * h;
      rho = fp_step(rho, drift_of(rho, t, nu), problem.sigma, h);
    }
    out.densities.push_back(rho);
    out.substeps.push_back(sub);
  }
  return out;
}

void write_density_csv(std::ostream& out, const DensityFlow& flow, std::size_t stride) {
  if (stride == 0) stride = 1;
  out << "t,cell_center,density\n";
  for (std::size_t n = 0; n < flow.times.size(); ++n) {
    if (n % stride != 0 && n + 1 != flow.times.size()) continue;
    const auto& rho = flow.densities[n];
    for (Eigen::Index i = 0; i < rho.cells(); ++i) {
      out << format_double(flow.times[n]) << ',' << format_double(rho.center(i)) << ','
          << format_double(rho.values()(i)) << '\n';
    }
  }
}

}  // namespace mfoc
