#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <vector>

#include "mfoc/measures.hpp"
#include "mfoc/problem.hpp"

namespace mfoc {

struct GridSpec {
  double x_min = -5.0;
  double x_max = 5.0;
  Eigen::Index cells = 400;
};

/// Cell-averaged probability density on a uniform 1D grid.
class GridDensity {
 public:
  GridDensity(GridSpec grid, Eigen::VectorXd values);

  /// Cell averages of a Gaussian mixture (exact via erf), renormalized to mass 1.
  static GridDensity from_law(const GridSpec& grid, const InitialLaw& law);

  const GridSpec& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index cells() const noexcept { return grid_.cells; }
  double dx() const noexcept { return (grid_.x_max - grid_.x_min) / static_cast<double>(grid_.cells); }
  double center(Eigen::Index i) const { return grid_.x_min + (static_cast<double>(i) + 0.5) * dx(); }
  Eigen::VectorXd centers() const;
  double mass() const { return values_.sum() * dx(); }

 private:
  GridSpec grid_;
  Eigen::VectorXd values_;
};

/// Largest step accepted by fp_step: 0.9 / (2 max|a| / dx + 2 sigma / dx^2),
/// with a the interface velocities. Infinite when nothing moves.
double fp_stable_dt(const GridDensity& rho, const Eigen::VectorXd& drift, double sigma);

/// One explicit step of d_t rho = sigma rho'' - (a rho)' with first-order
/// upwind advective fluxes, centered diffusive fluxes and no-flux walls.
/// Interface velocities average the adjacent cell drifts. Throws StepSizeError
/// if dt exceeds fp_stable_dt (no silent sub-stepping).
GridDensity fp_step(const GridDensity& rho, const Eigen::VectorXd& drift, double sigma, double dt);

/// One atom per cell center carrying the cell mass; empty cells are dropped.
EmpiricalMeasure quantize(const GridDensity& rho);

struct DensityFlow {
  std::vector<double> times;
  std::vector<GridDensity> densities;
  std::vector<Eigen::Index> substeps;  // explicit sub-steps used on each outer step
};

/// Nonlinear Fokker-Planck solve for the follower density on the problem grid,
/// with drift v(x, quantize(rho_t), nu_t) recomputed on every sub-step. Each
/// outer step dt is split into the smallest number of equal sub-steps that
/// satisfies the stability bound. `nu_flow` supplies the leader measure
/// (absent: no leaders). d must be 1.
DensityFlow fp_solve(const ProblemSpec& problem, const std::optional<MeasureFlow>& nu_flow,
                     const GridSpec& grid);

/// CSV export: t,cell_center,density.
void write_density_csv(std::ostream& out, const DensityFlow& flow, std::size_t stride = 1);

}  // namespace mfoc
