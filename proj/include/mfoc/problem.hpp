#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "mfoc/fields.hpp"
#include "mfoc/measures.hpp"
#include "mfoc/rng.hpp"

namespace mfoc {

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Gaussian mixture law with a density (finite entropy requires every
/// covariance to be positive definite).
class InitialLaw {
 public:
  InitialLaw() = default;
  explicit InitialLaw(std::vector<GaussianComponent> components);
  static InitialLaw gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  Eigen::Index dim() const;
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  Eigen::VectorXd mean() const;

  /// Point drawn from stream `stream` at address (sample, index).
  Eigen::VectorXd sample(const NoisePlan& noise, Stream stream, std::uint32_t sample,
                         std::uint32_t index) const;
  /// Columns [first, first + count) of the i.i.d. sequence for `sample`.
  Eigen::MatrixXd sample_block(const NoisePlan& noise, Stream stream, std::uint32_t sample,
                               Eigen::Index count, Eigen::Index first = 0) const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<Eigen::MatrixXd> factors_;  // symmetric square roots of the covariances
};

/// Leader initial positions: either explicit (d x m) or drawn i.i.d. from a law.
/// Drawn positions use sample id 0, so the first m leaders coincide for every
/// population size.
struct LeaderInit {
  std::optional<Eigen::MatrixXd> positions;
  InitialLaw law;

  Eigen::MatrixXd resolve(const NoisePlan& noise, Eigen::Index dim, Eigen::Index count) const;
};

/// Piecewise-constant leader controls on a uniform grid of intervals over
/// [0, T], plus the feedback gain.
class ControlSchedule {
 public:
  ControlSchedule(double horizon, std::vector<Eigen::MatrixXd> values, GainSpec gain);
  static ControlSchedule zeros(Eigen::Index dim, Eigen::Index leaders, Eigen::Index intervals,
                               double horizon, GainSpec gain);
  static ControlSchedule constant(const Eigen::MatrixXd& value, Eigen::Index intervals,
                                  double horizon, GainSpec gain);

  Eigen::Index intervals() const noexcept { return static_cast<Eigen::Index>(values_.size()); }
  Eigen::Index dim() const noexcept { return values_.front().rows(); }
  Eigen::Index leaders() const noexcept { return values_.front().cols(); }
  double horizon() const noexcept { return horizon_; }
  const GainSpec& gain() const noexcept { return gain_; }
  GainSpec& gain() noexcept { return gain_; }

  const Eigen::MatrixXd& interval(Eigen::Index k) const { return values_[k]; }
  Eigen::MatrixXd& interval(Eigen::Index k) { return values_[k]; }
  /// Control matrix (d x m) active on time step `step` of a grid with `steps` steps.
  const Eigen::MatrixXd& at_step(Eigen::Index step, Eigen::Index steps) const;

  /// Throws ParameterError unless every component lies in [-kappa, kappa] and
  /// `steps` is a multiple of the interval count.
  void validate(double kappa, Eigen::Index steps) const;

 private:
  double horizon_;
  std::vector<Eigen::MatrixXd> values_;
  GainSpec gain_;
};

enum class LagrangianKind { w1_to_target, squared_w1_to_target, leader_follower_w1 };
enum class PhiKind { quadratic, quadratic_weighted };

/// Running cost L(mu, nu) and control cost phi(u, xi).
struct CostSpec {
  LagrangianKind lagrangian = LagrangianKind::w1_to_target;
  std::optional<EmpiricalMeasure> target;
  PhiKind phi = PhiKind::quadratic;
  TransportOptions transport;
};

/// Full problem instance.
struct ProblemSpec {
  Eigen::Index dim = 1;
  double horizon = 1.0;
  double dt = 0.01;
  double sigma = 0.0;
  Eigen::Index followers = 100;     // M
  Eigen::Index leaders = 1;         // m
  Eigen::Index law_samples = 1000;  // N
  FieldSpec v;
  FieldSpec w;
  GainSpec gain;
  double kappa = 1.0;
  InitialLaw follower_init;
  LeaderInit leader_init;
  CostSpec cost;
  std::uint64_t seed = 0;
  bool common_noise = false;

  Eigen::Index steps() const;
  std::vector<double> time_grid() const;
  NoisePlan noise() const { return NoisePlan(seed, 0, common_noise); }
  Eigen::MatrixXd leader_positions() const { return leader_init.resolve(noise(), dim, leaders); }

  /// Checks the invariants: T a multiple of dt, sigma >= 0, positive sizes,
  /// consistent dimensions, admissible gain.
  void validate() const;
};

}  // namespace mfoc
