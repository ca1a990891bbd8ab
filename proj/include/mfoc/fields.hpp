#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mfoc/measures.hpp"

namespace mfoc {

/// K(x, y) = A (x - y). Convolution against a measure only needs its mean.
struct LinearKernel {
  Eigen::MatrixXd matrix;
};

enum class RadialProfile { gaussian, cauchy };

/// K(x, y) = kappa(|x - y|) (x - y) with
///   gaussian: kappa(r) = strength * exp(-r^2 / (2 length^2))
///   cauchy:   kappa(r) = strength / (1 + r^2 / length^2)
/// Both maps z -> kappa(|z|) z are |strength|-Lipschitz and bounded.
struct RadialKernel {
  RadialProfile profile = RadialProfile::gaussian;
  double strength = 0.0;
  double length = 1.0;
};

/// K(x, y) = c.
struct ConstantKernel {
  Eigen::VectorXd value;
};

using Kernel = std::variant<LinearKernel, RadialKernel, ConstantKernel>;

/// f_ext(t, x) = offset + linear x + amplitude sin(frequency t). Empty members are zero.
struct ExternalField {
  Eigen::VectorXd offset;
  Eigen::MatrixXd linear;
  Eigen::VectorXd amplitude;
  double frequency = 0.0;
};

/// Velocity field (K * mu)(x) + (H * nu)(x) + f_ext(t, x), where mu is the
/// follower law and nu the leader law. Kernels are summed within each list.
struct FieldSpec {
  std::vector<Kernel> follower_kernels;
  std::vector<Kernel> leader_kernels;
  ExternalField external;
};

/// Partial constants of a field:
///   |v(x1,mu1,nu1) - v(x2,mu2,nu2)| <= x |dx| + mu W1(mu) + nu W1(nu)
///   |v(x,mu,nu)| <= bounded + x |x| + mu m_1(mu) + nu m_1(nu)
struct FieldConstants {
  double x = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  double bounded = 0.0;

  /// Joint constant L_v: sum of the three partial Lipschitz constants.
  double lipschitz() const { return x + mu + nu; }
  /// M_v with |v| <= M_v (1 + |x| + m_1(mu) + m_1(nu)).
  double growth() const;
};

FieldConstants field_constants(const FieldSpec& spec);
double lipschitz_constant(const FieldSpec& spec);
double growth_constant(const FieldSpec& spec);

/// Checks that every descriptor has dimension `dim` and valid parameters.
void validate_field(const FieldSpec& spec, Eigen::Index dim);

/// Field bound to fixed (t, mu, nu) so that repeated evaluation at many points
/// reuses the measure means. `nu` may be absent (no leaders); leader kernels
/// then contribute nothing.
class FieldEvaluator {
 public:
  FieldEvaluator(const FieldSpec& spec, double t, const EmpiricalMeasure& mu,
                 const EmpiricalMeasure* nu);

  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  void add_kernel(const Kernel& kernel, const EmpiricalMeasure& measure,
                  const Eigen::VectorXd& measure_mean, const Eigen::Ref<const Eigen::VectorXd>& x,
                  Eigen::VectorXd& out) const;

  const FieldSpec& spec_;
  double t_;
  const EmpiricalMeasure& mu_;
  const EmpiricalMeasure* nu_;
  Eigen::VectorXd mu_mean_;
  Eigen::VectorXd nu_mean_;
};

/// One-shot evaluation; throws NumericError on a non-finite result.
Eigen::VectorXd eval_field(const FieldSpec& spec, double t, const Eigen::VectorXd& x,
                           const EmpiricalMeasure& mu, const EmpiricalMeasure* nu);

/// Feedback gain g(mu) = clip(theta0 + theta1 tanh(m_1(mu)), -delta, delta).
/// m_1 is 1-Lipschitz under W1 and tanh is 1-Lipschitz, so |theta1| is an
/// exact Lipschitz bound; `lambda` is the admissible bound on it.
struct GainSpec {
  double theta0 = 1.0;
  double theta1 = 0.0;
  double delta = 1.0;
  double lambda = 1.0;
};

void validate_gain(const GainSpec& gain);
double eval_gain(const GainSpec& gain, const EmpiricalMeasure& mu);

}  // namespace mfoc
