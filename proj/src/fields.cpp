#include "mfoc/fields.hpp"

#include <algorithm>
#include <cmath>

namespace mfoc {

namespace {

double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

double radial_factor(const RadialKernel& k, double r) {
  const double s = r / k.length;
  switch (k.profile) {
    case RadialProfile::gaussian:
      return k.strength * std::exp(-0.5 * s * s);
    case RadialProfile::cauchy:
      return k.strength / (1.0 + s * s);
  }
  return 0.0;
}

// sup_z |kappa(|z|) z|
double radial_bound(const RadialKernel& k) {
  switch (k.profile) {
    case RadialProfile::gaussian:
      return std::abs(k.strength) * k.length * std::exp(-0.5);
    case RadialProfile::cauchy:
      return 0.5 * std::abs(k.strength) * k.length;
  }
  return 0.0;
}

struct KernelConstants {
  double lipschitz = 0.0;  // in x and in the convolved measure alike
  double linear_growth = 0.0;
  double bounded = 0.0;
};

KernelConstants kernel_constants(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> KernelConstants {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          const double n = spectral_norm(k.matrix);
          return {n, n, 0.0};
        } else if constexpr (std::is_same_v<K, RadialKernel>) {
          return {std::abs(k.strength), 0.0, radial_bound(k)};
        } else {
          return {0.0, 0.0, k.value.norm()};
        }
      },
      kernel);
}

void check_kernel(const Kernel& kernel, Eigen::Index dim) {
  std::visit(
      [dim](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          if (k.matrix.rows() != dim || k.matrix.cols() != dim)
            throw ParameterError("linear kernel: matrix must be d x d");
          if (!k.matrix.allFinite()) throw ParameterError("linear kernel: non-finite matrix");
        } else if constexpr (std::is_same_v<K, RadialKernel>) {
          if (!(k.length > 0.0) || !std::isfinite(k.length))
            throw ParameterError("radial kernel: length must be positive");
          if (!std::isfinite(k.strength)) throw ParameterError("radial kernel: non-finite strength");
        } else {
          if (k.value.size() != dim) throw ParameterError("constant kernel: value must have d entries");
          if (!k.value.allFinite()) throw ParameterError("constant kernel: non-finite value");
        }
      },
      kernel);
}

}  // namespace

double FieldConstants::growth() const { return std::max({bounded, x, mu, nu}); }

FieldConstants field_constants(const FieldSpec& spec) {
  FieldConstants c;
  for (const auto& k : spec.follower_kernels) {
    const auto kc = kernel_constants(k);
    c.x += kc.lipschitz;
    c.mu += kc.lipschitz;
    c.bounded += kc.bounded;
  }
  for (const auto& k : spec.leader_kernels) {
    const auto kc = kernel_constants(k);
    c.x += kc.lipschitz;
    c.nu += kc.lipschitz;
    c.bounded += kc.bounded;
  }
  // A linear kernel grows like |A| (|x| + m_1), which the Lipschitz parts already cover.
  const auto& ext = spec.external;
  c.x += spectral_norm(ext.linear);
  c.bounded += ext.offset.norm() + ext.amplitude.norm();
  return c;
}

double lipschitz_constant(const FieldSpec& spec) { return field_constants(spec).lipschitz(); }

double growth_constant(const FieldSpec& spec) { return field_constants(spec).growth(); }

void validate_field(const FieldSpec& spec, Eigen::Index dim) {
  for (const auto& k : spec.follower_kernels) check_kernel(k, dim);
  for (const auto& k : spec.leader_kernels) check_kernel(k, dim);
  const auto& ext = spec.external;
  if (ext.offset.size() != 0 && ext.offset.size() != dim)
    throw ParameterError("external field: offset must have d entries");
  if (ext.amplitude.size() != 0 && ext.amplitude.size() != dim)
    throw ParameterError("external field: amplitude must have d entries");
  if (ext.linear.size() != 0 && (ext.linear.rows() != dim || ext.linear.cols() != dim))
    throw ParameterError("external field: linear part must be d x d");
  if (!std::isfinite(ext.frequency)) throw ParameterError("external field: non-finite frequency");
}

FieldEvaluator::FieldEvaluator(const FieldSpec& spec, double t, const EmpiricalMeasure& mu,
                               const EmpiricalMeasure* nu)
    : spec_(spec), t_(t), mu_(mu), nu_(nu), mu_mean_(mu.mean()) {
  if (nu_ != nullptr) {
    if (nu_->dim() != mu.dim()) throw ParameterError("field: follower/leader dimension mismatch");
    nu_mean_ = nu_->mean();
  }
}

void FieldEvaluator::add_kernel(const Kernel& kernel, const EmpiricalMeasure& measure,
                                const Eigen::VectorXd& measure_mean,
                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                Eigen::VectorXd& out) const {
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          out.noalias() += k.matrix * (x - measure_mean);
        } else if constexpr (std::is_same_v<K, RadialKernel>) {
          const auto& atoms = measure.atoms();
          const auto& w = measure.weights();
          for (Eigen::Index i = 0; i < measure.size(); ++i) {
            const Eigen::VectorXd z = x - atoms.col(i);
            out += (w(i) * radial_factor(k, z.norm())) * z;
          }
        } else {
          out += k.value;
        }
      },
      kernel);
}

Eigen::VectorXd FieldEvaluator::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mu_.dim()) throw ParameterError("field: point dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (const auto& k : spec_.follower_kernels) add_kernel(k, mu_, mu_mean_, x, out);
  if (nu_ != nullptr) {
    for (const auto& k : spec_.leader_kernels) add_kernel(k, *nu_, nu_mean_, x, out);
  }
  const auto& ext = spec_.external;
  if (ext.offset.size() != 0) out += ext.offset;
  if (ext.linear.size() != 0) out.noalias() += ext.linear * x;
  if (ext.amplitude.size() != 0) out += std::sin(ext.frequency * t_) * ext.amplitude;
  return out;
}

Eigen::VectorXd eval_field(const FieldSpec& spec, double t, const Eigen::VectorXd& x,
                           const EmpiricalMeasure& mu, const EmpiricalMeasure* nu) {
  Eigen::VectorXd v = FieldEvaluator(spec, t, mu, nu)(x);
  if (!v.allFinite()) throw NumericError("eval_field: non-finite velocity");
  return v;
}

void validate_gain(const GainSpec& gain) {
  if (!(gain.delta > 0.0)) throw ParameterError("gain: bound delta must be positive");
  if (!(gain.lambda >= 0.0)) throw ParameterError("gain: Lipschitz bound lambda must be >= 0");
  if (!std::isfinite(gain.theta0) || !std::isfinite(gain.theta1))
    throw ParameterError("gain: non-finite parameters");
  if (std::abs(gain.theta1) > gain.lambda)
    throw ParameterError("gain: |theta1| exceeds the Lipschitz bound lambda");
}

double eval_gain(const GainSpec& gain, const EmpiricalMeasure& mu) {
  const double raw = gain.theta0 + gain.theta1 * std::tanh(moment(mu, 1.0));
  return std::clamp(raw, -gain.delta, gain.delta);
}

}  // namespace mfoc
