#include "mfoc/problem.hpp"

#include <algorithm>
#include <cmath>

namespace mfoc {

InitialLaw::InitialLaw(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ParameterError("initial law: no components");
  const Eigen::Index d = components_.front().mean.size();
  if (d == 0) throw ParameterError("initial law: empty mean");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d)
      throw ParameterError("initial law: inconsistent component dimensions");
    if (!(c.weight > 0.0)) throw ParameterError("initial law: component weights must be positive");
    if (!c.mean.allFinite() || !c.cov.allFinite())
      throw ParameterError("initial law: non-finite parameters");
    if (!c.cov.isApprox(c.cov.transpose())) throw ParameterError("initial law: covariance not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    if (llt.info() != Eigen::Success)
      throw ParameterError("initial law: covariance must be positive definite (density required)");
    factors_.push_back(llt.matrixL());
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

InitialLaw InitialLaw::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  return InitialLaw({GaussianComponent{1.0, std::move(mean), std::move(cov)}});
}

Eigen::Index InitialLaw::dim() const {
  if (components_.empty()) throw ParameterError("initial law: not set");
  return components_.front().mean.size();
}

Eigen::VectorXd InitialLaw::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

Eigen::VectorXd InitialLaw::sample(const NoisePlan& noise, Stream stream, std::uint32_t sample,
                                   std::uint32_t index) const {
  std::size_t pick = 0;
  if (components_.size() > 1) {
    const double u = noise.uniform(stream, sample, index, 0);
    double cumulative = 0.0;
    for (pick = 0; pick + 1 < components_.size(); ++pick) {
      cumulative += components_[pick].weight;
      if (u < cumulative) break;
    }
  }
  Eigen::VectorXd z(dim());
  noise.gaussian(stream, sample, index, 0, z);
  return components_[pick].mean + factors_[pick] * z;
}

Eigen::MatrixXd InitialLaw::sample_block(const NoisePlan& noise, Stream stream,
                                         std::uint32_t sample, Eigen::Index count,
                                         Eigen::Index first) const {
  Eigen::MatrixXd out(dim(), count);
  for (Eigen::Index i = 0; i < count; ++i) {
    out.col(i) = this->sample(noise, stream, sample, static_cast<std::uint32_t>(first + i));
  }
  return out;
}

Eigen::MatrixXd LeaderInit::resolve(const NoisePlan& noise, Eigen::Index dim,
                                    Eigen::Index count) const {
  if (count == 0) return Eigen::MatrixXd(dim, 0);
  if (positions) {
    if (positions->rows() != dim || positions->cols() != count)
      throw ParameterError("leader positions must be a d x m matrix");
    return *positions;
  }
  if (law.dim() != dim) throw ParameterError("leader law dimension mismatch");
  return law.sample_block(noise, Stream::leader_init, 0, count);
}

ControlSchedule::ControlSchedule(double horizon, std::vector<Eigen::MatrixXd> values,
                                 GainSpec gain)
    : horizon_(horizon), values_(std::move(values)), gain_(gain) {
  if (values_.empty()) throw ParameterError("control schedule: need at least one interval");
  if (!(horizon_ > 0.0)) throw ParameterError("control schedule: horizon must be positive");
  for (const auto& v : values_) {
    if (v.rows() != values_.front().rows() || v.cols() != values_.front().cols())
      throw ParameterError("control schedule: interval shapes differ");
    if (!v.allFinite()) throw ParameterError("control schedule: non-finite control");
  }
}

ControlSchedule ControlSchedule::zeros(Eigen::Index dim, Eigen::Index leaders,
                                       Eigen::Index intervals, double horizon, GainSpec gain) {
  return ControlSchedule(
      horizon, std::vector<Eigen::MatrixXd>(intervals, Eigen::MatrixXd::Zero(dim, leaders)), gain);
}

ControlSchedule ControlSchedule::constant(const Eigen::MatrixXd& value, Eigen::Index intervals,
                                          double horizon, GainSpec gain) {
  return ControlSchedule(horizon, std::vector<Eigen::MatrixXd>(intervals, value), gain);
}

const Eigen::MatrixXd& ControlSchedule::at_step(Eigen::Index step, Eigen::Index steps) const {
  const Eigen::Index per = std::max<Eigen::Index>(1, steps / intervals());
  return values_[std::min(step / per, intervals() - 1)];
}

void ControlSchedule::validate(double kappa, Eigen::Index steps) const {
  if (steps % intervals() != 0)
    throw ParameterError("control schedule: interval count must divide the step count");
  for (const auto& v : values_) {
    if (v.size() != 0 && v.cwiseAbs().maxCoeff() > kappa)
      throw ParameterError("control schedule: control outside K = [-kappa, kappa]^d");
  }
  validate_gain(gain_);
}

Eigen::Index ProblemSpec::steps() const {
  return static_cast<Eigen::Index>(std::llround(horizon / dt));
}

std::vector<double> ProblemSpec::time_grid() const {
  const Eigen::Index n = steps();
  std::vector<double> t(static_cast<std::size_t>(n + 1));
  for (Eigen::Index k = 0; k <= n; ++k) t[k] = static_cast<double>(k) * dt;
  t.back() = horizon;
  return t;
}

void ProblemSpec::validate() const {
  if (dim < 1) throw ParameterError("problem: dimension must be >= 1");
  if (!(horizon > 0.0) || !(dt > 0.0)) throw ParameterError("problem: T and dt must be positive");
  const double ratio = horizon / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-12 * std::max(1.0, ratio) || steps() < 1)
    throw ParameterError("problem: dt must divide T");
  if (!(sigma >= 0.0)) throw ParameterError("problem: sigma must be >= 0");
  if (followers < 1 || law_samples < 1) throw ParameterError("problem: population sizes must be >= 1");
  if (leaders < 0) throw ParameterError("problem: leader count must be >= 0");
  if (!(kappa > 0.0)) throw ParameterError("problem: kappa must be positive");
  if (follower_init.dim() != dim) throw ParameterError("problem: follower law dimension mismatch");
  validate_field(v, dim);
  validate_field(w, dim);
  validate_gain(gain);
  if (cost.target && cost.target->dim() != dim)
    throw ParameterError("problem: cost target dimension mismatch");
}

}  // namespace mfoc
