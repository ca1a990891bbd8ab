#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mfoc/errors.hpp"

namespace mfoc {

/// Finite weighted atom cloud in R^d. Atoms are the columns of a d x n matrix.
///
/// Weights are always stored, even for uniform clouds, so that grid
/// quantizations and particle ensembles share one representation.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights);

  /// Uniform weights 1/n over the columns of `atoms`.
  static EmpiricalMeasure uniform(Eigen::MatrixXd atoms);
  static EmpiricalMeasure dirac(const Eigen::VectorXd& point);

  Eigen::Index dim() const noexcept { return atoms_.rows(); }
  Eigen::Index size() const noexcept { return atoms_.cols(); }
  const Eigen::MatrixXd& atoms() const noexcept { return atoms_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  auto atom(Eigen::Index i) const { return atoms_.col(i); }
  bool has_uniform_weights() const noexcept { return uniform_; }

  Eigen::VectorXd mean() const { return atoms_ * weights_; }

 private:
  EmpiricalMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights, bool uniform);

  Eigen::MatrixXd atoms_;
  Eigen::VectorXd weights_;
  bool uniform_ = false;
};

/// m_p(mu) = sum_i w_i |x_i|^p, base point at the origin.
double moment(const EmpiricalMeasure& mu, double p);

struct TransportOptions {
  /// Largest support (per side) handed to an exact solver in d >= 2.
  Eigen::Index max_support = 512;
};

/// Exact Wasserstein-1 distance.
///
/// d = 1 uses the quantile coupling and has no size limit. For d >= 2,
/// equal-size uniform clouds go through optimal assignment, everything else
/// through min-cost transport; supports beyond `max_support` throw
/// SubsampleRequired.
double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    const TransportOptions& options = {});

/// Deterministic stratified reduction to at most `cap` uniform atoms: atoms are
/// ordered by their first coordinate (ties by index) and one representative is
/// taken at each cumulative-weight level (k + 1/2) / cap.
EmpiricalMeasure stratified_subsample(const EmpiricalMeasure& mu, Eigen::Index cap);

/// W1 that subsamples explicitly when an exact solve is out of reach.
/// Identical to wasserstein1 whenever both supports fit under the cap.
double wasserstein1_capped(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const TransportOptions& options = {});

/// f#mu: atoms mapped through `map`, weights unchanged.
template <typename Map>
EmpiricalMeasure push_forward(const EmpiricalMeasure& mu, Map&& map) {
  Eigen::VectorXd first = map(Eigen::VectorXd(mu.atom(0)));
  Eigen::MatrixXd out(first.size(), mu.size());
  out.col(0) = first;
  for (Eigen::Index i = 1; i < mu.size(); ++i) out.col(i) = map(Eigen::VectorXd(mu.atom(i)));
  if (!out.allFinite()) throw NumericError("push_forward: map produced a non-finite coordinate");
  return EmpiricalMeasure(std::move(out), mu.weights());
}

/// Curve t -> mu_t sampled on an increasing grid starting at 0.
class MeasureFlow {
 public:
  MeasureFlow(std::vector<double> times, std::vector<EmpiricalMeasure> measures);

  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<EmpiricalMeasure>& measures() const noexcept { return measures_; }
  const EmpiricalMeasure& operator[](std::size_t k) const { return measures_[k]; }
  double horizon() const { return times_.back(); }

 private:
  std::vector<double> times_;
  std::vector<EmpiricalMeasure> measures_;
};

/// Translate every measure of a flow by `shift`.
MeasureFlow translate(const MeasureFlow& flow, const Eigen::VectorXd& shift);

/// CSV with header `x_1,...,x_d,weight` and one row per atom.
void write_csv(std::ostream& out, const EmpiricalMeasure& mu);
EmpiricalMeasure read_csv(std::istream& in);

}  // namespace mfoc
