#include "mfoc/measures.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mfoc/io.hpp"
#include "mfoc/transport.hpp"

namespace mfoc {

namespace {

void validate(const Eigen::MatrixXd& atoms, const Eigen::VectorXd& weights) {
  if (atoms.cols() == 0) throw ParameterError("EmpiricalMeasure: no atoms");
  if (atoms.rows() == 0) throw ParameterError("EmpiricalMeasure: zero dimension");
  if (weights.size() != atoms.cols())
    throw ParameterError("EmpiricalMeasure: weight count does not match atom count");
  if (!atoms.allFinite()) throw ParameterError("EmpiricalMeasure: non-finite atom coordinate");
  if (!weights.allFinite() || (weights.array() < 0.0).any())
    throw ParameterError("EmpiricalMeasure: weights must be finite and nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw ParameterError("EmpiricalMeasure: weights must sum to 1");
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  validate(atoms_, weights_);
  uniform_ = (weights_.array() == weights_(0)).all();
}

EmpiricalMeasure::EmpiricalMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights, bool uniform)
    : atoms_(std::move(atoms)), weights_(std::move(weights)), uniform_(uniform) {
  validate(atoms_, weights_);
}

EmpiricalMeasure EmpiricalMeasure::uniform(Eigen::MatrixXd atoms) {
  const Eigen::Index n = atoms.cols();
  if (n == 0) throw ParameterError("EmpiricalMeasure: no atoms");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return EmpiricalMeasure(std::move(atoms), std::move(w), true);
}

EmpiricalMeasure EmpiricalMeasure::dirac(const Eigen::VectorXd& point) {
  return uniform(Eigen::MatrixXd(point));
}

double moment(const EmpiricalMeasure& mu, double p) {
  if (!(p >= 1.0)) throw ParameterError("moment: p must be >= 1");
  const Eigen::VectorXd norms = mu.atoms().colwise().norm().transpose();
  if (p == 1.0) return mu.weights().dot(norms);
  if (p == 2.0) return mu.weights().dot(norms.cwiseAbs2());
  return mu.weights().dot(norms.array().pow(p).matrix());
}

double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                    const TransportOptions& options) {
  if (mu.dim() != nu.dim()) throw ParameterError("wasserstein1: dimension mismatch");

  if (mu.dim() == 1) {
    return transport::wasserstein1_line<double>(mu.atoms().row(0).transpose(), mu.weights(),
                                                nu.atoms().row(0).transpose(), nu.weights());
  }

  if (mu.size() > options.max_support || nu.size() > options.max_support) {
    std::ostringstream msg;
    msg << "wasserstein1: supports " << mu.size() << " / " << nu.size() << " exceed cap "
        << options.max_support << " in d = " << mu.dim() << "; subsample required";
    throw SubsampleRequired(msg.str());
  }

  const Eigen::MatrixXd cost = transport::distance_matrix(mu.atoms(), nu.atoms());
  if (mu.has_uniform_weights() && nu.has_uniform_weights() && mu.size() == nu.size()) {
    const auto match = transport::solve_assignment<double>(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) total += cost(i, match[i]);
    return total / static_cast<double>(mu.size());
  }
  return transport::min_cost_transport<double>(cost, mu.weights(), nu.weights());
}

EmpiricalMeasure stratified_subsample(const EmpiricalMeasure& mu, Eigen::Index cap) {
  if (cap < 1) throw ParameterError("stratified_subsample: cap must be positive");
  if (mu.size() <= cap) return mu;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(mu.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return mu.atoms()(0, a) < mu.atoms()(0, b);
  });

  Eigen::MatrixXd picked(mu.dim(), cap);
  double cumulative = 0.0;
  std::size_t cursor = 0;
  for (Eigen::Index k = 0; k < cap; ++k) {
    const double level = (static_cast<double>(k) + 0.5) / static_cast<double>(cap);
    while (cursor + 1 < order.size() && cumulative + mu.weights()(order[cursor]) < level) {
      cumulative += mu.weights()(order[cursor]);
      ++cursor;
    }
    picked.col(k) = mu.atom(order[cursor]);
  }
  return EmpiricalMeasure::uniform(std::move(picked));
}

double wasserstein1_capped(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                           const TransportOptions& options) {
  if (mu.dim() == 1 || (mu.size() <= options.max_support && nu.size() <= options.max_support)) {
    return wasserstein1(mu, nu, options);
  }
  return wasserstein1(stratified_subsample(mu, options.max_support),
                      stratified_subsample(nu, options.max_support), options);
}

MeasureFlow::MeasureFlow(std::vector<double> times, std::vector<EmpiricalMeasure> measures)
    : times_(std::move(times)), measures_(std::move(measures)) {
  if (times_.empty() || times_.size() != measures_.size())
    throw ParameterError("MeasureFlow: need one measure per grid time");
  if (times_.front() != 0.0) throw ParameterError("MeasureFlow: grid must start at t = 0");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw ParameterError("MeasureFlow: times must increase");
    if (measures_[k].dim() != measures_[0].dim())
      throw ParameterError("MeasureFlow: dimension changes along the flow");
  }
}

MeasureFlow translate(const MeasureFlow& flow, const Eigen::VectorXd& shift) {
  std::vector<EmpiricalMeasure> moved;
  moved.reserve(flow.size());
  for (const auto& mu : flow.measures()) {
    Eigen::MatrixXd atoms = mu.atoms().colwise() + shift;
    moved.emplace_back(std::move(atoms), mu.weights());
  }
  return MeasureFlow(flow.times(), std::move(moved));
}

void write_csv(std::ostream& out, const EmpiricalMeasure& mu) {
  for (Eigen::Index k = 0; k < mu.dim(); ++k) out << "x_" << (k + 1) << ',';
  out << "weight\n";
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    for (Eigen::Index k = 0; k < mu.dim(); ++k) out << format_double(mu.atoms()(k, i)) << ',';
    out << format_double(mu.weights()(i)) << '\n';
  }
}

EmpiricalMeasure read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("read_csv: missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "weight")
    throw ParameterError("read_csv: header must be x_1,...,x_d,weight");
  const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 1;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (header[k] != "x_" + std::to_string(k + 1))
      throw ParameterError("read_csv: unexpected column '" + header[k] + "'");
  }

  std::vector<double> coords;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != d + 1)
      throw ParameterError("read_csv: row has wrong column count");
    for (Eigen::Index k = 0; k < d; ++k) coords.push_back(parse_double(cells[k]));
    weights.push_back(parse_double(cells.back()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(weights.size());
  Eigen::MatrixXd atoms = Eigen::Map<Eigen::MatrixXd>(coords.data(), d, n);
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return EmpiricalMeasure(std::move(atoms), std::move(w));
}

}  // namespace mfoc
