#include "mfoc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <toml.hpp>

namespace mfoc {

namespace {

/// View of one TOML table that records which keys were read, so that any
/// remaining key can be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }
  bool has(std::string_view key) const { return table_ && table_->contains(key); }

  const toml::node* node(std::string_view key) {
    known_.emplace(key);
    return table_ ? table_->get(key) : nullptr;
  }

  double number(std::string_view key, double fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
    fail(key, "expected a number");
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (!n->is_integer()) fail(key, "expected an integer");
    return n->as_integer()->get();
  }

  std::int64_t positive(std::string_view key, std::int64_t fallback) {
    const std::int64_t v = integer(key, fallback);
    if (v < 1) fail(key, "must be >= 1");
    return v;
  }

  bool boolean(std::string_view key, bool fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (!n->is_boolean()) fail(key, "expected true or false");
    return n->as_boolean()->get();
  }

  std::string text(std::string_view key, std::string fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    if (!n->is_string()) fail(key, "expected a string");
    return n->as_string()->get();
  }

  std::vector<double> numbers(std::string_view key, std::vector<double> fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    return number_list(*n, key);
  }

  std::vector<Eigen::Index> sizes(std::string_view key, std::vector<Eigen::Index> fallback) {
    const toml::node* n = node(key);
    if (!n) return fallback;
    const toml::array* arr = n->as_array();
    if (!arr || arr->empty()) fail(key, "expected a non-empty array of integers");
    std::vector<Eigen::Index> out;
    for (const auto& item : *arr) {
      if (!item.is_integer() || item.as_integer()->get() < 1) fail(key, "entries must be integers >= 1");
      out.push_back(static_cast<Eigen::Index>(item.as_integer()->get()));
    }
    return out;
  }

  std::optional<Eigen::VectorXd> vector(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const auto v = number_list(*n, key);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  /// Array of rows, each an array of numbers.
  std::optional<Eigen::MatrixXd> matrix(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::array* rows = n->as_array();
    if (!rows || rows->empty()) fail(key, "expected an array of rows");
    std::vector<std::vector<double>> values;
    for (const auto& row : *rows) values.push_back(number_list(row, key));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values[0].size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != values[0].size()) fail(key, "rows have different lengths");
      for (std::size_t j = 0; j < values[i].size(); ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
    }
    return out;
  }

  Section sub(std::string_view key) {
    const toml::node* n = node(key);
    if (n && !n->is_table()) fail(key, "expected a table");
    return Section(n ? n->as_table() : nullptr, join(key));
  }

  std::vector<Section> subs(std::string_view key) {
    const toml::node* n = node(key);
    std::vector<Section> out;
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr) fail(key, "expected an array of tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::node& item = (*arr)[i];
      if (!item.is_table()) fail(key, "expected an array of tables");
      out.emplace_back(item.as_table(), join(key) + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  /// Throws on any key that was never read.
  void finish() const {
    if (!table_) return;
    for (const auto& [key, value] : *table_) {
      if (!known_.contains(std::string(key.str()))) throw ConfigError("unknown key '" + join(key.str()) + "'");
    }
  }

  [[noreturn]] void fail(std::string_view key, std::string_view what) const {
    throw ConfigError("config key '" + join(key) + "': " + std::string(what));
  }

 private:
  std::string join(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  std::vector<double> number_list(const toml::node& n, std::string_view key) const {
    const toml::array* arr = n.as_array();
    if (!arr || arr->empty()) fail(key, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& item : *arr) {
      auto v = item.value<double>();
      if (!v || !(item.is_floating_point() || item.is_integer())) fail(key, "expected numbers");
      out.push_back(*v);
    }
    return out;
  }

  const toml::table* table_;
  std::string path_;
  std::set<std::string, std::less<>> known_;
};

Eigen::MatrixXd points_as_columns(Section& s, std::string_view key, Eigen::Index dim) {
  auto rows = s.matrix(key);
  if (!rows) s.fail(key, "required");
  if (rows->cols() != dim) s.fail(key, "each point needs `dimension` coordinates");
  return rows->transpose();
}

std::optional<InitialLaw> read_law(Section& s, Eigen::Index dim) {
  auto mixture = s.subs("mixture");
  const bool single = s.has("mean") || s.has("cov");
  if (!mixture.empty() && single) s.fail("mixture", "give either mean/cov or a mixture, not both");
  std::vector<GaussianComponent> components;
  auto component = [&](Section& c, double weight) {
    auto mean = c.vector("mean");
    auto cov = c.matrix("cov");
    if (!mean || !cov) c.fail("mean", "mean and cov are both required");
    if (mean->size() != dim || cov->rows() != dim || cov->cols() != dim)
      c.fail("cov", "mean and cov must match `dimension`");
    return GaussianComponent{weight, *mean, *cov};
  };
  if (single) components.push_back(component(s, 1.0));
  for (auto& c : mixture) {
    components.push_back(component(c, c.number("weight", 1.0)));
    c.finish();
  }
  if (components.empty()) return std::nullopt;
  try {
    return InitialLaw(std::move(components));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("initial law: ") + e.what());
  }
}

Kernel read_kernel(Section& s, Eigen::Index dim) {
  const std::string kind = s.text("kind", "");
  if (kind == "linear") {
    auto a = s.matrix("matrix");
    if (!a || a->rows() != dim || a->cols() != dim) s.fail("matrix", "linear kernels need a d x d matrix");
    return LinearKernel{*a};
  }
  if (kind == "gaussian" || kind == "cauchy") {
    return RadialKernel{kind == "gaussian" ? RadialProfile::gaussian : RadialProfile::cauchy,
                        s.number("strength", 0.0), s.number("length", 1.0)};
  }
  if (kind == "constant") {
    auto c = s.vector("value");
    if (!c || c->size() != dim) s.fail("value", "constant kernels need a d-vector");
    return ConstantKernel{*c};
  }
  s.fail("kind", "expected linear, gaussian, cauchy or constant");
}

FieldSpec read_field(Section s, Eigen::Index dim) {
  FieldSpec field;
  for (auto& k : s.subs("follower_kernels")) {
    field.follower_kernels.push_back(read_kernel(k, dim));
    k.finish();
  }
  for (auto& k : s.subs("leader_kernels")) {
    field.leader_kernels.push_back(read_kernel(k, dim));
    k.finish();
  }
  Section ext = s.sub("external");
  if (auto v = ext.vector("offset")) field.external.offset = *v;
  if (auto a = ext.matrix("linear")) field.external.linear = *a;
  if (auto v = ext.vector("amplitude")) field.external.amplitude = *v;
  field.external.frequency = ext.number("frequency", 0.0);
  ext.finish();
  s.finish();
  try {
    validate_field(field, dim);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
  return field;
}

template <class Enum>
Enum pick(Section& s, std::string_view key, std::string fallback,
          std::initializer_list<std::pair<std::string_view, Enum>> choices) {
  const std::string value = s.text(key, std::move(fallback));
  for (const auto& [name, e] : choices)
    if (name == value) return e;
  s.fail(key, "unrecognized value '" + value + "'");
}

void read_problem(Section s, RunConfig& cfg) {
  ProblemSpec& p = cfg.problem;
  p.dim = s.positive("dimension", 1);
  p.horizon = s.number("horizon", p.horizon);
  p.dt = s.number("dt", p.dt);
  p.sigma = s.number("sigma", p.sigma);
  p.followers = s.positive("followers", p.followers);
  p.leaders = s.integer("leaders", p.leaders);
  if (p.leaders < 0) s.fail("leaders", "must be >= 0");
  p.law_samples = s.positive("law_samples", p.law_samples);
  p.kappa = s.number("kappa", p.kappa);
  const std::int64_t seed = s.integer("seed", 0);
  if (seed < 0) s.fail("seed", "must be >= 0");
  p.seed = static_cast<std::uint64_t>(seed);
  p.common_noise = s.boolean("common_noise", false);

  Section fi = s.sub("follower_init");
  auto law = read_law(fi, p.dim);
  if (!law) throw ConfigError("config table 'problem.follower_init' with mean/cov or mixture is required");
  p.follower_init = *law;
  fi.finish();

  Section li = s.sub("leader_init");
  if (li.has("positions")) {
    p.leader_init.positions = points_as_columns(li, "positions", p.dim);
    if (li.has("mean") || li.has("mixture")) li.fail("positions", "give either positions or a law");
  } else if (auto leader_law = read_law(li, p.dim)) {
    p.leader_init.law = *leader_law;
  } else if (p.leaders > 0) {
    throw ConfigError("config table 'problem.leader_init' needs positions or a law");
  }
  li.finish();

  Section g = s.sub("gain");
  p.gain.theta0 = g.number("theta0", p.gain.theta0);
  p.gain.theta1 = g.number("theta1", p.gain.theta1);
  p.gain.delta = g.number("delta", p.gain.delta);
  p.gain.lambda = g.number("lambda", p.gain.lambda);
  g.finish();

  p.v = read_field(s.sub("v"), p.dim);
  p.w = read_field(s.sub("w"), p.dim);

  Section c = s.sub("cost");
  p.cost.lagrangian = pick<LagrangianKind>(c, "lagrangian", "w1_to_target",
                                           {{"w1_to_target", LagrangianKind::w1_to_target},
                                            {"squared_w1_to_target", LagrangianKind::squared_w1_to_target},
                                            {"leader_follower_w1", LagrangianKind::leader_follower_w1}});
  p.cost.phi = pick<PhiKind>(c, "phi", "quadratic",
                             {{"quadratic", PhiKind::quadratic}, {"quadratic_weighted", PhiKind::quadratic_weighted}});
  if (c.has("target_points")) {
    Eigen::MatrixXd atoms = points_as_columns(c, "target_points", p.dim);
    auto weights = c.vector("target_weights");
    try {
      p.cost.target = weights ? EmpiricalMeasure(std::move(atoms), *weights) : EmpiricalMeasure::uniform(std::move(atoms));
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("cost target: ") + e.what());
    }
  } else if (p.cost.lagrangian != LagrangianKind::leader_follower_w1) {
    c.fail("target_points", "required by this lagrangian");
  }
  p.cost.transport.max_support = c.positive("max_support", p.cost.transport.max_support);
  c.finish();
  s.finish();

  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

void read_optimize(Section s, RunConfig& cfg) {
  OptProblem& o = cfg.optimize;
  o.objective = pick<Objective>(s, "objective", "mckean",
                                {{"mckean", Objective::mckean}, {"finite_particle", Objective::finite_particle}});
  o.method = pick<SearchMethod>(s, "method", "spsa",
                                {{"spsa", SearchMethod::spsa}, {"coordinate", SearchMethod::coordinate}});
  o.intervals = s.positive("intervals", o.intervals);
  o.samples = s.positive("samples", o.samples);
  o.starts = static_cast<int>(s.positive("starts", o.starts));
  o.max_evaluations = static_cast<int>(s.positive("max_evaluations", o.max_evaluations));
  o.perturbation = s.number("perturbation", o.perturbation);
  o.optimize_gain = s.boolean("optimize_gain", o.optimize_gain);
  s.finish();
}

void read_studies(Section s, RunConfig& cfg) {
  Section chaos = s.sub("chaos");
  cfg.chaos.followers = chaos.sizes("followers", cfg.chaos.followers);
  cfg.chaos.replicates = static_cast<int>(chaos.positive("replicates", cfg.chaos.replicates));
  cfg.chaos.realizations = static_cast<int>(chaos.positive("realizations", cfg.chaos.realizations));
  cfg.chaos.reference_samples = chaos.positive("reference_samples", cfg.chaos.reference_samples);
  cfg.chaos.max_slope = chaos.number("max_slope", cfg.chaos.max_slope);
  chaos.finish();

  Section gamma = s.sub("gamma");
  cfg.gamma.leaders = gamma.sizes("leaders", cfg.gamma.leaders);
  gamma.finish();

  Section stab = s.sub("stability");
  cfg.stability.scales = stab.numbers("scales", cfg.stability.scales);
  cfg.stability.max_ratio_spread = stab.number("max_ratio_spread", cfg.stability.max_ratio_spread);
  stab.finish();

  Section fp = s.sub("fpcheck");
  if (fp.has("levels")) {
    cfg.fpcheck.levels.clear();
    for (auto& level : fp.subs("levels")) {
      cfg.fpcheck.levels.push_back(FpLevel{level.positive("samples", 1000), level.positive("cells", 100)});
      level.finish();
    }
  }
  cfg.fpcheck.x_min = fp.number("x_min", cfg.fpcheck.x_min);
  cfg.fpcheck.x_max = fp.number("x_max", cfg.fpcheck.x_max);
  if (fp.has("reference_mean")) cfg.fpcheck.reference_mean = fp.number("reference_mean", 0.0);
  if (fp.has("reference_variance")) cfg.fpcheck.reference_variance = fp.number("reference_variance", 1.0);
  cfg.fpcheck.max_w1 = fp.number("max_w1", cfg.fpcheck.max_w1);
  fp.finish();
  s.finish();
}

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

nlohmann::json law_json(const InitialLaw& law) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : law.components())
    out.push_back({{"weight", c.weight}, {"mean", vector_json(c.mean)}, {"cov", matrix_json(c.cov)}});
  return out;
}

nlohmann::json field_json(const FieldSpec& f) {
  auto kernels = [](const std::vector<Kernel>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& k : list) {
      if (const auto* lin = std::get_if<LinearKernel>(&k)) {
        out.push_back({{"kind", "linear"}, {"matrix", matrix_json(lin->matrix)}});
      } else if (const auto* rad = std::get_if<RadialKernel>(&k)) {
        out.push_back({{"kind", rad->profile == RadialProfile::gaussian ? "gaussian" : "cauchy"},
                       {"strength", rad->strength},
                       {"length", rad->length}});
      } else {
        out.push_back({{"kind", "constant"}, {"value", vector_json(std::get<ConstantKernel>(k).value)}});
      }
    }
    return out;
  };
  return {{"follower_kernels", kernels(f.follower_kernels)},
          {"leader_kernels", kernels(f.leader_kernels)},
          {"external",
           {{"offset", vector_json(f.external.offset)},
            {"linear", matrix_json(f.external.linear)},
            {"amplitude", vector_json(f.external.amplitude)},
            {"frequency", f.external.frequency}}}};
}

}  // namespace

OptProblem RunConfig::opt_problem() const {
  OptProblem o = optimize;
  o.problem = problem;
  o.mckean = mckean;
  return o;
}

void RunConfig::set_seed(std::uint64_t seed) { problem.seed = seed; }

void RunConfig::set_threads(unsigned threads) {
  threads = std::max(1u, threads);
  mckean.threads = threads;
  optimize.threads = threads;
  chaos.threads = threads;
  stability.threads = threads;
  fpcheck.threads = threads;
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e;
    throw ConfigError(msg.str());
  }
  Section top(&root, "");
  const std::int64_t version = top.integer("schema_version", -1);
  if (version == -1) throw ConfigError("config: `schema_version` is required");
  if (version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");

  RunConfig cfg;
  Section problem = top.sub("problem");
  if (!problem.present()) throw ConfigError("config: table [problem] is required");
  read_problem(problem, cfg);

  Section mk = top.sub("mckean");
  cfg.mckean.tol = mk.number("tol", cfg.mckean.tol);
  cfg.mckean.max_iter = static_cast<int>(mk.positive("max_iter", cfg.mckean.max_iter));
  mk.finish();
  cfg.mckean.samples = cfg.problem.law_samples;
  cfg.chaos.mckean = cfg.stability.mckean = cfg.fpcheck.mckean = cfg.mckean;

  Section sim = top.sub("simulate");
  cfg.simulate.realizations = sim.positive("realizations", cfg.simulate.realizations);
  cfg.simulate.stride = static_cast<std::size_t>(sim.positive("stride", 1));
  sim.finish();

  read_optimize(top.sub("optimize"), cfg);
  read_studies(top.sub("study"), cfg);
  top.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

nlohmann::json config_echo(const RunConfig& cfg) {
  const ProblemSpec& p = cfg.problem;
  nlohmann::json leader_init;
  if (p.leader_init.positions) leader_init["positions"] = matrix_json(p.leader_init.positions->transpose());
  else if (!p.leader_init.law.components().empty()) leader_init["law"] = law_json(p.leader_init.law);

  nlohmann::json cost = {
      {"lagrangian", p.cost.lagrangian == LagrangianKind::w1_to_target           ? "w1_to_target"
                     : p.cost.lagrangian == LagrangianKind::squared_w1_to_target ? "squared_w1_to_target"
                                                                                 : "leader_follower_w1"},
      {"phi", p.cost.phi == PhiKind::quadratic ? "quadratic" : "quadratic_weighted"},
      {"max_support", p.cost.transport.max_support}};
  if (p.cost.target) {
    cost["target_points"] = matrix_json(p.cost.target->atoms().transpose());
    cost["target_weights"] = vector_json(p.cost.target->weights());
  }

  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : cfg.fpcheck.levels) levels.push_back({{"samples", l.samples}, {"cells", l.cells}});
  nlohmann::json fpcheck = {{"levels", levels}, {"x_min", cfg.fpcheck.x_min}, {"x_max", cfg.fpcheck.x_max},
                            {"max_w1", cfg.fpcheck.max_w1}};
  if (cfg.fpcheck.reference_mean) fpcheck["reference_mean"] = *cfg.fpcheck.reference_mean;
  if (cfg.fpcheck.reference_variance) fpcheck["reference_variance"] = *cfg.fpcheck.reference_variance;

  const OptProblem& o = cfg.optimize;
  return {
      {"schema_version", kSchemaVersion},
      {"problem",
       {{"dimension", p.dim},
        {"horizon", p.horizon},
        {"dt", p.dt},
        {"sigma", p.sigma},
        {"followers", p.followers},
        {"leaders", p.leaders},
        {"law_samples", p.law_samples},
        {"kappa", p.kappa},
        {"seed", p.seed},
        {"common_noise", p.common_noise},
        {"follower_init", law_json(p.follower_init)},
        {"leader_init", leader_init},
        {"gain", {{"theta0", p.gain.theta0}, {"theta1", p.gain.theta1}, {"delta", p.gain.delta}, {"lambda", p.gain.lambda}}},
        {"v", field_json(p.v)},
        {"w", field_json(p.w)},
        {"cost", cost}}},
      {"mckean", {{"tol", cfg.mckean.tol}, {"max_iter", cfg.mckean.max_iter}}},
      {"simulate", {{"realizations", cfg.simulate.realizations}, {"stride", cfg.simulate.stride}}},
      {"optimize",
       {{"objective", o.objective == Objective::mckean ? "mckean" : "finite_particle"},
        {"method", o.method == SearchMethod::spsa ? "spsa" : "coordinate"},
        {"intervals", o.intervals},
        {"samples", o.samples},
        {"starts", o.starts},
        {"max_evaluations", o.max_evaluations},
        {"perturbation", o.perturbation},
        {"optimize_gain", o.optimize_gain}}},
      {"study",
       {{"chaos",
         {{"followers", cfg.chaos.followers},
          {"replicates", cfg.chaos.replicates},
          {"realizations", cfg.chaos.realizations},
          {"reference_samples", cfg.chaos.reference_samples},
          {"max_slope", cfg.chaos.max_slope}}},
        {"gamma", {{"leaders", cfg.gamma.leaders}}},
        {"stability", {{"scales", cfg.stability.scales}, {"max_ratio_spread", cfg.stability.max_ratio_spread}}},
        {"fpcheck", fpcheck}}}};
}

}  // namespace mfoc
