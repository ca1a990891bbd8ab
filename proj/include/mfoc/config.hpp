#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string_view>

#include "mfoc/control_opt.hpp"
#include "mfoc/mckean.hpp"
#include "mfoc/problem.hpp"
#include "mfoc/studies.hpp"

namespace mfoc {

inline constexpr int kSchemaVersion = 1;

struct SimulateOptions {
  Eigen::Index realizations = 1;
  std::size_t stride = 1;  // write every stride-th grid time
};

/// Everything one CLI run needs. Absent tables keep the defaults below, and
/// the echo lists every resolved value.
struct RunConfig {
  ProblemSpec problem;
  MckeanOptions mckean;
  SimulateOptions simulate;
  OptProblem optimize;  // `problem` member is overwritten by opt_problem()
  ChaosStudyOptions chaos;
  GammaStudyOptions gamma;
  StabilityStudyOptions stability;
  FpCheckOptions fpcheck;

  OptProblem opt_problem() const;
  void set_seed(std::uint64_t seed);
  void set_threads(unsigned threads);
};

/// Parses TOML text. Unknown keys, a missing or wrong `schema_version`, type
/// mismatches and invalid values all throw ConfigError.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Resolved configuration as JSON (threads excluded: they never change results).
nlohmann::json config_echo(const RunConfig& config);

}  // namespace mfoc
