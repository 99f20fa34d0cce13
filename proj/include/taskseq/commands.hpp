#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "taskseq/classifier.hpp"
#include "taskseq/cohort.hpp"
#include "taskseq/hypertraps.hpp"

namespace taskseq {

/// Effective configuration of one CLI run. Relative paths are taken relative
/// to the working directory.
struct RunConfig {
  std::optional<std::filesystem::path> course;
  std::optional<std::filesystem::path> events;
  std::optional<std::filesystem::path> grades;
  std::optional<std::filesystem::path> confidence;
  std::filesystem::path out = "out";
  std::optional<double> quantile;
  std::optional<std::uint64_t> seed;
  McmcConfig mcmc;
  ExperimentMode mode = ExperimentMode::InSample;
  double holdout_frac = 0.3;
  int chains = 1;
  // Scenario for `simulate`: either a path or an inline JSON object.
  std::optional<std::filesystem::path> scenario_path;
  nlohmann::json scenario_inline;
};

/// Overlays the fields present in `j` onto `base`. Throws InvalidConfig.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& config);

/// Reads course + events (required), then grades and confidence if given.
Cohort load_cohort(const RunConfig& config);

// Each command writes into config.out (created if needed), echoes the
// effective configuration to config.json and returns a short JSON summary.
nlohmann::json cmd_stats(const RunConfig& config);
nlohmann::json cmd_contrast(const RunConfig& config);
nlohmann::json cmd_fit(const RunConfig& config);
nlohmann::json cmd_classify(const RunConfig& config);
nlohmann::json cmd_simulate(const RunConfig& config);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace taskseq
