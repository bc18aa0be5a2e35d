#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dtm/dtm.hpp"
#include "dtm/energy_model.hpp"
#include "dtm/forward_process.hpp"

namespace dtm {

/// Raised for malformed or out-of-range configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses the TOML subset used by run configs into a JSON tree: [section]
/// and [dotted.section] headers, key = value pairs, strings, integers, floats,
/// booleans, flat arrays, and # comments. Errors name the offending line.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json read_toml(const std::filesystem::path& path);

struct GraphSection {
  int side = 8;
  std::string pattern = "G12";
  int n_visible = 16;  // pixel nodes; label nodes are counted by n_labels
  int n_labels = 0;
  std::uint64_t seed = 0;
};

struct ScheduleSection {
  int steps = 4;
  double kappa_pixel = 1.0;
  double kappa_label = 0.2;
  std::string grid = "uniform";  // uniform | geometric
  double dt = 1.0;               // uniform step, or first step for geometric
  double ratio = 2.0;            // geometric growth
  bool mebm = false;             // single step with vanishing coupling

  NoiseSchedule build() const;
};

struct DataSection {
  std::string source = "synthetic";  // synthetic | idx
  std::string images;
  std::string labels;
  int threshold = 127;
  int bits_per_pixel = 1;
  bool conditional = false;
  int label_classes = 10;
  int repetitions = 1;
  int limit = 0;  // 0 = all rows
  // Synthetic mixture.
  int bits = 16;
  int modes = 3;
  double flip = 0.05;
  int n = 2000;
  std::uint64_t seed = 0;
};

struct SampleSection {
  int k_mix = 250;
  int n_samples = 100;
  std::uint64_t seed = 0;
};

struct EnergySection {
  hardware::ProcessParams params;
  hardware::ProgramContext context = hardware::reference_scenario();
};

struct RunConfig {
  GraphSection graph;
  ScheduleSection schedule;
  DataSection data;
  TrainConfig train;
  SampleSection sample;
  EnergySection energy;
  double init_scale = 1.0;

  /// Cross-section checks (visible counts, label layout, schedule, train settings).
  void validate() const;
};

/// Builds a config from a parsed tree; unknown sections or keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Every field including defaults, suitable for embedding in output manifests.
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Energy scenario: [energy] section of a config file, or a named preset.
EnergySection energy_scenario(const std::string& name);

}  // namespace dtm
