#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dtm::cli {

/// Cache root: $DTM_CACHE_DIR when set, else ./.dtm-cache.
std::filesystem::path cache_dir();

struct PrepareArgs {
  std::filesystem::path config;
  std::filesystem::path out;  // dataset file; default <cache>/dataset.dtmd
};

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path dataset;  // default <cache>/dataset.dtmd
  std::filesystem::path out;      // checkpoint dir; default <cache>/checkpoint
  bool resume = false;
  bool mebm = false;
  std::optional<int> epochs;
  int proxy_every = 0;     // epochs between proxy Frechet evaluations, 0 = off
  int proxy_samples = 500;
  int threads = 1;
};

struct GenerateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // default <cache>/samples
  std::optional<int> n;
  std::optional<int> k_mix;
  std::optional<std::uint64_t> seed;
  std::optional<int> label;
  int classes = 0;  // 0 = [data] label_classes from the checkpoint config
  bool steps_frames = false;
  bool pgm = false;
  int width = 0;
  int height = 0;
  int bits_per_pixel = 1;
  int threads = 1;
};

struct AnalyzeArgs {
  std::filesystem::path trace;       // existing trace file
  std::filesystem::path checkpoint;  // or sample a step model directly
  int step = 1;
  int chains = 64;
  int sweeps = 1024;
  int burn_in = 0;
  int max_lag = 256;
  int dims = 16;
  std::uint64_t seed = 0;
  std::optional<std::pair<int, int>> window;
  std::filesystem::path out;  // default <cache>/mixing
  int threads = 1;
};

struct EnergyArgs {
  std::string scenario;
  std::filesystem::path config;
  std::filesystem::path json_out;
};

/// Each command returns a JSON summary that main() prints.
nlohmann::json cmd_prepare(const PrepareArgs& a);
nlohmann::json cmd_train(const TrainArgs& a);
nlohmann::json cmd_generate(const GenerateArgs& a);
nlohmann::json cmd_analyze(const AnalyzeArgs& a);
nlohmann::json cmd_energy(const EnergyArgs& a, std::string* table = nullptr);

/// Parses argv and runs a subcommand. Exit codes: 0 success, 2 validation,
/// 3 runtime. With --error-json, failures print {"error", "kind", "code"} to stderr.
int run(int argc, char** argv);

}  // namespace dtm::cli
