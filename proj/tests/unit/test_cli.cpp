#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "dtm/checkpoint.hpp"
#include "dtm/data_io.hpp"
#include "dtm/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kTinyConfig = R"(
[graph]
side = 4
pattern = "G8"
n_visible = 6
seed = 1

[schedule]
steps = 2

[data]
source = "synthetic"
bits = 6
modes = 2
n = 60
seed = 2

[train]
epochs = 2
batch_size = 20
k_grad = 6
burn_in = 2
seed = 3

[train.acp]
probe_conditions = 2
probe_chains = 4

[sample]
k_mix = 10
n_samples = 8
)";

struct Captured {
  int code = 0;
  std::string out, err;
};

Captured run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dtm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Captured c;
  c.code = dtm::cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("dtm_test_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
    ::setenv("DTM_CACHE_DIR", (root / "cache").c_str(), 1);
    std::ofstream(root / "run.toml") << kTinyConfig;
  }
  ~Workspace() { fs::remove_all(root); }
  std::string config() const { return (root / "run.toml").string(); }
};

}  // namespace

TEST_CASE("cache dir honours the environment override") {
  Workspace w("env");
  CHECK(dtm::cli::cache_dir() == w.root / "cache");
}

TEST_CASE("prepare is deterministic and embeds the config") {
  Workspace w("prepare");
  const auto a = run_cli({"prepare", "-c", w.config(), "-o", (w.root / "a.dtmd").string()});
  REQUIRE(a.code == 0);
  const auto b = run_cli({"prepare", "-c", w.config(), "-o", (w.root / "b.dtmd").string()});
  REQUIRE(b.code == 0);
  CHECK(slurp(w.root / "a.dtmd") == slurp(w.root / "b.dtmd"));
  const auto summary = json::parse(a.out);
  CHECK(summary.at("manifest").at("n") == 60);
}

TEST_CASE("validation failures exit 2, runtime failures exit 3") {
  Workspace w("codes");
  CHECK(run_cli({}).code != 0);
  CHECK(run_cli({"train", "-c", w.config(), "--bogus"}).code == 2);
  CHECK(run_cli({"prepare", "-c", (w.root / "missing.toml").string()}).code == 3);
  std::ofstream(w.root / "bad.toml") << "[graph]\nside = 1\n";
  CHECK(run_cli({"prepare", "-c", (w.root / "bad.toml").string()}).code == 2);
  // Training before prepare: the dataset is missing, and the hint says what to run.
  const auto missing = run_cli({"train", "-c", w.config()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("prepare") != std::string::npos);
  // A corrupt dataset file is a runtime failure.
  std::ofstream(w.root / "corrupt.dtmd") << "DTMD garbage";
  const auto corrupt = run_cli({"--error-json", "train", "-c", w.config(), "-d", (w.root / "corrupt.dtmd").string()});
  CHECK(corrupt.code == 3);
  const auto err = json::parse(corrupt.err);
  CHECK(err.at("code") == 3);
  CHECK(err.at("kind") == "runtime");
  CHECK_FALSE(err.at("error").get<std::string>().empty());
}

TEST_CASE("prepare, train, resume, generate, analyze on a tiny problem") {
  Workspace w("pipeline");
  REQUIRE(run_cli({"prepare", "-c", w.config()}).code == 0);
  const auto ck = w.root / "cache" / "checkpoint";

  const auto t1 = run_cli({"train", "-c", w.config(), "-j", "1", "--epochs", "1"});
  REQUIRE(t1.code == 0);
  CHECK(fs::exists(ck / "manifest.json"));
  CHECK(fs::exists(ck / "step_01.dtmb"));
  CHECK(fs::exists(ck / "step_02.dtmb"));
  const auto t2 = run_cli({"train", "-c", w.config(), "-j", "1", "--resume"});
  REQUIRE(t2.code == 0);
  const auto loaded = dtm::load_checkpoint(ck);
  CHECK(loaded.manifest.at("epoch") == 2);
  CHECK(loaded.manifest.dump().find("\"k_grad\"") != std::string::npos);

  // Fixed seed gives identical training logs.
  const auto other = w.root / "again";
  REQUIRE(run_cli({"train", "-c", w.config(), "-j", "1", "-o", other.string()}).code == 0);
  const auto log_name = [](const fs::path& dir) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") return e.path();
    return fs::path{};
  };
  REQUIRE_FALSE(log_name(ck).empty());
  CHECK(slurp(log_name(ck)) == slurp(log_name(other)));
  const auto header = slurp(log_name(ck)).substr(0, slurp(log_name(ck)).find('\n'));
  CHECK(header.find("lambda") != std::string::npos);

  const auto g = run_cli({"generate", "-j", "1", "--steps-frames", "--pgm", "--width", "3", "--height", "2"});
  REQUIRE(g.code == 0);
  const auto samples = w.root / "cache" / "samples";
  const auto steps = dtm::load_trace(samples / "steps.dtmt");
  CHECK(steps.trace.frames.size() == 3);
  CHECK(steps.trace.num_chains == 8);
  bool any_pgm = false;
  for (const auto& e : fs::directory_iterator(samples)) any_pgm |= e.path().extension() == ".pgm";
  CHECK(any_pgm);

  const auto an = run_cli({"analyze-mixing", "-j", "1", "--chains", "4", "--sweeps", "64", "--max-lag", "16"});
  REQUIRE(an.code == 0);
  const auto summary = json::parse(an.out);
  CHECK(summary.dump().find("status") != std::string::npos);

  CHECK(run_cli({"analyze-mixing", "--step", "9"}).code == 2);
  CHECK(run_cli({"generate", "-n", "0"}).code == 2);
}

TEST_CASE("mebm flag trains a single step") {
  Workspace w("mebm");
  REQUIRE(run_cli({"prepare", "-c", w.config()}).code == 0);
  REQUIRE(run_cli({"train", "-c", w.config(), "-j", "1", "--mebm", "--epochs", "1"}).code == 0);
  CHECK(dtm::load_checkpoint(w.root / "cache" / "checkpoint").model.num_steps() == 1);
}

TEST_CASE("energy command: reference scenario and config file") {
  Workspace w("energy");
  const auto table = run_cli({"energy", "--scenario", "reference"});
  REQUIRE(table.code == 0);
  CHECK(table.out.find("E_samp") != std::string::npos);
  const auto j = run_cli({"energy", "--scenario", "reference", "--format", "json", "-o", (w.root / "e.json").string()});
  REQUIRE(j.code == 0);
  const auto ledger = json::parse(slurp(w.root / "e.json"));
  CHECK(ledger.at("program").at("per_step").get<double>() == doctest::Approx(1.6e-9).epsilon(0.1));
  const auto file = run_cli({"energy", "-c", DTM_SOURCE_DIR "/tools/configs/reference_energy.toml", "--format", "json"});
  REQUIRE(file.code == 0);
  CHECK(run_cli({"energy", "--scenario", "nope"}).code == 2);
  CHECK(run_cli({"energy"}).code == 2);
}
