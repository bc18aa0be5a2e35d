#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dtm/checkpoint.hpp"
#include "dtm/config.hpp"
#include "dtm/data_io.hpp"
#include "dtm/diagnostics.hpp"
#include "dtm/dtm.hpp"
#include "dtm/energy_model.hpp"
#include "dtm/trace_io.hpp"

namespace dtm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags for seeds derived inside the CLI.
enum : std::uint64_t {
  kTagSynthetic = 0x73796e74,
  kTagModelInit = 0x696e6974,
  kTagProxy = 0x70726f78,
  kTagAnalyze = 0x616e6c7a,
};

/// Raised for missing or inconsistent user inputs; maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void require_file(const fs::path& path, const std::string& what, const std::string& hint) {
  if (!fs::exists(path)) throw UsageError(what + " not found at " + path.string() + " (" + hint + ")");
}

SpinDataset load_dataset(const fs::path& path) {
  require_file(path, "dataset", "run `prepare` first or pass --dataset");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_dataset(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

SpinDataset build_dataset(const RunConfig& rc) {
  const auto& d = rc.data;
  SpinDataset ds;
  ds.meta.source = d.source;
  ds.meta.threshold = d.threshold;
  ds.meta.bits_per_pixel = d.bits_per_pixel;
  if (d.source == "synthetic") {
    const auto mix = SyntheticMixture::random(d.bits, d.modes, d.flip, d.seed);
    ds.samples = mix.sample(d.n, derive_seed(d.seed, kTagSynthetic), &ds.labels);
    ds.meta.width = d.bits;
    ds.meta.height = 1;
    ds.meta.bits_per_pixel = 1;
    if (rc.graph.n_visible != d.bits)
      throw ConfigError("[graph] n_visible (" + std::to_string(rc.graph.n_visible) + ") must equal [data] bits (" +
                        std::to_string(d.bits) + ")");
    ds.validate();
    return ds;
  }
  const auto images = read_idx(d.images);
  if (images.dims.size() < 2) throw std::runtime_error(d.images + ": expected an image tensor with >= 2 dims");
  ByteMatrix pixels = images.as_matrix();
  if (d.limit > 0 && d.limit < pixels.rows()) pixels.conservativeResize(d.limit, Eigen::NoChange);
  ds.meta.height = images.dims.size() >= 3 ? static_cast<int>(images.dims[1]) : 1;
  ds.meta.width = static_cast<int>(pixels.cols()) / ds.meta.height;
  if (d.bits_per_pixel == 1) {
    ds.samples = binarize(pixels, d.threshold);
  } else {
    const IntMatrix levels =
        (pixels.cast<double>() * (d.bits_per_pixel / 255.0)).array().round().cast<int>().matrix();
    ds.samples = embed_integer(levels, d.bits_per_pixel);
  }
  if (!d.labels.empty()) {
    const auto labels = read_idx(d.labels);
    if (labels.dims.size() != 1) throw std::runtime_error(d.labels + ": expected a 1-d label tensor");
    if (labels.dims[0] < static_cast<std::uint32_t>(pixels.rows()))
      throw std::runtime_error(d.labels + ": holds " + std::to_string(labels.dims[0]) + " labels for " +
                               std::to_string(pixels.rows()) + " images");
    ds.labels.assign(labels.data.begin(), labels.data.begin() + pixels.rows());
  }
  if (d.conditional) {
    ds.meta.label_classes = d.label_classes;
    ds.meta.repetitions = d.repetitions;
    SpinMatrix codes(ds.size(), d.label_classes * d.repetitions);
    for (int r = 0; r < ds.size(); ++r) {
      if (ds.labels[r] >= d.label_classes)
        throw std::runtime_error(d.labels + ": label " + std::to_string(ds.labels[r]) + " at row " +
                                 std::to_string(r) + " exceeds label_classes");
      codes.row(r) = label_code(ds.labels[r], d.label_classes, d.repetitions).transpose();
    }
    ds.label_codes = std::move(codes);
  }
  if (ds.samples.cols() != rc.graph.n_visible)
    throw ConfigError("[graph] n_visible (" + std::to_string(rc.graph.n_visible) + ") must equal the " +
                      std::to_string(ds.samples.cols()) + " pixel bits");
  ds.validate();
  return ds;
}

std::shared_ptr<const GridGraph> build_graph(const RunConfig& rc) {
  return std::make_shared<const GridGraph>(
      build_grid(rc.graph.side, build_pattern(rc.graph.pattern), rc.graph.n_visible, rc.graph.n_labels, rc.graph.seed));
}

/// Config stored in a checkpoint manifest, or defaults when absent.
RunConfig checkpoint_config(const Checkpoint& ck) {
  const auto& run = ck.manifest.at("run");
  if (run.contains("config")) return run_config_from_json(run.at("config"));
  return RunConfig{};
}

/// CSV lines without the header, with a trailing proxy_frechet column.
std::string log_lines(const std::vector<LogRow>& rows, std::optional<double> proxy) {
  TrainLog log;
  log.rows = rows;
  std::istringstream in(log.to_csv());
  std::string line, out;
  std::getline(in, line);
  std::ostringstream px;
  px.precision(8);
  if (proxy) px << *proxy;
  while (std::getline(in, line)) out += line + "," + px.str() + "\n";
  return out;
}

std::string log_header() {
  std::istringstream in(TrainLog{}.to_csv());
  std::string line;
  std::getline(in, line);
  return line + ",proxy_frechet\n";
}

/// Keeps the header and rows whose epoch is at most `epoch`.
std::string truncate_log(const fs::path& path, int epoch) {
  std::string out = log_header();
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) <= epoch) out += line + "\n";
  }
  return out;
}

SpinMatrix pixel_columns(const SpinMatrix& samples, int pixels) { return samples.leftCols(pixels); }

std::pair<int, int> image_shape(const json& dataset, int pixels, int bits_per_pixel, int width, int height) {
  if (width > 0 && height > 0) return {width, height};
  const int w = dataset.value("width", 0);
  const int h = dataset.value("height", 0);
  if (w > 0 && h > 0 && w * h * bits_per_pixel == pixels) return {w, h};
  return {pixels / bits_per_pixel, 1};
}

}  // namespace

fs::path cache_dir() {
  if (const char* env = std::getenv("DTM_CACHE_DIR"); env && *env) return env;
  return ".dtm-cache";
}

json cmd_prepare(const PrepareArgs& a) {
  const RunConfig rc = load_run_config(a.config);
  const fs::path out = a.out.empty() ? cache_dir() / "dataset.dtmd" : a.out;
  const SpinDataset ds = build_dataset(rc);
  std::ostringstream bin(std::ios::binary);
  write_dataset(bin, ds);
  write_atomic(out, bin.str());
  json manifest = dataset_manifest(ds);
  manifest["config"] = run_config_to_json(rc);
  write_json(out.string() + ".json", manifest);
  return {{"command", "prepare"}, {"dataset", out.string()}, {"manifest", manifest}};
}

json cmd_train(const TrainArgs& a) {
  RunConfig rc = load_run_config(a.config);
  if (a.mebm) rc.schedule.mebm = true;
  if (a.epochs) rc.train.epochs = *a.epochs;
  rc.validate();
  rc.train.threads = a.threads;
  if (a.proxy_every < 0 || a.proxy_samples < 2) throw UsageError("--proxy-every must be >= 0 and --proxy-samples >= 2");

  const fs::path data_path = a.dataset.empty() ? cache_dir() / "dataset.dtmd" : a.dataset;
  const fs::path out = a.out.empty() ? cache_dir() / "checkpoint" : a.out;
  const SpinDataset ds = load_dataset(data_path);
  const SpinMatrix data = ds.combined();
  if (ds.samples.cols() != rc.graph.n_visible || ds.num_label_columns() != rc.graph.n_labels)
    throw ConfigError("dataset " + data_path.string() + " has " + std::to_string(ds.samples.cols()) + " pixel columns (" +
                      std::to_string(ds.num_label_columns()) + " labels) but [graph] expects n_visible=" +
                      std::to_string(rc.graph.n_visible) + ", n_labels=" + std::to_string(rc.graph.n_labels));

  json config = run_config_to_json(rc);
  config["train"].erase("threads");
  const json extra = {{"config", config}, {"dataset", dataset_manifest(ds)}, {"dataset_path", data_path.string()}};

  DtmModel model;
  TrainState state;
  const fs::path log_path = out / "training_log.csv";
  std::string log_text = log_header();
  if (a.resume) {
    require_file(out / "manifest.json", "checkpoint", "run `train` without --resume first");
    auto ck = load_checkpoint(out);
    const json& prev = ck.manifest.at("run").value("config", json::object());
    for (const char* section : {"graph", "schedule", "data"})
      if (prev.value(section, json()) != config.at(section))
        throw ConfigError(std::string("cannot resume: [") + section + "] differs from the checkpoint's config");
    model = std::move(ck.model);
    state = std::move(ck.state);
    log_text = truncate_log(log_path, state.epoch);
  } else {
    model = DtmModel::create(build_graph(rc), rc.schedule.build(), derive_seed(rc.train.seed, kTagModelInit),
                             rc.init_scale);
  }

  TrainConfig tc = rc.train;
  tc.epochs = rc.train.epochs - state.epoch;
  const auto t0 = std::chrono::steady_clock::now();
  TrainLog log;
  const int pixels = model.graph->num_pixels();
  const auto obs = ProjectionObservable::gaussian(pixels, derive_seed(rc.train.seed, kTagProxy));
  const SpinMatrix reference = pixel_columns(data, pixels);
  std::optional<double> noise_proxy;
  if (a.proxy_every > 0) {
    const CounterRng rng(derive_seed(rc.train.seed, kTagProxy, 1));
    SpinMatrix noise(a.proxy_samples, pixels);
    for (int r = 0; r < noise.rows(); ++r)
      for (int c = 0; c < pixels; ++c) noise(r, c) = (rng.bits(r, c) >> 63) ? Spin{1} : Spin{-1};
    noise_proxy = proxy_frechet(noise, reference, obs);
  }
  if (tc.epochs > 0) {
    log = train(model, data, ds.num_label_columns(), tc, &state,
                [&](const DtmModel& m, const TrainState& st, const std::vector<LogRow>& rows) {
                  std::optional<double> proxy;
                  if (a.proxy_every > 0 && st.epoch % a.proxy_every == 0) {
                    GenerateOptions go;
                    go.k_mix = rc.sample.k_mix;
                    go.threads = a.threads;
                    const auto gen = generate(m, a.proxy_samples,
                                              derive_seed(rc.train.seed, kTagProxy, static_cast<std::uint64_t>(st.epoch) + 2), go);
                    proxy = proxy_frechet(pixel_columns(gen.samples, pixels), reference, obs);
                  }
                  log_text += log_lines(rows, proxy);
                  save_checkpoint(out, m, st, extra);
                  write_atomic(log_path, log_text);
                });
  } else {
    write_atomic(log_path, log_text);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json lambdas = state.acp.lambda;
  return {{"command", "train"},
          {"checkpoint", out.string()},
          {"log", log_path.string()},
          {"epochs_completed", state.epoch},
          {"steps", model.num_steps()},
          {"mebm", rc.schedule.mebm},
          {"lambda", lambdas},
          {"gradient_sweeps", log.gradient_sweeps},
          {"probe_sweeps", log.probe_sweeps},
          {"proxy_frechet_noise", noise_proxy ? json(*noise_proxy) : json(nullptr)},
          {"seconds", seconds}};
}

json cmd_generate(const GenerateArgs& a) {
  require_file(a.checkpoint / "manifest.json", "checkpoint", "run `train` first or pass --checkpoint");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const RunConfig rc = checkpoint_config(ck);
  const auto& g = *ck.model.graph;
  const int n = a.n.value_or(rc.sample.n_samples);
  const int k_mix = a.k_mix.value_or(rc.sample.k_mix);
  const std::uint64_t seed = a.seed.value_or(rc.sample.seed);
  if (n < 1 || k_mix < 1) throw UsageError("--n and --k-mix must be >= 1");
  const fs::path out = a.out.empty() ? cache_dir() / "samples" : a.out;

  GenerateOptions go;
  go.k_mix = k_mix;
  go.threads = a.threads;
  go.keep_frames = a.steps_frames;
  const int classes = a.classes > 0 ? a.classes : rc.data.label_classes;
  if (a.label) {
    if (g.num_labels() == 0) throw UsageError("--label needs a model trained with label nodes");
    try {
      go.label_code = condition_code(g, *a.label, classes);
    } catch (const std::out_of_range& e) {
      throw UsageError(e.what());
    }
  }
  const auto res = generate(ck.model, n, seed, go);

  const int pixels = g.num_pixels();
  SpinDataset samples;
  samples.samples = pixel_columns(res.samples, pixels);
  if (g.num_labels() > 0) samples.label_codes = SpinMatrix(res.samples.rightCols(g.num_labels()));
  const json ds_meta = ck.manifest.at("run").value("dataset", json::object());
  samples.meta.source = "generated";
  samples.meta.bits_per_pixel = ds_meta.value("bits_per_pixel", 1);
  const auto [width, height] = image_shape(ds_meta, pixels, samples.meta.bits_per_pixel, a.width, a.height);
  if (width * height * samples.meta.bits_per_pixel != pixels)
    throw UsageError("--width x --height x bits_per_pixel must equal the " + std::to_string(pixels) + " pixel bits");
  samples.meta.width = width;
  samples.meta.height = height;
  samples.meta.label_classes = g.num_labels() > 0 ? classes : 0;
  samples.meta.repetitions = g.num_labels() > 0 ? g.num_labels() / classes : 0;

  const json run = {{"checkpoint", a.checkpoint.string()},
                    {"epoch", ck.state.epoch},
                    {"n", n},
                    {"k_mix", k_mix},
                    {"seed", seed},
                    {"label", a.label ? json(*a.label) : json(nullptr)},
                    {"config", ck.manifest.at("run").value("config", json::object())}};
  std::ostringstream bin(std::ios::binary);
  write_dataset(bin, samples);
  write_atomic(out / "samples.dtmd", bin.str());
  json manifest = dataset_manifest(samples);
  manifest["generate"] = run;
  manifest["node_updates"] = res.node_updates;
  manifest["chain_sweeps"] = res.chain_sweeps;
  write_json(out / "samples.dtmd.json", manifest);
  json files = {(out / "samples.dtmd").string()};

  const int bpp = samples.meta.bits_per_pixel;
  if (a.pgm) {
    std::ostringstream img(std::ios::binary);
    write_pgm_grid(img, samples.samples, width, height, bpp, std::min(n, 10));
    write_atomic(out / "grid.pgm", img.str());
    files.push_back((out / "grid.pgm").string());
  }
  if (a.steps_frames) {
    SampleTrace tr;
    tr.num_chains = n;
    tr.num_nodes = g.num_visible();
    const int T = static_cast<int>(res.step_frames.size()) - 1;
    for (int f = 0; f <= T; ++f) {
      tr.frames.push_back(res.step_frames[static_cast<std::size_t>(f)]);
      tr.sweep_stamps.push_back(T - f);
    }
    tr.final_states = tr.frames.back();
    save_trace(out / "steps.dtmt", tr, g.visible_nodes(), {{"stamp_meaning", "diffusion step t"}, {"generate", run}});
    files.push_back((out / "steps.dtmt").string());
    if (a.pgm) {
      // One row per sample, x^T on the left down to x^0 on the right.
      const int shown = std::min(n, 10);
      SpinMatrix tiles(shown * (T + 1), pixels);
      for (int s = 0; s < shown; ++s)
        for (int f = 0; f <= T; ++f)
          tiles.row(s * (T + 1) + f) = res.step_frames[static_cast<std::size_t>(f)].row(s).leftCols(pixels);
      std::ostringstream img(std::ios::binary);
      write_pgm_grid(img, tiles, width, height, bpp, T + 1);
      write_atomic(out / "steps.pgm", img.str());
      files.push_back((out / "steps.pgm").string());
    }
  }
  return {{"command", "generate"}, {"out", out.string()}, {"files", files}, {"node_updates", res.node_updates}};
}

json cmd_analyze(const AnalyzeArgs& a) {
  if (a.trace.empty() == a.checkpoint.empty()) throw UsageError("pass exactly one of --trace or --checkpoint");
  if (a.max_lag < 4 || a.dims < 1 || a.burn_in < 0) throw UsageError("--max-lag must be >= 4, --dims >= 1, --burn-in >= 0");
  const fs::path out = a.out.empty() ? cache_dir() / "mixing" : a.out;
  fs::create_directories(out);
  json source;
  SampleTrace trace;
  std::vector<int> columns;
  std::vector<int> groups;
  if (!a.trace.empty()) {
    require_file(a.trace, "trace", "write one with `generate --steps-frames` or pass --checkpoint");
    StoredTrace st = load_trace(a.trace);
    trace = std::move(st.trace);
    const auto cols = static_cast<int>(st.node_order.size());
    for (int c = 0; c < cols; ++c) columns.push_back(c);
    source = {{"trace", a.trace.string()}};
  } else {
    require_file(a.checkpoint / "manifest.json", "checkpoint", "run `train` first or pass --trace");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    if (a.step < 1 || a.step > ck.model.num_steps())
      throw UsageError("--step must lie in 1.." + std::to_string(ck.model.num_steps()));
    if (a.chains < 2) throw UsageError("--chains must be >= 2");
    const auto& m = ck.model.step(a.step);
    const auto& g = *m.graph;
    // Conditioning inputs are fair coins; chains come in groups of 8 sharing one input.
    const std::uint64_t seed = derive_seed(a.seed, kTagAnalyze);
    const CounterRng rng(seed);
    ChainBatch batch = ChainBatch::random(g, a.chains, derive_seed(seed, 1));
    constexpr int kGroup = 8;
    for (int c = 0; c < a.chains; ++c) {
      groups.push_back(c / kGroup);
      for (int k = 0; k < g.num_visible(); ++k)
        batch.inputs(c, k) = (rng.bits(c / kGroup, k) >> 63) ? Spin{1} : Spin{-1};
    }
    SamplerConfig sc;
    sc.sweeps = a.burn_in + a.sweeps;
    sc.chains = a.chains;
    sc.seed = batch.seed;
    sc.record_every = 1;
    sc.threads = a.threads;
    trace = run(m, batch, sc);
    trace.frames.erase(trace.frames.begin(), trace.frames.begin() + a.burn_in);
    trace.sweep_stamps.erase(trace.sweep_stamps.begin(), trace.sweep_stamps.begin() + a.burn_in);
    trace = select_nodes(trace, g.visible_nodes());
    for (int c = 0; c < g.num_visible(); ++c) columns.push_back(c);
    save_trace(out / "trace.dtmt", trace, g.visible_nodes(), {{"checkpoint", a.checkpoint.string()}, {"step", a.step}});
    source = {{"checkpoint", a.checkpoint.string()}, {"step", a.step}, {"chains", a.chains},
              {"sweeps", a.sweeps}, {"burn_in", a.burn_in}, {"trace", (out / "trace.dtmt").string()}};
  }
  const int frames = static_cast<int>(trace.frames.size());
  const int max_lag = std::min(a.max_lag, frames - 1);
  if (max_lag < 4) throw UsageError("trace holds " + std::to_string(frames) + " frames; need at least 5");
  const auto obs = ProjectionObservable::gaussian(static_cast<int>(columns.size()), a.seed, a.dims);
  auto res = autocorrelation(project(trace, columns, obs), dense_lags(max_lag), groups);
  MixingFit fit;
  if (a.window) {
    try {
      fit = fit_sigma2(res, *a.window);
    } catch (const std::invalid_argument& e) {
      fit.status = MixingStatus::unresolved;
      fit.window = *a.window;
      fit.reason = e.what();
    }
  } else {
    fit = fit_sigma2_auto(res);
  }
  json report = autocorr_to_json(res, fit);
  report["source"] = source;
  report["observable"] = {{"dims", a.dims}, {"seed", a.seed}};
  write_atomic(out / "autocorr.csv", autocorr_to_csv(res));
  write_json(out / "mixing.json", report);
  const bool resolved = fit.status == MixingStatus::resolved;
  return {{"command", "analyze-mixing"},
          {"status", resolved ? "resolved" : "unresolved"},
          {"sigma2", resolved ? json(fit.sigma2) : json(nullptr)},
          {"relaxation_sweeps", resolved ? json(fit.relaxation_sweeps) : json(nullptr)},
          {"reason", fit.reason},
          {"out", out.string()}};
}

json cmd_energy(const EnergyArgs& a, std::string* table) {
  if (a.scenario.empty() == a.config.empty()) throw UsageError("pass exactly one of --scenario or --config");
  EnergySection sec;
  json origin;
  if (!a.scenario.empty()) {
    sec = energy_scenario(a.scenario);
    origin = {{"scenario", a.scenario}};
  } else {
    require_file(a.config, "scenario file", "pass a TOML file with an [energy] table");
    const json tree = read_toml(a.config);
    if (!tree.contains("energy")) throw ConfigError(a.config.string() + ": no [energy] table");
    try {
      sec = run_config_from_json({{"energy", tree.at("energy")}}).energy;
    } catch (const ConfigError& e) {
      throw ConfigError(a.config.string() + ": " + e.what());
    }
    origin = {{"config", a.config.string()}};
  }
  const auto ledger = hardware::program_energy(sec.context, sec.params);
  json j = hardware::ledger_to_json(ledger, sec.params);
  j["source"] = origin;
  if (!a.json_out.empty()) write_json(a.json_out, j);
  if (table) *table = hardware::ledger_to_table(ledger);
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"Denoising thermodynamic models: prepare data, train, generate, analyze mixing, estimate energy"};
  app.require_subcommand(1);
  bool error_json = false;
  app.add_flag("--error-json", error_json, "Print failures as JSON on stderr");

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Convert IDX or synthetic data into a spin dataset");
  prep->add_option("-c,--config", pa.config, "Run config (TOML)")->required();
  prep->add_option("-o,--out", pa.out, "Dataset file (default <cache>/dataset.dtmd)");

  TrainArgs ta;
  ta.threads = default_threads();
  auto* tr = app.add_subcommand("train", "Train every step model, checkpointing after each epoch");
  tr->add_option("-c,--config", ta.config, "Run config (TOML)")->required();
  tr->add_option("-d,--dataset", ta.dataset, "Dataset file (default <cache>/dataset.dtmd)");
  tr->add_option("-o,--out", ta.out, "Checkpoint directory (default <cache>/checkpoint)");
  tr->add_flag("--resume", ta.resume, "Continue from the checkpoint in --out");
  tr->add_flag("--mebm", ta.mebm, "Single-step baseline (overrides [schedule])");
  tr->add_option("--epochs", ta.epochs, "Total epochs (overrides [train] epochs)");
  tr->add_option("--proxy-every", ta.proxy_every, "Epochs between proxy Frechet evaluations (0 = off)");
  tr->add_option("--proxy-samples", ta.proxy_samples, "Samples per proxy evaluation");
  tr->add_option("-j,--threads", ta.threads, "Worker threads")->check(CLI::PositiveNumber);

  GenerateArgs ga;
  ga.threads = default_threads();
  auto* gen = app.add_subcommand("generate", "Sample from a trained checkpoint");
  gen->add_option("-k,--checkpoint", ga.checkpoint, "Checkpoint directory")->default_str((cache_dir() / "checkpoint").string());
  gen->add_option("-o,--out", ga.out, "Output directory (default <cache>/samples)");
  gen->add_option("-n,--n", ga.n, "Number of samples (default [sample] n_samples)");
  gen->add_option("--k-mix", ga.k_mix, "Sweeps per step (default [sample] k_mix)");
  gen->add_option("--seed", ga.seed, "Sampling seed (default [sample] seed)");
  gen->add_option("--label", ga.label, "Class to condition on");
  gen->add_option("--classes", ga.classes, "Label classes (default [data] label_classes)");
  gen->add_flag("--steps-frames", ga.steps_frames, "Keep x^T..x^0 for every sample");
  gen->add_flag("--pgm", ga.pgm, "Write PGM grids");
  gen->add_option("--width", ga.width, "Image width in pixels");
  gen->add_option("--height", ga.height, "Image height in pixels");
  gen->add_option("-j,--threads", ga.threads, "Worker threads")->check(CLI::PositiveNumber);

  AnalyzeArgs aa;
  aa.threads = default_threads();
  std::vector<int> window;
  auto* an = app.add_subcommand("analyze-mixing", "Autocorrelation curve and slow-mode estimate");
  auto* trace_opt = an->add_option("--trace", aa.trace, "Trace file to analyze");
  an->add_option("-k,--checkpoint", aa.checkpoint, "Run fresh chains on a checkpoint step instead")->excludes(trace_opt);
  an->add_option("--step", aa.step, "Step model to sample (1-based)");
  an->add_option("--chains", aa.chains, "Chains");
  an->add_option("--sweeps", aa.sweeps, "Recorded sweeps");
  an->add_option("--burn-in", aa.burn_in, "Discarded leading sweeps");
  an->add_option("--max-lag", aa.max_lag, "Largest lag");
  an->add_option("--dims", aa.dims, "Projection dimensions");
  an->add_option("--seed", aa.seed, "Projection and chain seed");
  an->add_option("--window", window, "Fit window: LO HI (default automatic)")->expected(2);
  an->add_option("-o,--out", aa.out, "Output directory (default <cache>/mixing)");
  an->add_option("-j,--threads", aa.threads, "Worker threads")->check(CLI::PositiveNumber);

  EnergyArgs ea;
  std::string format = "table";
  auto* en = app.add_subcommand("energy", "Physical energy ledger for a sampling program");
  auto* scen = en->add_option("--scenario", ea.scenario, "Named scenario (reference)");
  en->add_option("-c,--config", ea.config, "Scenario file with an [energy] table")->excludes(scen);
  en->add_option("-o,--out", ea.json_out, "Write the JSON ledger here");
  en->add_option("--format", format, "stdout format")->check(CLI::IsMember({"table", "json"}));

  auto fail = [&](const std::string& msg, int code) {
    if (error_json) {
      std::cerr << json{{"error", msg}, {"kind", code == 2 ? "validation" : "runtime"}, {"code", code}}.dump() << '\n';
    } else {
      std::cerr << "error: " << msg << '\n';
    }
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(e.what(), 2);
  }

  try {
    json result;
    if (*prep) {
      result = cmd_prepare(pa);
    } else if (*tr) {
      result = cmd_train(ta);
    } else if (*gen) {
      if (ga.checkpoint.empty()) ga.checkpoint = cache_dir() / "checkpoint";
      result = cmd_generate(ga);
    } else if (*an) {
      if (!window.empty()) aa.window = std::pair{window[0], window[1]};
      if (aa.trace.empty() && aa.checkpoint.empty()) aa.checkpoint = cache_dir() / "checkpoint";
      result = cmd_analyze(aa);
    } else if (*en) {
      std::string table;
      result = cmd_energy(ea, &table);
      if (format == "table") {
        std::cout << table;
        return 0;
      }
    }
    std::cout << result.dump(2) << '\n';
    return 0;
  } catch (const std::invalid_argument& e) {
    return fail(e.what(), 2);
  } catch (const std::out_of_range& e) {
    return fail(e.what(), 2);
  } catch (const std::exception& e) {
    return fail(e.what(), 3);
  }
}

}  // namespace dtm::cli
