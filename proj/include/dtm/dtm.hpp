#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "dtm/boltzmann.hpp"
#include "dtm/diagnostics.hpp"
#include "dtm/forward_process.hpp"
#include "dtm/grid_graph.hpp"
#include "dtm/spin.hpp"

namespace dtm {

/// Chain of T step models on one shared graph. steps[t-1] models
/// P(x^{t-1} | x^t); its input coupling is Gamma(dt_t)/2 from the schedule.
struct DtmModel {
  std::shared_ptr<const GridGraph> graph;
  NoiseSchedule schedule;
  std::vector<BoltzmannMachine<float>> steps;

  static DtmModel create(std::shared_ptr<const GridGraph> graph, const NoiseSchedule& schedule,
                         std::uint64_t seed, double init_scale = 1.0, float beta = 1.0f);

  int num_steps() const { return static_cast<int>(steps.size()); }
  BoltzmannMachine<float>& step(int t) { return steps.at(static_cast<std::size_t>(t - 1)); }
  const BoltzmannMachine<float>& step(int t) const { return steps.at(static_cast<std::size_t>(t - 1)); }

  /// Rewrites every step's input coupling from the schedule.
  void install_couplings();
  void validate() const;
};

/// Single-step model with Gamma ~ 0: the monolithic EBM baseline.
NoiseSchedule mebm_schedule();

struct AcpConfig {
  bool enabled = true;
  double epsilon = 0.03;
  double delta = 0.2;
  double lambda_min = 1e-4;
  int probe_interval = 1;     // epochs between autocorrelation probes
  int probe_conditions = 16;  // distinct x^t per probe
  int probe_chains = 32;      // chains per condition
  int probe_span = 2;         // recorded frames = probe_span * K_grad + 1

  void validate() const;
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 50;
  double learning_rate = 0.05;
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;  // first-moment decay
  double adam_beta2 = 0.999;  // second-moment decay
  double adam_eps = 1e-8;
  int k_grad = 40;   // sweeps per gradient phase
  int burn_in = 20;  // leading sweeps of each phase excluded from averages
  int replicas = 2;  // negative-phase chains per conditioning input
  std::vector<double> lambda_init{0.0};  // one value, or one per step
  AcpConfig acp;
  bool persistent = false;  // carry negative chains across minibatches
  std::uint64_t seed = 0;
  int threads = 1;

  void validate(int steps) const;
  double initial_lambda(int t) const;
};

struct AcpState {
  struct Entry {
    int epoch;
    int step;
    double autocorr;
    double lambda;
  };
  std::vector<double> lambda;                        // per step
  std::vector<std::optional<double>> last_autocorr;  // per step, a_{m-1}
  std::vector<Entry> history;

  static AcpState initial(const TrainConfig& cfg, int steps);
};

/// Adaptive penalty rule for step t (1-based) given a fresh autocorrelation a_m.
void acp_update(AcpState& state, int t, double a_m, const AcpConfig& cfg);

/// Loss gradient per parameter. Descending it increases data likelihood.
struct Gradient {
  Eigen::VectorXd dJ;  // per edge
  Eigen::VectorXd dh;  // per node

  double norm() const { return std::sqrt(dJ.squaredNorm() + dh.squaredNorm()); }
};

struct PhaseMoments {
  Eigen::VectorXd node;  // <x_i>
  Eigen::VectorXd edge;  // <x_u x_v>
  long chain_sweeps = 0;
};

struct GradientOptions {
  int k_grad = 40;
  int burn_in = 20;
  int replicas = 2;
  bool with_tc = true;
  int threads = 1;
};

struct GradientResult {
  Gradient denoise;
  std::optional<Gradient> tc;
  PhaseMoments positive;
  PhaseMoments negative;
  Eigen::VectorXd factorized_edge;  // mean over conditions of m_u m_v
  SpinMatrix negative_final;        // final negative-phase states, chains x nodes
  long chain_sweeps = 0;            // positive + negative, summed over chains
};

/// Denoising-loss gradient for one minibatch of (x^{t-1}, x^t) pairs.
/// Positive phase: visibles clamped to x^{t-1}, inputs to x^t, latents sampled.
/// Negative phase: inputs clamped to x^t, everything else sampled with
/// `replicas` chains per pair. With with_tc, the total-correlation gradient
/// is computed from the same negative-phase samples.
GradientResult grad_step(const BoltzmannMachine<float>& m, const SpinMatrix& prev, const SpinMatrix& cur,
                         const GradientOptions& opts, std::uint64_t seed,
                         const SpinMatrix* negative_init = nullptr);

/// Total-correlation gradient alone: runs only the negative phase.
GradientResult tc_grad(const BoltzmannMachine<float>& m, const SpinMatrix& cur, const GradientOptions& opts,
                       std::uint64_t seed);

/// r_yy at lag K_grad for the conditional chains of one step model. Chains
/// start from fair coins, run `burn_in` sweeps, then record span*K_grad+1
/// frames; the mean is taken per conditioning input.
double probe_autocorrelation(const BoltzmannMachine<float>& m, const SpinMatrix& conditions,
                             int chains_per_condition, int k_grad, int burn_in, int span,
                             const ProjectionObservable& obs, std::uint64_t seed, int threads = 1);

struct LogRow {
  int epoch = 0;
  int step = 0;
  double lambda = 0;
  std::optional<double> autocorr;
  double grad_norm = 0;    // mean over minibatches
  double tc_norm = 0;      // mean over minibatches
  double moment_gap = 0;   // mean |pos - neg| over visible means, last minibatch
  long chain_sweeps = 0;   // gradient sweeps this epoch
  long probe_sweeps = 0;
};

struct TrainLog {
  std::vector<LogRow> rows;
  long gradient_sweeps = 0;
  long probe_sweeps = 0;

  std::string to_csv() const;
};

/// Optimizer moments for one step model.
struct OptimizerState {
  Eigen::VectorXd mJ, vJ, mh, vh;
  long t = 0;
};

/// Everything needed to continue a run from a checkpoint.
struct TrainState {
  int epoch = 0;  // completed epochs
  AcpState acp;
  std::vector<OptimizerState> optimizer;
  std::vector<SpinMatrix> persistent;  // negative chains per step when cfg.persistent
};

using EpochCallback = std::function<void(const DtmModel&, const TrainState&, const std::vector<LogRow>&)>;

/// Trains every step model on noised copies of `data` (rows = x^0, columns
/// = visible nodes with the last n_label_columns being labels). Each step only
/// touches its own parameters. When `state` is given, training resumes after
/// state->epoch and the state is updated in place.
TrainLog train(DtmModel& model, const SpinMatrix& data, int n_label_columns, const TrainConfig& cfg,
               TrainState* state = nullptr, const EpochCallback& on_epoch = {});

struct GenerateOptions {
  int k_mix = 250;
  int threads = 1;
  bool keep_frames = false;
  std::optional<SpinVector> label_code;  // clamps label visibles and label inputs
};

struct GenerateResult {
  SpinMatrix samples;                   // n x visible, x^0
  std::vector<SpinMatrix> step_frames;  // x^T, ..., x^0 when keep_frames
  long node_updates = 0;
  long chain_sweeps = 0;
};

/// Reverse chain from fair-coin noise x^T down to x^0.
GenerateResult generate(const DtmModel& model, int n_samples, std::uint64_t seed, const GenerateOptions& opts);

/// Label code for a class index; throws when the label is out of range.
SpinVector condition_code(const GridGraph& g, int label, int classes);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
nlohmann::json acp_state_to_json(const AcpState& s);
AcpState acp_state_from_json(const nlohmann::json& j);

}  // namespace dtm
