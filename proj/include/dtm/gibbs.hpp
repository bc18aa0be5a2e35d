#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dtm/boltzmann.hpp"
#include "dtm/parallel.hpp"
#include "dtm/rng.hpp"
#include "dtm/spin.hpp"

namespace dtm {

struct SamplerConfig {
  int sweeps = 1;        // K, counted in full two-color sweeps
  int chains = 1;
  std::uint64_t seed = 0;
  int record_every = 0;  // 0 = final state only
  int threads = 1;

  void validate() const {
    if (sweeps < 1) throw std::invalid_argument("sampler needs K >= 1 sweeps");
    if (chains < 1) throw std::invalid_argument("sampler needs at least one chain");
    if (record_every < 0) throw std::invalid_argument("record_every must be >= 0");
  }
};

/// Independent chains sharing one machine. Row c of each matrix is chain c.
struct ChainBatch {
  SpinMatrix states;   // chains x nodes
  SpinMatrix inputs;   // chains x visible
  MaskMatrix clamped;  // chains x nodes
  std::uint64_t seed = 0;
  long sweep_index = 0;

  int num_chains() const { return static_cast<int>(states.rows()); }

  /// Fair coins on every node, inputs +1, nothing clamped.
  static ChainBatch random(const GridGraph& g, int chains, std::uint64_t seed) {
    ChainBatch b;
    b.seed = seed;
    b.states.resize(chains, g.num_nodes());
    b.inputs = SpinMatrix::Constant(chains, g.num_visible(), 1);
    b.clamped = MaskMatrix::Zero(chains, g.num_nodes());
    b.randomize_free();
    return b;
  }

  /// Replicates one state into every chain.
  static ChainBatch replicate(const SpinState& s, int chains, std::uint64_t seed) {
    ChainBatch b;
    b.seed = seed;
    b.states = s.values.transpose().replicate(chains, 1);
    b.inputs = s.inputs.transpose().replicate(chains, 1);
    b.clamped = s.clamped.transpose().replicate(chains, 1);
    return b;
  }

  /// Fair coins on unclamped nodes, keyed by (seed, chain, node).
  void randomize_free() {
    const CounterRng rng(derive_seed(seed, 0x72616e64, static_cast<std::uint64_t>(sweep_index)));
    for (Eigen::Index c = 0; c < states.rows(); ++c)
      for (Eigen::Index i = 0; i < states.cols(); ++i)
        if (!clamped(c, i)) states(c, i) = (rng.bits(c, i) >> 63) ? Spin{1} : Spin{-1};
  }

  SpinState chain_state(int c) const {
    SpinState s;
    s.values = states.row(c).transpose();
    s.inputs = inputs.row(c).transpose();
    s.clamped = clamped.row(c).transpose();
    return s;
  }
};

/// Two-color block Gibbs kernel with a cached CSR weight layout.
///
/// One sweep resamples every unclamped node of block 0, then block 1. The
/// uniform for (chain c, node i, sweep k) is a pure function of the batch
/// seed, so results do not depend on how chains are scheduled.
template <typename Scalar = float>
class GibbsSampler {
 public:
  explicit GibbsSampler(const BoltzmannMachine<Scalar>& m) : machine_(&m) {
    m.validate();
    const auto& g = *m.graph;
    const int n = g.num_nodes();
    offsets_.resize(n + 1);
    offsets_[0] = 0;
    for (int i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + g.degree(i);
    adj_.resize(offsets_[n]);
    w_.resize(offsets_[n]);
    for (int i = 0; i < n; ++i) {
      const auto nb = g.neighbors(i);
      const auto ie = g.incident_edges(i);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        adj_[offsets_[i] + k] = nb[k];
        w_[offsets_[i] + k] = m.weights[ie[k]];
      }
    }
    bias_.assign(m.biases.data(), m.biases.data() + n);
    coupling_.assign(n, Scalar(0));
    link_.assign(n, -1);
    for (int i = 0; i < n; ++i)
      if (const int k = g.input_link(i); k >= 0) {
        link_[i] = k;
        coupling_[i] = m.input_coupling[k];
      }
    for (int c = 0; c < 2; ++c) blocks_[c] = g.block(c);
    two_beta_ = Scalar(2) * m.beta;
  }

  const BoltzmannMachine<Scalar>& machine() const { return *machine_; }

  void check(const ChainBatch& b) const {
    const auto& g = *machine_->graph;
    if (b.states.cols() != g.num_nodes() || b.clamped.cols() != g.num_nodes() ||
        b.inputs.cols() != g.num_visible() || b.clamped.rows() != b.states.rows() ||
        b.inputs.rows() != b.states.rows())
      throw std::invalid_argument("chain batch does not match the machine's graph");
  }

  /// Advances every chain by one sweep; returns the number of node updates.
  long sweep(ChainBatch& b, int threads = 1) const {
    check(b);
    const CounterRng rng(b.seed);
    const auto k = static_cast<std::uint64_t>(b.sweep_index);
    std::vector<long> counts(static_cast<std::size_t>(b.num_chains()), 0);
    parallel_for(0, b.num_chains(), threads, [&](long c) { counts[c] = sweep_chain(b, rng, k, c); });
    ++b.sweep_index;
    long total = 0;
    for (long v : counts) total += v;
    return total;
  }

  long sweep_chain(ChainBatch& b, const CounterRng& rng, std::uint64_t k, long c) const {
    Spin* x = b.states.row(c).data();
    const Spin* in = b.inputs.row(c).data();
    const std::uint8_t* frozen = b.clamped.row(c).data();
    const std::uint64_t base = rng.bits(k, static_cast<std::uint64_t>(c));
    long updates = 0;
    for (const auto& block : blocks_) {
      for (const int i : block) {
        if (frozen[i]) continue;
        Scalar f = bias_[i];
        for (int e = offsets_[i]; e < offsets_[i + 1]; ++e) f += w_[e] * Scalar(x[adj_[e]]);
        if (link_[i] >= 0) f += coupling_[i] * Scalar(in[link_[i]]);
        const Scalar p = sigmoid(two_beta_ * f);
        const double u = static_cast<double>(CounterRng::mix(base ^ (0x2545f4914f6cdd1dULL * (i + 1))) >> 11) * 0x1.0p-53;
        x[i] = u < static_cast<double>(p) ? Spin{1} : Spin{-1};
        ++updates;
      }
    }
    return updates;
  }

 private:
  const BoltzmannMachine<Scalar>* machine_;
  std::vector<int> offsets_;
  std::vector<int> adj_;
  std::vector<Scalar> w_;
  std::vector<Scalar> bias_;
  std::vector<Scalar> coupling_;
  std::vector<int> link_;
  std::vector<int> blocks_[2];
  Scalar two_beta_;
};

/// One sweep over a batch (builds a kernel; use GibbsSampler directly in loops).
template <typename Scalar>
ChainBatch& sweep(const BoltzmannMachine<Scalar>& m, ChainBatch& batch, int threads = 1) {
  GibbsSampler<Scalar>(m).sweep(batch, threads);
  return batch;
}

struct SampleTrace {
  int num_chains = 0;
  int num_nodes = 0;
  std::vector<long> sweep_stamps;  // sweep count at which each frame was taken
  std::vector<SpinMatrix> frames;  // each chains x nodes
  SpinMatrix final_states;
  long node_updates = 0;
  double seconds = 0.0;

  double updates_per_second() const { return seconds > 0 ? node_updates / seconds : 0.0; }
};

/// Runs cfg.sweeps sweeps from the given batch, recording every record_every sweeps.
template <typename Scalar>
SampleTrace run(const BoltzmannMachine<Scalar>& m, ChainBatch batch, const SamplerConfig& cfg) {
  cfg.validate();
  const GibbsSampler<Scalar> sampler(m);
  sampler.check(batch);
  SampleTrace trace;
  trace.num_chains = batch.num_chains();
  trace.num_nodes = m.num_nodes();
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 1; k <= cfg.sweeps; ++k) {
    trace.node_updates += sampler.sweep(batch, cfg.threads);
    if (cfg.record_every > 0 && k % cfg.record_every == 0) {
      trace.frames.push_back(batch.states);
      trace.sweep_stamps.push_back(k);
    }
  }
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (cfg.record_every == 0) {
    trace.frames.push_back(batch.states);
    trace.sweep_stamps.push_back(cfg.sweeps);
  }
  trace.final_states = std::move(batch.states);
  return trace;
}

/// Runs from a shared initial state, or from fair coins (inputs +1) when init is empty.
template <typename Scalar>
SampleTrace run(const BoltzmannMachine<Scalar>& m, const std::optional<SpinState>& init,
                const SamplerConfig& cfg) {
  cfg.validate();
  if (init) {
    check_state(m, *init);
    return run(m, ChainBatch::replicate(*init, cfg.chains, cfg.seed), cfg);
  }
  return run(m, ChainBatch::random(*m.graph, cfg.chains, cfg.seed), cfg);
}

struct Moments {
  Eigen::VectorXd means;              // <x_i>
  Eigen::VectorXd edge_correlations;  // <x_u x_v> per edge
  long samples = 0;
};

/// Streaming sums of node and edge spin products.
struct MomentSums {
  Eigen::VectorXd node;
  Eigen::VectorXd edge;
  long count = 0;

  explicit MomentSums(const GridGraph& g) : node(Eigen::VectorXd::Zero(g.num_nodes())), edge(Eigen::VectorXd::Zero(g.num_edges())) {}

  void add(const SpinMatrix& states, const GridGraph& g) {
    const auto& edges = g.edges();
    for (Eigen::Index c = 0; c < states.rows(); ++c) {
      const Spin* x = states.row(c).data();
      for (Eigen::Index i = 0; i < states.cols(); ++i) node[i] += x[i];
      for (std::size_t e = 0; e < edges.size(); ++e) edge[e] += x[edges[e].u] * x[edges[e].v];
    }
    count += states.rows();
  }

  Moments mean() const {
    if (count == 0) throw std::invalid_argument("no samples retained for moment estimate");
    return {node / static_cast<double>(count), edge / static_cast<double>(count), count};
  }
};

/// Sample means of x_i and x_u x_v over frames recorded after burn_in sweeps.
Moments estimate_moments(const SampleTrace& trace, const GridGraph& g, long burn_in);

}  // namespace dtm
