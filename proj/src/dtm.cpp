#include "dtm/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dtm/gibbs.hpp"
#include "dtm/parallel.hpp"
#include "dtm/rng.hpp"

namespace dtm {

namespace {

enum SeedTag : std::uint64_t {
  kTagModelInit = 0x6d6f64656c,
  kTagShuffle = 0x73687566,
  kTagNoisePrev = 0x6e707276,
  kTagNoiseCur = 0x6e637572,
  kTagGradient = 0x67726164,
  kTagProbe = 0x70726f62,
  kTagProbeRows = 0x70726f77,
  kTagProjection = 0x6f627376,
  kTagPositive = 0x706f73,
  kTagNegative = 0x6e6567,
  kTagGenerate = 0x67656e,
};

std::uint64_t key(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0) {
  return derive_seed(derive_seed(seed, tag, a), tag, b);
}

struct PhaseRun {
  PhaseMoments moments;
  Eigen::MatrixXd chain_means;  // chains x nodes, filled when requested
  SpinMatrix final_states;
};

/// Runs k sweeps and averages node/edge statistics over sweeps after burn_in.
/// A batch with every node clamped is read once without sweeping.
PhaseRun run_phase(const GibbsSampler<float>& sampler, const GridGraph& g, ChainBatch batch, int k, int burn_in,
                   bool per_chain, int threads) {
  const Eigen::Index chains = batch.states.rows();
  const int n = g.num_nodes();
  const auto& edges = g.edges();
  const bool any_free = (batch.clamped.array() == 0).any();
  const int sweeps = any_free ? k : 0;
  const int retained = any_free ? k - burn_in : 1;

  std::vector<std::int64_t> node_sum(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> edge_sum(edges.size(), 0);
  Eigen::MatrixXi chain_sum;
  if (per_chain) chain_sum = Eigen::MatrixXi::Zero(chains, n);

  auto accumulate = [&]() {
    for (Eigen::Index c = 0; c < chains; ++c) {
      const Spin* x = batch.states.row(c).data();
      for (int i = 0; i < n; ++i) node_sum[i] += x[i];
      for (std::size_t e = 0; e < edges.size(); ++e) edge_sum[e] += x[edges[e].u] * x[edges[e].v];
      if (per_chain)
        for (int i = 0; i < n; ++i) chain_sum(c, i) += x[i];
    }
  };

  if (!any_free) {
    accumulate();
  } else {
    for (int s = 1; s <= sweeps; ++s) {
      sampler.sweep(batch, threads);
      if (s > burn_in) accumulate();
    }
  }

  PhaseRun out;
  const double denom = static_cast<double>(chains) * retained;
  out.moments.node = Eigen::Map<const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>>(node_sum.data(), n)
                         .cast<double>() / denom;
  out.moments.edge =
      Eigen::Map<const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>>(edge_sum.data(),
                                                                        static_cast<Eigen::Index>(edges.size()))
          .cast<double>() / denom;
  out.moments.chain_sweeps = static_cast<long>(chains) * sweeps;
  if (per_chain) out.chain_means = chain_sum.cast<double>() / static_cast<double>(retained);
  out.final_states = std::move(batch.states);
  return out;
}

void check_pairs(const BoltzmannMachine<float>& m, const SpinMatrix& prev, const SpinMatrix& cur) {
  if (cur.rows() == 0) throw std::invalid_argument("empty minibatch");
  if (prev.rows() != cur.rows()) throw std::invalid_argument("x^{t-1} and x^t row counts differ");
  if (prev.cols() != m.num_visible() || cur.cols() != m.num_visible())
    throw std::invalid_argument("minibatch width does not match visible node count");
}

void check_couplings(const BoltzmannMachine<float>& m) {
  if (m.input_coupling.size() != m.num_visible())
    throw std::invalid_argument("step model has no input couplings installed");
}

void check_options(const GradientOptions& o) {
  if (o.k_grad < 1) throw std::invalid_argument("K_grad must be >= 1");
  if (o.burn_in < 0 || o.burn_in >= o.k_grad) throw std::invalid_argument("burn_in must lie in [0, K_grad)");
  if (o.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
}

/// Negative phase: inputs clamped to x^t, replicas chains per row, grouped row-major.
PhaseRun negative_phase(const GibbsSampler<float>& sampler, const GridGraph& g, const SpinMatrix& cur,
                        const GradientOptions& o, std::uint64_t seed, const SpinMatrix* init) {
  const Eigen::Index b = cur.rows();
  ChainBatch batch;
  batch.seed = derive_seed(seed, kTagNegative);
  batch.inputs.resize(b * o.replicas, cur.cols());
  for (Eigen::Index r = 0; r < b; ++r)
    for (int k = 0; k < o.replicas; ++k) batch.inputs.row(r * o.replicas + k) = cur.row(r);
  batch.clamped = MaskMatrix::Zero(b * o.replicas, g.num_nodes());
  batch.states.resize(b * o.replicas, g.num_nodes());
  batch.randomize_free();
  if (init && init->rows() == batch.states.rows() && init->cols() == batch.states.cols()) batch.states = *init;
  return run_phase(sampler, g, std::move(batch), o.k_grad, o.burn_in, o.with_tc, o.threads);
}

/// Cross-replica estimate of m_u m_v per condition, averaged over conditions.
/// With R >= 2 the product uses distinct replicas only, so it is unbiased.
Eigen::VectorXd factorized_edges(const GridGraph& g, const Eigen::MatrixXd& chain_means, int replicas) {
  const auto& edges = g.edges();
  const Eigen::Index conditions = chain_means.rows() / replicas;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(edges.size()));
  for (Eigen::Index c = 0; c < conditions; ++c) {
    const auto block = chain_means.middleRows(c * replicas, replicas);
    const Eigen::RowVectorXd sum = block.colwise().sum();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const int u = edges[e].u;
      const int v = edges[e].v;
      if (replicas >= 2) {
        const double same = block.col(u).dot(block.col(v));
        out[static_cast<Eigen::Index>(e)] += (sum[u] * sum[v] - same) / (replicas * (replicas - 1.0));
      } else {
        out[static_cast<Eigen::Index>(e)] += sum[u] * sum[v];
      }
    }
  }
  return out / static_cast<double>(conditions);
}

Gradient tc_from(const BoltzmannMachine<float>& m, const Eigen::VectorXd& factorized, const PhaseMoments& neg) {
  Gradient g;
  g.dJ = -static_cast<double>(m.beta) * (factorized - neg.edge);
  g.dh = Eigen::VectorXd::Zero(m.num_nodes());
  return g;
}

}  // namespace

DtmModel DtmModel::create(std::shared_ptr<const GridGraph> graph, const NoiseSchedule& schedule,
                          std::uint64_t seed, double init_scale, float beta) {
  if (!graph) throw std::invalid_argument("model needs a graph");
  schedule.validate();
  DtmModel model;
  model.graph = std::move(graph);
  model.schedule = schedule;
  for (int t = 1; t <= schedule.steps; ++t)
    model.steps.push_back(init_machine<float>(model.graph, derive_seed(seed, kTagModelInit, t), init_scale, beta));
  model.install_couplings();
  return model;
}

void DtmModel::install_couplings() {
  for (int t = 1; t <= num_steps(); ++t)
    step(t).input_coupling = coupling_for_step(schedule, t, graph->num_pixels(), graph->num_labels()).cast<float>();
}

void DtmModel::validate() const {
  if (!graph) throw std::invalid_argument("model has no graph");
  schedule.validate();
  if (num_steps() != schedule.steps) throw std::invalid_argument("step model count must equal schedule steps");
  for (const auto& m : steps) {
    if (m.graph != graph) throw std::invalid_argument("all step models must share one graph");
    m.validate();
  }
}

NoiseSchedule mebm_schedule() { return NoiseSchedule::uniform(1, 50.0, 50.0); }

void AcpConfig::validate() const {
  if (!(epsilon > 0) || !(delta > 0) || !(lambda_min > 0)) throw std::invalid_argument("ACP constants must be positive");
  if (probe_interval < 1 || probe_conditions < 1 || probe_chains < 1 || probe_span < 1)
    throw std::invalid_argument("ACP probe sizes must be >= 1");
}

void TrainConfig::validate(int steps) const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (k_grad < 1) throw std::invalid_argument("K_grad must be >= 1");
  if (burn_in < 0 || burn_in >= k_grad) throw std::invalid_argument("burn_in must lie in [0, K_grad)");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (lambda_init.size() != 1 && static_cast<int>(lambda_init.size()) != steps)
    throw std::invalid_argument("lambda_init needs one value or one per step");
  for (double l : lambda_init)
    if (l < 0) throw std::invalid_argument("lambda_init must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0))
    throw std::invalid_argument("adam moments must lie in [0, 1)");
  acp.validate();
}

double TrainConfig::initial_lambda(int t) const {
  return lambda_init.size() == 1 ? lambda_init[0] : lambda_init.at(static_cast<std::size_t>(t - 1));
}

AcpState AcpState::initial(const TrainConfig& cfg, int steps) {
  AcpState s;
  for (int t = 1; t <= steps; ++t) s.lambda.push_back(cfg.initial_lambda(t));
  s.last_autocorr.assign(static_cast<std::size_t>(steps), std::nullopt);
  return s;
}

void acp_update(AcpState& state, int t, double a_m, const AcpConfig& cfg) {
  if (t < 1 || t > static_cast<int>(state.lambda.size())) throw std::out_of_range("ACP step out of range");
  auto& lambda = state.lambda[static_cast<std::size_t>(t - 1)];
  auto& last = state.last_autocorr[static_cast<std::size_t>(t - 1)];
  const double base = std::max(cfg.lambda_min, lambda);
  if (a_m < cfg.epsilon)
    lambda = (1.0 - cfg.delta) * base;
  else if (!last || a_m <= *last)
    lambda = base;
  else
    lambda = (1.0 + cfg.delta) * base;
  if (lambda < cfg.lambda_min) lambda = 0.0;
  last = a_m;
}

GradientResult grad_step(const BoltzmannMachine<float>& m, const SpinMatrix& prev, const SpinMatrix& cur,
                         const GradientOptions& opts, std::uint64_t seed, const SpinMatrix* negative_init) {
  check_options(opts);
  m.validate();
  check_couplings(m);
  check_pairs(m, prev, cur);
  const auto& g = *m.graph;
  const GibbsSampler<float> sampler(m);

  ChainBatch pos;
  pos.seed = derive_seed(seed, kTagPositive);
  pos.inputs = cur;
  pos.clamped = MaskMatrix::Zero(cur.rows(), g.num_nodes());
  pos.states.resize(cur.rows(), g.num_nodes());
  const auto& vis = g.visible_nodes();
  for (std::size_t k = 0; k < vis.size(); ++k) pos.clamped.col(vis[k]).setOnes();
  pos.randomize_free();
  for (std::size_t k = 0; k < vis.size(); ++k) pos.states.col(vis[k]) = prev.col(static_cast<Eigen::Index>(k));
  const auto positive = run_phase(sampler, g, std::move(pos), opts.k_grad, opts.burn_in, false, opts.threads);
  const auto negative = negative_phase(sampler, g, cur, opts, seed, negative_init);

  GradientResult res;
  res.positive = positive.moments;
  res.negative = negative.moments;
  const double beta = m.beta;
  res.denoise.dJ = -beta * (positive.moments.edge - negative.moments.edge);
  res.denoise.dh = -beta * (positive.moments.node - negative.moments.node);
  if (opts.with_tc) {
    res.factorized_edge = factorized_edges(g, negative.chain_means, opts.replicas);
    res.tc = tc_from(m, res.factorized_edge, negative.moments);
  }
  res.negative_final = negative.final_states;
  res.chain_sweeps = positive.moments.chain_sweeps + negative.moments.chain_sweeps;
  return res;
}

GradientResult tc_grad(const BoltzmannMachine<float>& m, const SpinMatrix& cur, const GradientOptions& opts,
                       std::uint64_t seed) {
  GradientOptions o = opts;
  o.with_tc = true;
  check_options(o);
  m.validate();
  check_couplings(m);
  if (cur.rows() == 0) throw std::invalid_argument("empty minibatch");
  if (cur.cols() != m.num_visible()) throw std::invalid_argument("minibatch width does not match visible node count");
  const GibbsSampler<float> sampler(m);
  const auto negative = negative_phase(sampler, *m.graph, cur, o, seed, nullptr);
  GradientResult res;
  res.negative = negative.moments;
  res.factorized_edge = factorized_edges(*m.graph, negative.chain_means, o.replicas);
  res.tc = tc_from(m, res.factorized_edge, negative.moments);
  res.negative_final = negative.final_states;
  res.chain_sweeps = negative.moments.chain_sweeps;
  return res;
}

double probe_autocorrelation(const BoltzmannMachine<float>& m, const SpinMatrix& conditions,
                             int chains_per_condition, int k_grad, int burn_in, int span,
                             const ProjectionObservable& obs, std::uint64_t seed, int threads) {
  if (conditions.rows() == 0 || chains_per_condition < 1) throw std::invalid_argument("probe needs chains");
  if (k_grad < 1 || burn_in < 0 || span < 1) throw std::invalid_argument("probe lag and span must be positive");
  const auto& g = *m.graph;
  if (conditions.cols() != g.num_visible()) throw std::invalid_argument("probe inputs do not match visible count");
  if (obs.inputs() != g.num_visible()) throw std::invalid_argument("observable width does not match visible count");
  const Eigen::Index chains = conditions.rows() * chains_per_condition;
  ChainBatch batch;
  batch.seed = derive_seed(seed, kTagProbe);
  batch.inputs.resize(chains, g.num_visible());
  std::vector<int> groups(static_cast<std::size_t>(chains));
  for (Eigen::Index c = 0; c < chains; ++c) {
    batch.inputs.row(c) = conditions.row(c / chains_per_condition);
    groups[static_cast<std::size_t>(c)] = static_cast<int>(c / chains_per_condition);
  }
  batch.clamped = MaskMatrix::Zero(chains, g.num_nodes());
  batch.states.resize(chains, g.num_nodes());
  batch.randomize_free();
  const GibbsSampler<float> sampler(m);
  for (int s = 0; s < burn_in; ++s) sampler.sweep(batch, threads);

  const int frames = span * k_grad + 1;
  ProjectedSeries series(static_cast<std::size_t>(chains), Eigen::MatrixXd(frames, obs.dims()));
  const auto& vis = g.visible_nodes();
  Eigen::VectorXd x(static_cast<Eigen::Index>(vis.size()));
  auto record = [&](int f) {
    for (Eigen::Index c = 0; c < chains; ++c) {
      for (std::size_t k = 0; k < vis.size(); ++k) x[static_cast<Eigen::Index>(k)] = batch.states(c, vis[k]);
      series[static_cast<std::size_t>(c)].row(f) = (obs.A * x).transpose();
    }
  };
  record(0);
  for (int f = 1; f < frames; ++f) {
    sampler.sweep(batch, threads);
    record(f);
  }
  const auto res = autocorrelation(series, {0, k_grad}, groups);
  return res.r[1];
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os.precision(8);
  os << "epoch,step,lambda,autocorr,grad_norm,tc_norm,moment_gap,chain_sweeps,probe_sweeps\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.step << ',' << r.lambda << ',';
    if (r.autocorr) os << *r.autocorr;
    os << ',' << r.grad_norm << ',' << r.tc_norm << ',' << r.moment_gap << ',' << r.chain_sweeps << ','
       << r.probe_sweeps << '\n';
  }
  return os.str();
}

namespace {

void apply_update(BoltzmannMachine<float>& m, const Gradient& g, const TrainConfig& cfg, OptimizerState& opt) {
  if (cfg.optimizer == Optimizer::sgd) {
    m.weights -= (cfg.learning_rate * g.dJ).cast<float>();
    m.biases -= (cfg.learning_rate * g.dh).cast<float>();
    return;
  }
  if (opt.mJ.size() != g.dJ.size()) {
    opt.mJ = opt.vJ = Eigen::VectorXd::Zero(g.dJ.size());
    opt.mh = opt.vh = Eigen::VectorXd::Zero(g.dh.size());
    opt.t = 0;
  }
  ++opt.t;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.t));
  auto step = [&](Eigen::VectorXd& mo, Eigen::VectorXd& vo, const Eigen::VectorXd& grad) {
    mo = b1 * mo + (1 - b1) * grad;
    vo = b2 * vo + (1 - b2) * grad.cwiseAbs2();
    return Eigen::VectorXd(cfg.learning_rate * (mo / c1).array() / ((vo / c2).array().sqrt() + cfg.adam_eps));
  };
  m.weights -= step(opt.mJ, opt.vJ, g.dJ).cast<float>();
  m.biases -= step(opt.mh, opt.vh, g.dh).cast<float>();
}

SpinMatrix gather_rows(const SpinMatrix& data, const std::vector<Eigen::Index>& idx, std::size_t begin,
                       std::size_t end) {
  SpinMatrix out(static_cast<Eigen::Index>(end - begin), data.cols());
  for (std::size_t r = begin; r < end; ++r) out.row(static_cast<Eigen::Index>(r - begin)) = data.row(idx[r]);
  return out;
}

/// x^{t-1} and x^t for one minibatch of clean rows.
std::pair<SpinMatrix, SpinMatrix> noised_pair(const SpinMatrix& x0, const NoiseSchedule& s, int t,
                                              std::uint64_t seed, int n_labels) {
  SpinMatrix prev = t == 1 ? x0 : advance(x0, s, 0, t - 1, derive_seed(seed, kTagNoisePrev), n_labels);
  SpinMatrix cur = advance(prev, s, t - 1, t, derive_seed(seed, kTagNoiseCur), n_labels);
  return {std::move(prev), std::move(cur)};
}

}  // namespace

TrainLog train(DtmModel& model, const SpinMatrix& data, int n_label_columns, const TrainConfig& cfg,
               TrainState* state, const EpochCallback& on_epoch) {
  model.validate();
  const int T = model.num_steps();
  cfg.validate(T);
  if (data.rows() == 0) throw std::invalid_argument("training data is empty");
  if (data.cols() != model.graph->num_visible())
    throw std::invalid_argument("data width " + std::to_string(data.cols()) + " does not match visible count " +
                                std::to_string(model.graph->num_visible()));
  if (n_label_columns != model.graph->num_labels())
    throw std::invalid_argument("label column count does not match the graph's label nodes");
  if (!all_spins(data)) throw std::invalid_argument("training data must be spins in {-1, +1}");

  TrainState local;
  TrainState& st = state ? *state : local;
  if (st.acp.lambda.empty()) st.acp = AcpState::initial(cfg, T);
  if (static_cast<int>(st.acp.lambda.size()) != T) throw std::invalid_argument("ACP state does not match step count");
  st.optimizer.resize(static_cast<std::size_t>(T));

  const auto obs = ProjectionObservable::gaussian(model.graph->num_visible(), derive_seed(cfg.seed, kTagProjection));
  const GradientOptions gopts{cfg.k_grad, cfg.burn_in, cfg.replicas, true, 1};
  const int outer = std::min(std::max(cfg.threads, 1), T);
  const int inner = std::max(1, cfg.threads / outer);
  const auto n = static_cast<std::size_t>(data.rows());
  const std::size_t batches = (n + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size);

  st.persistent.resize(static_cast<std::size_t>(T));
  auto& persistent = st.persistent;
  TrainLog log;
  const int first_epoch = st.epoch + 1;
  const int last_epoch = st.epoch + cfg.epochs;
  for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const CounterRng shuffle(key(cfg.seed, kTagShuffle, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i, i)]);

    std::vector<LogRow> rows(static_cast<std::size_t>(T));
    parallel_for(0, T, outer, [&](long ti) {
      const int t = static_cast<int>(ti) + 1;
      auto& m = model.step(t);
      auto& row = rows[static_cast<std::size_t>(ti)];
      row.epoch = epoch;
      row.step = t;
      GradientOptions o = gopts;
      o.threads = inner;
      const double lambda = st.acp.lambda[static_cast<std::size_t>(ti)];
      o.with_tc = lambda > 0.0;
      for (std::size_t b = 0; b < batches; ++b) {
        const auto x0 = gather_rows(data, order, b * cfg.batch_size, std::min(n, (b + 1) * cfg.batch_size));
        const std::uint64_t bseed = key(cfg.seed, kTagGradient, static_cast<std::uint64_t>(epoch),
                                        (static_cast<std::uint64_t>(b) << 16) | static_cast<std::uint64_t>(t));
        const auto [prev, cur] = noised_pair(x0, model.schedule, t, bseed, n_label_columns);
        const SpinMatrix* init = cfg.persistent ? &persistent[static_cast<std::size_t>(ti)] : nullptr;
        auto res = grad_step(m, prev, cur, o, bseed, init);
        Gradient total = res.denoise;
        if (res.tc) {
          total.dJ += lambda * res.tc->dJ;
          row.tc_norm += res.tc->norm();
        }
        row.grad_norm += res.denoise.norm();
        row.chain_sweeps += res.chain_sweeps;
        double gap = 0.0;
        for (int v : model.graph->visible_nodes()) gap += std::abs(res.positive.node[v] - res.negative.node[v]);
        row.moment_gap = gap / std::max(1, model.graph->num_visible());
        if (cfg.persistent) persistent[static_cast<std::size_t>(ti)] = std::move(res.negative_final);
        apply_update(m, total, cfg, st.optimizer[static_cast<std::size_t>(ti)]);
      }
      row.grad_norm /= static_cast<double>(batches);
      row.tc_norm /= static_cast<double>(batches);

      if (cfg.acp.enabled && epoch % cfg.acp.probe_interval == 0) {
        const auto rows_needed = static_cast<std::size_t>(cfg.acp.probe_conditions);
        std::vector<Eigen::Index> pick(rows_needed);
        const CounterRng pr(key(cfg.seed, kTagProbeRows, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(t)));
        for (std::size_t k = 0; k < rows_needed; ++k) pick[k] = static_cast<Eigen::Index>(pr.below(n, k));
        const auto x0 = gather_rows(data, pick, 0, rows_needed);
        const std::uint64_t pseed = key(cfg.seed, kTagProbe, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(t));
        const auto [prev, cur] = noised_pair(x0, model.schedule, t, pseed, n_label_columns);
        const double a = probe_autocorrelation(m, cur, cfg.acp.probe_chains, cfg.k_grad, cfg.k_grad,
                                               cfg.acp.probe_span, obs, pseed, inner);
        row.autocorr = a;
        row.probe_sweeps = static_cast<long>(cur.rows()) * cfg.acp.probe_chains *
                           (cfg.k_grad + static_cast<long>(cfg.acp.probe_span) * cfg.k_grad);
      }
    });

    for (auto& row : rows) {
      if (row.autocorr) {
        acp_update(st.acp, row.step, *row.autocorr, cfg.acp);
        st.acp.history.push_back({row.epoch, row.step, *row.autocorr, st.acp.lambda[static_cast<std::size_t>(row.step - 1)]});
      }
      row.lambda = st.acp.lambda[static_cast<std::size_t>(row.step - 1)];
      log.gradient_sweeps += row.chain_sweeps;
      log.probe_sweeps += row.probe_sweeps;
      log.rows.push_back(row);
    }
    st.epoch = epoch;
    if (on_epoch) on_epoch(model, st, rows);
  }
  return log;
}

SpinVector condition_code(const GridGraph& g, int label, int classes) {
  if (classes < 1 || g.num_labels() == 0 || g.num_labels() % classes != 0)
    throw std::invalid_argument("label nodes (" + std::to_string(g.num_labels()) +
                                ") are not a whole number of repetitions of " + std::to_string(classes) + " classes");
  if (label < 0 || label >= classes)
    throw std::out_of_range("label " + std::to_string(label) + " outside 0.." + std::to_string(classes - 1));
  SpinVector code = SpinVector::Constant(g.num_labels(), -1);
  const int reps = g.num_labels() / classes;
  code.segment(label * reps, reps).setConstant(1);
  return code;
}

GenerateResult generate(const DtmModel& model, int n_samples, std::uint64_t seed, const GenerateOptions& opts) {
  model.validate();
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (opts.k_mix < 1) throw std::invalid_argument("K_mix must be >= 1");
  const auto& g = *model.graph;
  const int nv = g.num_visible();
  const int np = g.num_pixels();
  if (opts.label_code && opts.label_code->size() != g.num_labels())
    throw std::invalid_argument("label code length does not match label node count");

  GenerateResult out;
  const CounterRng init(derive_seed(seed, kTagGenerate));
  SpinMatrix x(n_samples, nv);
  for (int c = 0; c < n_samples; ++c)
    for (int k = 0; k < nv; ++k) x(c, k) = (init.bits(c, k) >> 63) ? Spin{1} : Spin{-1};
  if (opts.label_code)
    for (int c = 0; c < n_samples; ++c) x.row(c).tail(g.num_labels()) = opts.label_code->transpose();
  if (opts.keep_frames) out.step_frames.push_back(x);

  const auto& vis = g.visible_nodes();
  for (int t = model.num_steps(); t >= 1; --t) {
    const auto& m = model.step(t);
    ChainBatch batch;
    batch.seed = key(seed, kTagGenerate, static_cast<std::uint64_t>(t));
    batch.inputs = x;
    batch.clamped = MaskMatrix::Zero(n_samples, g.num_nodes());
    batch.states.resize(n_samples, g.num_nodes());
    if (opts.label_code)
      for (int k = np; k < nv; ++k) batch.clamped.col(vis[static_cast<std::size_t>(k)]).setOnes();
    batch.randomize_free();
    if (opts.label_code)
      for (int k = np; k < nv; ++k)
        batch.states.col(vis[static_cast<std::size_t>(k)]).setConstant((*opts.label_code)[k - np]);
    const GibbsSampler<float> sampler(m);
    for (int s = 0; s < opts.k_mix; ++s) out.node_updates += sampler.sweep(batch, opts.threads);
    out.chain_sweeps += static_cast<long>(n_samples) * opts.k_mix;
    for (int k = 0; k < nv; ++k) x.col(k) = batch.states.col(vis[static_cast<std::size_t>(k)]);
    if (opts.keep_frames) out.step_frames.push_back(x);
  }
  out.samples = std::move(x);
  return out;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == Optimizer::sgd ? "sgd" : "adam"},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"k_grad", c.k_grad},
          {"burn_in", c.burn_in},
          {"replicas", c.replicas},
          {"lambda_init", c.lambda_init},
          {"persistent", c.persistent},
          {"seed", c.seed},
          {"acp",
           {{"enabled", c.acp.enabled},
            {"epsilon", c.acp.epsilon},
            {"delta", c.acp.delta},
            {"lambda_min", c.acp.lambda_min},
            {"probe_interval", c.acp.probe_interval},
            {"probe_conditions", c.acp.probe_conditions},
            {"probe_chains", c.acp.probe_chains},
            {"probe_span", c.acp.probe_span}}}};
}

nlohmann::json acp_state_to_json(const AcpState& s) {
  nlohmann::json last = nlohmann::json::array();
  for (const auto& a : s.last_autocorr) last.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : s.history) hist.push_back({h.epoch, h.step, h.autocorr, h.lambda});
  return {{"lambda", s.lambda}, {"last_autocorr", last}, {"history", hist}};
}

AcpState acp_state_from_json(const nlohmann::json& j) {
  AcpState s;
  s.lambda = j.at("lambda").get<std::vector<double>>();
  for (const auto& a : j.at("last_autocorr"))
    s.last_autocorr.push_back(a.is_null() ? std::nullopt : std::optional<double>(a.get<double>()));
  if (s.last_autocorr.size() != s.lambda.size()) throw std::runtime_error("ACP state arrays differ in length");
  for (const auto& h : j.value("history", nlohmann::json::array()))
    s.history.push_back({h.at(0).get<int>(), h.at(1).get<int>(), h.at(2).get<double>(), h.at(3).get<double>()});
  return s;
}

}  // namespace dtm
