#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "dtm/grid_graph.hpp"
#include "dtm/rng.hpp"
#include "dtm/spin.hpp"

namespace dtm {

/// Boltzmann machine on a grid graph with clamped companion inputs.
///
/// Energy (single count per undirected edge):
///   E(x) = -beta * ( sum_edges J_e x_u x_v + sum_i h_i x_i + sum_vis c_k x_k input_k )
/// where c_k = Gamma_k / 2 is the forward-process coupling to input k. The
/// coupling favors agreement between a visible node and its input.
template <typename Scalar = float>
struct BoltzmannMachine {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::shared_ptr<const GridGraph> graph;
  Vector weights;         // one per edge, graph->edges() order
  Vector biases;          // one per node
  Vector input_coupling;  // one per visible node (Gamma / 2)
  Scalar beta = Scalar(1);

  BoltzmannMachine() = default;

  explicit BoltzmannMachine(std::shared_ptr<const GridGraph> g, Scalar beta_ = Scalar(1))
      : graph(std::move(g)),
        weights(Vector::Zero(graph->num_edges())),
        biases(Vector::Zero(graph->num_nodes())),
        input_coupling(Vector::Zero(graph->num_visible())),
        beta(beta_) {
    validate();
  }

  int num_nodes() const { return graph->num_nodes(); }
  int num_edges() const { return graph->num_edges(); }
  int num_visible() const { return graph->num_visible(); }

  void validate() const {
    if (!graph) throw std::invalid_argument("Boltzmann machine has no graph");
    if (!(beta > Scalar(0))) throw std::invalid_argument("beta must be > 0");
    if (weights.size() != graph->num_edges())
      throw std::invalid_argument("weight count does not match edge count");
    if (biases.size() != graph->num_nodes())
      throw std::invalid_argument("bias count does not match node count");
    if (input_coupling.size() != graph->num_visible())
      throw std::invalid_argument("input coupling count does not match visible count");
    if ((input_coupling.array() < Scalar(0)).any())
      throw std::invalid_argument("input coupling must be >= 0");
  }

  template <typename Other>
  BoltzmannMachine<Other> cast() const {
    BoltzmannMachine<Other> m;
    m.graph = graph;
    m.weights = weights.template cast<Other>();
    m.biases = biases.template cast<Other>();
    m.input_coupling = input_coupling.template cast<Other>();
    m.beta = static_cast<Other>(beta);
    return m;
  }
};

/// Small uniform weights, zero biases: an easy-to-sample starting landscape.
template <typename Scalar = float>
BoltzmannMachine<Scalar> init_machine(std::shared_ptr<const GridGraph> g, std::uint64_t seed,
                                      double scale = 1.0, Scalar beta = Scalar(1)) {
  BoltzmannMachine<Scalar> m(std::move(g), beta);
  const CounterRng rng(derive_seed(seed, 0x696e6974));
  for (Eigen::Index e = 0; e < m.weights.size(); ++e)
    m.weights[e] = static_cast<Scalar>((2.0 * rng.uniform(e) - 1.0) * 0.01 * scale);
  return m;
}

/// Spin configuration of one machine: node values, clamped inputs, clamp flags.
struct SpinState {
  SpinVector values;
  SpinVector inputs;
  MaskVector clamped;

  SpinState() = default;
  explicit SpinState(const GridGraph& g, Spin fill = 1)
      : values(SpinVector::Constant(g.num_nodes(), fill)),
        inputs(SpinVector::Constant(g.num_visible(), 1)),
        clamped(MaskVector::Zero(g.num_nodes())) {}
};

template <typename Scalar>
void check_state(const BoltzmannMachine<Scalar>& m, const SpinState& s) {
  if (s.values.size() != m.num_nodes() || s.clamped.size() != m.num_nodes())
    throw std::invalid_argument("state size does not match graph node count");
  if (s.inputs.size() != m.num_visible())
    throw std::invalid_argument("input size does not match visible count");
}

/// Energy of a configuration, accumulated in double.
template <typename Scalar>
double energy(const BoltzmannMachine<Scalar>& m, const SpinState& s) {
  check_state(m, s);
  const auto& g = *m.graph;
  double pair = 0.0;
  const auto& edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    pair += static_cast<double>(m.weights[e]) * s.values[edges[e].u] * s.values[edges[e].v];
  double field = 0.0;
  for (int i = 0; i < g.num_nodes(); ++i) field += static_cast<double>(m.biases[i]) * s.values[i];
  double coupling = 0.0;
  const auto& vis = g.visible_nodes();
  for (std::size_t k = 0; k < vis.size(); ++k)
    coupling += static_cast<double>(m.input_coupling[k]) * s.values[vis[k]] * s.inputs[k];
  return -static_cast<double>(m.beta) * (pair + field + coupling);
}

/// f_i = sum_j J_ij x_j + h_i (+ c_k input_k if i is visible).
template <typename Scalar>
Scalar local_field(const BoltzmannMachine<Scalar>& m, const SpinState& s, int i) {
  check_state(m, s);
  const auto& g = *m.graph;
  if (i < 0 || i >= g.num_nodes())
    throw std::out_of_range("node id " + std::to_string(i) + " out of range");
  Scalar f = m.biases[i];
  const auto nb = g.neighbors(i);
  const auto ie = g.incident_edges(i);
  for (std::size_t k = 0; k < nb.size(); ++k) f += m.weights[ie[k]] * Scalar(s.values[nb[k]]);
  if (const int link = g.input_link(i); link >= 0) f += m.input_coupling[link] * Scalar(s.inputs[link]);
  return f;
}

/// Numerically safe logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Probability that a node with the given local field takes +1: sigma(2 beta f).
template <typename Scalar>
Scalar flip_probability(const BoltzmannMachine<Scalar>& m, Scalar field) {
  return sigmoid(Scalar(2) * m.beta * field);
}

}  // namespace dtm
