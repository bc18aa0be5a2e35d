#include <doctest.h>

#include <cmath>
#include <limits>

#include "dtm/boltzmann.hpp"
#include "dtm/rng.hpp"
#include "support/enumeration.hpp"

using namespace dtm;

namespace {

std::shared_ptr<const GridGraph> ring_graph(int n_visible = 0) {
  // 2x2 grid with rule (0,1): the 4-cycle 0-1-3-2.
  return std::make_shared<const GridGraph>(build_grid(2, custom_pattern({{0, 1}}, "line"), n_visible, 0, 0));
}

BoltzmannMachine<double> random_machine(std::shared_ptr<const GridGraph> g, std::uint64_t seed, double scale) {
  BoltzmannMachine<double> m(std::move(g));
  const CounterRng rng(seed);
  for (Eigen::Index e = 0; e < m.weights.size(); ++e) m.weights[e] = scale * rng.normal(1, e);
  for (Eigen::Index i = 0; i < m.biases.size(); ++i) m.biases[i] = scale * rng.normal(2, i);
  for (Eigen::Index k = 0; k < m.input_coupling.size(); ++k) m.input_coupling[k] = std::abs(rng.normal(3, k));
  return m;
}

SpinState random_state(const GridGraph& g, std::uint64_t seed) {
  SpinState s(g);
  const CounterRng rng(seed);
  for (int i = 0; i < g.num_nodes(); ++i) s.values[i] = (rng.bits(0, i) >> 63) ? 1 : -1;
  for (int k = 0; k < g.num_visible(); ++k) s.inputs[k] = (rng.bits(1, k) >> 63) ? 1 : -1;
  return s;
}

}  // namespace

TEST_CASE("zero parameters give zero energy") {
  const auto g = std::make_shared<const GridGraph>(build_grid(4, build_pattern("G8"), 5, 0, 1));
  BoltzmannMachine<float> m(g);
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(energy(m, random_state(*g, seed)) == 0.0);
}

TEST_CASE("single edge J=1 at (+1,+1) has energy -1") {
  const auto g = ring_graph();
  BoltzmannMachine<double> m(g);
  m.weights[0] = 1.0;
  SpinState s(*g, 1);
  CHECK(energy(m, s) == doctest::Approx(-1.0));
}

TEST_CASE("energy matches the naive pair-loop oracle") {
  const auto g = std::make_shared<const GridGraph>(build_grid(3, build_pattern("G8"), 4, 2, 3));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto m = random_machine(g, seed, 0.7);
    m.beta = 0.5 + 0.1 * static_cast<double>(seed);
    const auto s = random_state(*g, seed + 100);
    const double oracle_e = oracle::naive_energy(m, s.values.cast<double>(), s.inputs.cast<double>());
    CHECK(energy(m, s) == doctest::Approx(oracle_e).epsilon(1e-12));
  }
}

TEST_CASE("local field examples") {
  SUBCASE("isolated node") {
    const auto g = std::make_shared<const GridGraph>(build_grid(1, build_pattern("G8"), 0, 0, 0));
    BoltzmannMachine<double> m(g);
    m.biases[0] = 0.25;
    CHECK(local_field(m, SpinState(*g), 0) == doctest::Approx(0.25));
  }
  SUBCASE("one neighbor") {
    const auto g = ring_graph();
    BoltzmannMachine<double> m(g);
    const int u = g->edges()[0].u;
    m.weights[0] = 0.5;
    m.biases[u] = 0.25;
    CHECK(local_field(m, SpinState(*g, 1), u) == doctest::Approx(0.75));
  }
  SUBCASE("coupling only") {
    const auto g = std::make_shared<const GridGraph>(build_grid(1, build_pattern("G8"), 1, 0, 0));
    BoltzmannMachine<double> m(g);
    m.input_coupling[0] = 2.0 / 2.0;  // Gamma = 2
    SpinState s(*g);
    s.inputs[0] = -1;
    CHECK(local_field(m, s, 0) == doctest::Approx(-1.0));
  }
  SUBCASE("bad node id") {
    const auto g = ring_graph();
    BoltzmannMachine<double> m(g);
    CHECK_THROWS_AS(local_field(m, SpinState(*g), 4), std::out_of_range);
  }
}

TEST_CASE("flip probability examples") {
  const auto g = ring_graph();
  BoltzmannMachine<double> m(g);
  CHECK(flip_probability(m, 0.0) == doctest::Approx(0.5));
  CHECK(flip_probability(m, 0.75) == doctest::Approx(0.817574).epsilon(1e-6));
  CHECK(flip_probability(m, std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(flip_probability(m, 1e6) == 1.0);
  CHECK(flip_probability(m, -1e6) == 0.0);
  CHECK_FALSE(std::isnan(flip_probability(m, -std::numeric_limits<double>::infinity())));
}

TEST_CASE("flip probability equals the enumerated conditional") {
  const auto g = ring_graph();
  BoltzmannMachine<double> m(g);
  m.weights[0] = 0.5;
  m.weights[1] = -0.3;
  m.biases[0] = 0.25;
  // P(x_0 = +1 | all other nodes +1) from the enumerated joint.
  const auto p = oracle::distribution(m, SpinVector(0));
  double up = 0, total = 0;
  for (const auto& [code, w] : p) {
    if ((code | 1u) != 0xFu) continue;
    total += w;
    if (oracle::spin_of(code, 0) == 1) up += w;
  }
  SpinState s(*g, 1);
  CHECK(flip_probability(m, local_field(m, s, 0)) == doctest::Approx(up / total).epsilon(1e-12));
}

TEST_CASE("detailed balance: flip ratios equal Boltzmann ratios") {
  const auto g = std::make_shared<const GridGraph>(build_grid(3, build_pattern("G8"), 3, 0, 4));
  auto m = random_machine(g, 11, 0.8);
  m.beta = 1.3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = random_state(*g, seed);
    for (int i = 0; i < g->num_nodes(); ++i) {
      SpinState up = s, down = s;
      up.values[i] = 1;
      down.values[i] = -1;
      const double p_up = flip_probability(m, local_field(m, s, i));
      const double lhs = std::log(p_up / (1.0 - p_up));
      const double rhs = energy(m, down) - energy(m, up);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("energy is invariant to edge summation order") {
  const auto g = std::make_shared<const GridGraph>(build_grid(6, build_pattern("G12"), 10, 0, 8));
  const auto m = random_machine(g, 3, 1.0);
  const auto s = random_state(*g, 4);
  double reverse_sum = 0.0;
  const auto& edges = g->edges();
  for (auto e = static_cast<long>(edges.size()) - 1; e >= 0; --e)
    reverse_sum += m.weights[e] * s.values[edges[e].u] * s.values[edges[e].v];
  double field = 0.0;
  for (int i = 0; i < g->num_nodes(); ++i) field += m.biases[i] * s.values[i];
  for (int k = 0; k < g->num_visible(); ++k) field += m.input_coupling[k] * s.values[g->visible_nodes()[k]] * s.inputs[k];
  CHECK(energy(m, s) == doctest::Approx(-(reverse_sum + field)).epsilon(1e-10));
}

TEST_CASE("parameter and state validation") {
  const auto g = ring_graph(1);
  BoltzmannMachine<float> m(g);
  m.beta = 0.0f;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.beta = 1.0f;
  m.input_coupling[0] = -1.0f;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.input_coupling[0] = 0.0f;
  SpinState s(*g);
  s.values.resize(3);
  CHECK_THROWS_AS(energy(m, s), std::invalid_argument);
}

TEST_CASE("initialization: small uniform weights, zero biases, deterministic") {
  const auto g = std::make_shared<const GridGraph>(build_grid(5, build_pattern("G8"), 4, 0, 0));
  const auto a = init_machine<float>(g, 9);
  const auto b = init_machine<float>(g, 9);
  CHECK(a.weights == b.weights);
  CHECK(a.weights.cwiseAbs().maxCoeff() <= 0.01f);
  CHECK(a.weights.cwiseAbs().maxCoeff() > 0.0f);
  CHECK(a.biases.isZero());
}
