#include "dtm/grid_graph.hpp"

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dtm/binary_io.hpp"
#include "dtm/rng.hpp"

namespace dtm {

namespace {

constexpr std::uint32_t kGraphVersion = 1;

void validate_rule(const ConnectionRule& r) {
  if (r.a == 0 && r.b == 0) throw std::invalid_argument("connection rule (0,0) is a self-edge");
  if (((r.a + r.b) % 2 + 2) % 2 == 0)
    throw std::invalid_argument("connection rule (" + std::to_string(r.a) + "," +
                                std::to_string(r.b) +
                                ") has a+b even; the grid would not be two-colorable");
}

}  // namespace

int ConnectivityPattern::reach() const {
  int r = 0;
  for (const auto& rule : rules) r = std::max({r, std::abs(rule.a), std::abs(rule.b)});
  return r;
}

ConnectivityPattern build_pattern(std::string_view name) {
  if (name == "G8") return {"G8", {{0, 1}, {4, 1}}};
  if (name == "G12") return {"G12", {{0, 1}, {4, 1}, {9, 10}}};
  if (name == "G16") return {"G16", {{0, 1}, {4, 1}, {8, 7}, {14, 9}}};
  if (name == "G20") return {"G20", {{0, 1}, {4, 1}, {3, 6}, {8, 7}, {14, 9}}};
  if (name == "G24") return {"G24", {{0, 1}, {1, 2}, {4, 1}, {3, 6}, {8, 7}, {14, 9}}};
  throw std::invalid_argument("unknown connectivity pattern '" + std::string(name) +
                              "' (expected G8, G12, G16, G20 or G24)");
}

ConnectivityPattern custom_pattern(std::vector<ConnectionRule> rules, std::string name) {
  if (rules.empty()) throw std::invalid_argument("custom pattern needs at least one rule");
  for (const auto& r : rules) validate_rule(r);
  return {std::move(name), std::move(rules)};
}

void GridGraph::finalize() {
  const int n = num_nodes();
  const int L = side_;

  std::vector<std::vector<int>> nb(n);
  for (int y = 0; y < L; ++y) {
    for (int x = 0; x < L; ++x) {
      const int u = y * L + x;
      for (const auto& r : pattern_.rules) {
        const int dx[4] = {r.a, -r.b, -r.a, r.b};
        const int dy[4] = {r.b, r.a, -r.b, -r.a};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k];
          const int ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= L || ny >= L) continue;
          nb[u].push_back(ny * L + nx);
        }
      }
    }
  }

  edges_.clear();
  for (int u = 0; u < n; ++u) {
    auto& list = nb[u];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (int v : list)
      if (u < v) edges_.push_back({u, v});
  }

  offsets_.assign(n + 1, 0);
  for (int u = 0; u < n; ++u) offsets_[u + 1] = offsets_[u] + static_cast<int>(nb[u].size());
  adj_.assign(offsets_[n], 0);
  adj_edge_.assign(offsets_[n], 0);
  std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
  for (int u = 0; u < n; ++u)
    for (int v : nb[u]) adj_[cursor[u]++] = v;

  // Edge ids for each half-edge; edges_ is sorted by (u, v).
  for (int u = 0; u < n; ++u) {
    for (int k = offsets_[u]; k < offsets_[u + 1]; ++k) {
      const int v = adj_[k];
      const Edge key{std::min(u, v), std::max(u, v)};
      const auto it = std::lower_bound(edges_.begin(), edges_.end(), key, [](const Edge& a, const Edge& b) {
        return a.u != b.u ? a.u < b.u : a.v < b.v;
      });
      adj_edge_[k] = static_cast<int>(it - edges_.begin());
    }
  }

  visible_.clear();
  input_link_.assign(n, -1);
  for (int u = 0; u < n; ++u)
    if (roles_[u] == NodeRole::pixel) visible_.push_back(u);
  num_pixels_ = static_cast<int>(visible_.size());
  for (int u = 0; u < n; ++u)
    if (roles_[u] == NodeRole::label) visible_.push_back(u);
  for (std::size_t k = 0; k < visible_.size(); ++k) input_link_[visible_[k]] = static_cast<int>(k);

  blocks_[0].clear();
  blocks_[1].clear();
  for (int u = 0; u < n; ++u) blocks_[color(u)].push_back(u);
}

GridGraph assemble_grid(int side, ConnectivityPattern pattern, std::vector<NodeRole> roles,
                        std::uint64_t seed) {
  if (side < 1) throw std::invalid_argument("grid side must be >= 1");
  if (static_cast<int>(roles.size()) != side * side)
    throw std::invalid_argument("role array size does not match L*L");
  for (const auto& r : pattern.rules) validate_rule(r);
  GridGraph g;
  g.side_ = side;
  g.pattern_ = std::move(pattern);
  g.seed_ = seed;
  g.roles_ = std::move(roles);
  g.finalize();
  return g;
}

GridGraph build_grid(int side, const ConnectivityPattern& pattern, int n_visible, int n_labels,
                     std::uint64_t seed) {
  if (side < 1) throw std::invalid_argument("grid side must be >= 1");
  if (n_visible < 0 || n_labels < 0) throw std::invalid_argument("node counts must be >= 0");
  const int n = side * side;
  if (n_visible + n_labels > n)
    throw std::invalid_argument("n_visible + n_labels = " + std::to_string(n_visible + n_labels) +
                                " exceeds L^2 = " + std::to_string(n));

  // Partial Fisher-Yates on a counter stream: portable across standard libraries.
  const CounterRng rng(derive_seed(seed, 0x67726964));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int take = n_visible + n_labels;
  for (int i = 0; i < take; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i), i));
    std::swap(order[i], order[j]);
  }
  std::vector<NodeRole> roles(n, NodeRole::latent);
  for (int i = 0; i < n_visible; ++i) roles[order[i]] = NodeRole::pixel;
  for (int i = n_visible; i < take; ++i) roles[order[i]] = NodeRole::label;
  return assemble_grid(side, pattern, std::move(roles), seed);
}

std::pair<std::vector<int>, std::vector<int>> color_blocks(const GridGraph& g) {
  return {g.block(0), g.block(1)};
}

void write_graph(std::ostream& os, const GridGraph& g) {
  io::LeWriter w(os);
  w.magic("DTMG");
  w.put<std::uint32_t>(kGraphVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.side()));
  w.put<std::uint64_t>(g.seed());
  w.put_string(g.pattern().name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.pattern().rules.size()));
  for (const auto& r : g.pattern().rules) {
    w.put<std::int32_t>(r.a);
    w.put<std::int32_t>(r.b);
  }
  for (auto role : g.roles()) w.put<std::uint8_t>(static_cast<std::uint8_t>(role));
  w.check();
}

GridGraph read_graph(std::istream& is) {
  io::LeReader r(is);
  r.expect_magic("DTMG");
  const auto version = r.get<std::uint32_t>();
  if (version != kGraphVersion)
    throw std::runtime_error("unsupported graph version " + std::to_string(version));
  const auto side = r.get<std::uint32_t>();
  if (side == 0 || side > 100000) throw std::runtime_error("graph side out of range");
  const auto seed = r.get<std::uint64_t>();
  ConnectivityPattern pattern;
  pattern.name = r.get_string(256);
  const auto n_rules = r.get<std::uint32_t>();
  if (n_rules > 1024) throw std::runtime_error("rule count out of range");
  for (std::uint32_t k = 0; k < n_rules; ++k) {
    const int a = r.get<std::int32_t>();
    const int b = r.get<std::int32_t>();
    pattern.rules.push_back({a, b});
  }
  std::vector<NodeRole> roles(static_cast<std::size_t>(side) * side);
  for (auto& role : roles) {
    const auto v = r.get<std::uint8_t>();
    if (v > 2) throw std::runtime_error("invalid node role at offset " + std::to_string(r.offset() - 1));
    role = static_cast<NodeRole>(v);
  }
  return assemble_grid(static_cast<int>(side), std::move(pattern), std::move(roles), seed);
}

nlohmann::json graph_to_json(const GridGraph& g) {
  nlohmann::json j;
  j["format"] = "DTMG";
  j["version"] = kGraphVersion;
  j["L"] = g.side();
  j["seed"] = g.seed();
  j["pattern"]["name"] = g.pattern().name;
  for (const auto& r : g.pattern().rules) j["pattern"]["rules"].push_back({r.a, r.b});
  j["num_edges"] = g.num_edges();
  j["pixels"] = nlohmann::json::array();
  j["labels"] = nlohmann::json::array();
  for (int k = 0; k < g.num_visible(); ++k) {
    const int node = g.visible_nodes()[k];
    (k < g.num_pixels() ? j["pixels"] : j["labels"]).push_back(node);
  }
  for (const auto& e : g.edges()) j["edges"].push_back({e.u, e.v});
  return j;
}

}  // namespace dtm
