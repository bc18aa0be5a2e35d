#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dtm {

/// Node (x, y) with rule (a, b) connects to (x+a, y+b), (x-b, y+a), (x-a, y-b), (x+b, y-a).
struct ConnectionRule {
  int a = 0;
  int b = 0;
  friend bool operator==(const ConnectionRule&, const ConnectionRule&) = default;
};

struct ConnectivityPattern {
  std::string name;
  std::vector<ConnectionRule> rules;

  int bulk_degree() const { return 4 * static_cast<int>(rules.size()); }
  /// Largest |a| or |b| over all rules.
  int reach() const;
};

/// One of G8, G12, G16, G20, G24.
ConnectivityPattern build_pattern(std::string_view name);

/// Validated user rule list; rejects (0,0) and rules with a+b even.
ConnectivityPattern custom_pattern(std::vector<ConnectionRule> rules, std::string name = "custom");

enum class NodeRole : std::uint8_t { latent = 0, pixel = 1, label = 2 };

struct Edge {
  int u;  // u < v
  int v;
};

/// Sparse L x L grid Boltzmann machine topology.
///
/// Nodes are indexed row-major, id = y * L + x. Visible nodes (pixels first,
/// then labels, each in ascending node id) define the column order of data
/// matrices; visible index k owns companion input k, which lives outside the
/// node index space.
class GridGraph {
 public:
  GridGraph() = default;

  int side() const { return side_; }
  int num_nodes() const { return side_ * side_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const ConnectivityPattern& pattern() const { return pattern_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const int> neighbors(int node) const {
    return {adj_.data() + offsets_[node], adj_.data() + offsets_[node + 1]};
  }
  /// Edge ids aligned with neighbors(node).
  std::span<const int> incident_edges(int node) const {
    return {adj_edge_.data() + offsets_[node], adj_edge_.data() + offsets_[node + 1]};
  }
  int degree(int node) const { return offsets_[node + 1] - offsets_[node]; }
  const std::vector<Edge>& edges() const { return edges_; }

  int x_of(int node) const { return node % side_; }
  int y_of(int node) const { return node / side_; }
  int color(int node) const { return (x_of(node) + y_of(node)) & 1; }

  NodeRole role(int node) const { return roles_[node]; }
  const std::vector<NodeRole>& roles() const { return roles_; }
  bool is_visible(int node) const { return roles_[node] != NodeRole::latent; }

  const std::vector<int>& visible_nodes() const { return visible_; }
  int num_visible() const { return static_cast<int>(visible_.size()); }
  int num_pixels() const { return num_pixels_; }
  int num_labels() const { return num_visible() - num_pixels_; }
  int num_latent() const { return num_nodes() - num_visible(); }

  /// Companion input index of a visible node, -1 for latents.
  int input_link(int node) const { return input_link_[node]; }

  const std::vector<int>& block(int c) const { return blocks_[c]; }

  friend GridGraph build_grid(int, const ConnectivityPattern&, int, int, std::uint64_t);
  friend GridGraph assemble_grid(int, ConnectivityPattern, std::vector<NodeRole>, std::uint64_t);

 private:
  void finalize();

  int side_ = 0;
  ConnectivityPattern pattern_;
  std::uint64_t seed_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> offsets_;
  std::vector<int> adj_;
  std::vector<int> adj_edge_;
  std::vector<NodeRole> roles_;
  std::vector<int> visible_;
  std::vector<int> input_link_;
  int num_pixels_ = 0;
  std::vector<int> blocks_[2];
};

/// Builds the grid; visible (pixel and label) nodes are drawn uniformly
/// without replacement from a stream keyed by seed.
GridGraph build_grid(int side, const ConnectivityPattern& pattern, int n_visible, int n_labels,
                     std::uint64_t seed);

/// Rebuilds a grid from an explicit role assignment (used by deserialization and tests).
GridGraph assemble_grid(int side, ConnectivityPattern pattern, std::vector<NodeRole> roles,
                        std::uint64_t seed = 0);

/// Checkerboard blocks: color (x + y) mod 2.
std::pair<std::vector<int>, std::vector<int>> color_blocks(const GridGraph& g);

/// Binary layout "DTMG": magic, u32 version, u32 L, u64 seed, name, u32 rule count,
/// i32 pairs, then one u8 role per node.
void write_graph(std::ostream& os, const GridGraph& g);
GridGraph read_graph(std::istream& is);

nlohmann::json graph_to_json(const GridGraph& g);

}  // namespace dtm
