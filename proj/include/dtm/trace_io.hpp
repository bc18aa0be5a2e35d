#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dtm/gibbs.hpp"

namespace dtm {

/// Recorded frames restricted to a subset of nodes. Column j of every frame
/// holds node node_order[j] of the original graph.
struct StoredTrace {
  std::vector<int> node_order;
  SampleTrace trace;
};

/// Binary layout "DTMT": magic, u32 version, u32 chains, u32 columns,
/// u32 frames, i32 node_order[columns], i64 sweep_stamps[frames], then each
/// frame bit-packed row by row.
void write_trace(std::ostream& os, const SampleTrace& trace, const std::vector<int>& node_order);
/// All nodes in id order.
void write_trace(std::ostream& os, const SampleTrace& trace);
StoredTrace read_trace(std::istream& is);

/// Selects node columns from every frame of a full-state trace.
SampleTrace select_nodes(const SampleTrace& trace, const std::vector<int>& nodes);

nlohmann::json trace_manifest(const SampleTrace& trace, const std::vector<int>& node_order);

/// Writes <path> (binary) and <path>.json (manifest merged with `extra`).
void save_trace(const std::filesystem::path& path, const SampleTrace& trace, const std::vector<int>& node_order,
                const nlohmann::json& extra);
StoredTrace load_trace(const std::filesystem::path& path);

}  // namespace dtm
