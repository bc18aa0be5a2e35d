#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include <nlohmann/json_fwd.hpp>

#include "dtm/boltzmann.hpp"

namespace dtm {

/// Binary layout "DTMB": magic, u32 version, u32 nodes, u32 edges, u32 visible,
/// f64 beta, then f32 J[edges], f32 h[nodes], f32 coupling[visible].
void write_machine(std::ostream& os, const BoltzmannMachine<float>& m);
/// Reads parameters onto an existing graph; counts must match.
BoltzmannMachine<float> read_machine(std::istream& is, std::shared_ptr<const GridGraph> graph);

/// Sidecar metadata: beta, pattern name, graph seed, step index.
nlohmann::json machine_sidecar(const BoltzmannMachine<float>& m, int step);

/// Writes <path> and <path>.json.
void save_machine(const std::filesystem::path& path, const BoltzmannMachine<float>& m, int step);
BoltzmannMachine<float> load_machine(const std::filesystem::path& path, std::shared_ptr<const GridGraph> graph);

}  // namespace dtm
