#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dtm/dtm.hpp"

namespace dtm {

struct Checkpoint {
  DtmModel model;
  TrainState state;
  nlohmann::json manifest;
};

/// Directory layout: graph.dtmg, step_<t>.dtmb (+ .json sidecar) per step, and
/// state.bin with optimizer moments and persistent chains, and manifest.json
/// holding the schedule, epoch, ACP state and `extra` (run config).
/// Files are written to temporaries and renamed so an interrupted save leaves
/// the previous checkpoint intact.
void save_checkpoint(const std::filesystem::path& dir, const DtmModel& model, const TrainState& state,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace dtm
