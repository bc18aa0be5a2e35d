#include "dtm/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "dtm/binary_io.hpp"
#include "dtm/model_io.hpp"

namespace dtm {

namespace {

constexpr int kCheckpointVersion = 1;

std::string step_file(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%02d.dtmb", t);
  return buf;
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& dst) {
  std::filesystem::rename(tmp, dst);
}

void put_vector(io::LeWriter& w, const Eigen::VectorXd& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  w.put_array(v.data(), static_cast<std::size_t>(v.size()));
}

Eigen::VectorXd get_vector(io::LeReader& r) {
  Eigen::VectorXd v(r.get<std::uint32_t>());
  r.get_array(v.data(), static_cast<std::size_t>(v.size()));
  return v;
}

/// Binary layout "DTMS": magic, u32 version, u32 steps; per step the Adam
/// counter and moments, then the persistent negative chains (u32 rows, u32
/// cols, bit-packed spins).
void write_state(std::ostream& os, const TrainState& st) {
  io::LeWriter w(os);
  w.magic("DTMS");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(st.optimizer.size()));
  for (std::size_t t = 0; t < st.optimizer.size(); ++t) {
    const auto& o = st.optimizer[t];
    w.put<std::int64_t>(o.t);
    put_vector(w, o.mJ);
    put_vector(w, o.vJ);
    put_vector(w, o.mh);
    put_vector(w, o.vh);
    const SpinMatrix empty;
    const SpinMatrix& chains = t < st.persistent.size() ? st.persistent[t] : empty;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(chains.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(chains.cols()));
    w.put_bytes(pack_spins(chains));
  }
  w.check();
}

void read_state(std::istream& is, TrainState& st) {
  io::LeReader r(is);
  r.expect_magic("DTMS");
  if (r.get<std::uint32_t>() != 1) throw std::runtime_error("unsupported training state version");
  const auto steps = r.get<std::uint32_t>();
  st.optimizer.assign(steps, {});
  st.persistent.assign(steps, {});
  for (std::uint32_t t = 0; t < steps; ++t) {
    auto& o = st.optimizer[t];
    o.t = r.get<std::int64_t>();
    o.mJ = get_vector(r);
    o.vJ = get_vector(r);
    o.mh = get_vector(r);
    o.vh = get_vector(r);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    st.persistent[t] = unpack_spins(r.get_bytes(rows * packed_row_bytes(cols)), rows, cols);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const DtmModel& model, const TrainState& state,
                     const nlohmann::json& extra) {
  model.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "graph.dtmg.tmp", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "graph.dtmg").string());
    write_graph(out, *model.graph);
  }
  commit(dir / "graph.dtmg.tmp", dir / "graph.dtmg");
  nlohmann::json steps = nlohmann::json::array();
  for (int t = 1; t <= model.num_steps(); ++t) {
    const auto name = step_file(t);
    save_machine(dir / (name + ".tmp"), model.step(t), t);
    commit(dir / (name + ".tmp"), dir / name);
    commit(dir / (name + ".tmp.json"), dir / (name + ".json"));
    steps.push_back(name);
  }
  {
    std::ofstream out(dir / "state.bin.tmp", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "state.bin").string());
    write_state(out, state);
  }
  commit(dir / "state.bin.tmp", dir / "state.bin");
  nlohmann::json manifest = {{"format", "dtm-checkpoint"},
                             {"version", kCheckpointVersion},
                             {"epoch", state.epoch},
                             {"schedule", schedule_to_json(model.schedule)},
                             {"graph", graph_to_json(*model.graph)},
                             {"steps", steps},
                             {"acp", state.acp.lambda.empty() ? nlohmann::json(nullptr) : acp_state_to_json(state.acp)},
                             {"run", extra}};
  {
    std::ofstream js(dir / "manifest.json.tmp");
    js << manifest.dump(2) << '\n';
  }
  commit(dir / "manifest.json.tmp", dir / "manifest.json");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  std::ifstream js(mpath);
  if (!js) throw std::runtime_error("no checkpoint at " + dir.string() + " (missing manifest.json; run `train` first)");
  Checkpoint ck;
  ck.manifest = nlohmann::json::parse(js);
  if (ck.manifest.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error(mpath.string() + ": unsupported checkpoint version");
  std::ifstream gin(dir / "graph.dtmg", std::ios::binary);
  if (!gin) throw std::runtime_error("cannot open " + (dir / "graph.dtmg").string());
  auto graph = std::make_shared<const GridGraph>(read_graph(gin));
  ck.model.graph = graph;
  ck.model.schedule = schedule_from_json(ck.manifest.at("schedule"));
  for (const auto& name : ck.manifest.at("steps")) ck.model.steps.push_back(load_machine(dir / name.get<std::string>(), graph));
  ck.model.validate();
  ck.state.epoch = ck.manifest.value("epoch", 0);
  if (!ck.manifest.at("acp").is_null()) ck.state.acp = acp_state_from_json(ck.manifest.at("acp"));
  std::ifstream sin(dir / "state.bin", std::ios::binary);
  if (!sin) throw std::runtime_error("cannot open " + (dir / "state.bin").string());
  try {
    read_state(sin, ck.state);
  } catch (const std::exception& e) {
    throw std::runtime_error((dir / "state.bin").string() + ": " + e.what());
  }
  return ck;
}

}  // namespace dtm
