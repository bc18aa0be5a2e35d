#include "dtm/model_io.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dtm/binary_io.hpp"

namespace dtm {

namespace {
constexpr std::uint32_t kMachineVersion = 1;
}

void write_machine(std::ostream& os, const BoltzmannMachine<float>& m) {
  m.validate();
  io::LeWriter w(os);
  w.magic("DTMB");
  w.put<std::uint32_t>(kMachineVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_nodes()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_edges()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_visible()));
  w.put<double>(m.beta);
  w.put_array(m.weights.data(), static_cast<std::size_t>(m.weights.size()));
  w.put_array(m.biases.data(), static_cast<std::size_t>(m.biases.size()));
  w.put_array(m.input_coupling.data(), static_cast<std::size_t>(m.input_coupling.size()));
  w.check();
}

BoltzmannMachine<float> read_machine(std::istream& is, std::shared_ptr<const GridGraph> graph) {
  if (!graph) throw std::invalid_argument("read_machine needs a graph");
  io::LeReader r(is);
  r.expect_magic("DTMB");
  const auto version = r.get<std::uint32_t>();
  if (version != kMachineVersion) throw std::runtime_error("unsupported model version " + std::to_string(version));
  const auto nodes = r.get<std::uint32_t>();
  const auto edges = r.get<std::uint32_t>();
  const auto visible = r.get<std::uint32_t>();
  if (static_cast<int>(nodes) != graph->num_nodes() || static_cast<int>(edges) != graph->num_edges() ||
      static_cast<int>(visible) != graph->num_visible())
    throw std::runtime_error("model file does not match graph (nodes/edges/visible counts differ)");
  BoltzmannMachine<float> m(std::move(graph));
  m.beta = static_cast<float>(r.get<double>());
  r.get_array(m.weights.data(), edges);
  r.get_array(m.biases.data(), nodes);
  r.get_array(m.input_coupling.data(), visible);
  m.validate();
  return m;
}

nlohmann::json machine_sidecar(const BoltzmannMachine<float>& m, int step) {
  return {{"format", "DTMB"},
          {"version", kMachineVersion},
          {"beta", m.beta},
          {"pattern", m.graph->pattern().name},
          {"side", m.graph->side()},
          {"graph_seed", m.graph->seed()},
          {"step", step}};
}

void save_machine(const std::filesystem::path& path, const BoltzmannMachine<float>& m, int step) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_machine(out, m);
  }
  std::ofstream js(path.string() + ".json");
  js << machine_sidecar(m, step).dump(2) << '\n';
}

BoltzmannMachine<float> load_machine(const std::filesystem::path& path, std::shared_ptr<const GridGraph> graph) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path.string());
  try {
    return read_machine(in, std::move(graph));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace dtm
