#include "dtm/trace_io.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dtm/binary_io.hpp"

namespace dtm {

namespace {
constexpr std::uint32_t kTraceVersion = 1;
}

void write_trace(std::ostream& os, const SampleTrace& trace, const std::vector<int>& node_order) {
  if (trace.frames.size() != trace.sweep_stamps.size())
    throw std::invalid_argument("trace frames and sweep stamps differ in length");
  const auto cols = static_cast<Eigen::Index>(node_order.size());
  io::LeWriter w(os);
  w.magic("DTMT");
  w.put<std::uint32_t>(kTraceVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trace.num_chains));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cols));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trace.frames.size()));
  for (int n : node_order) w.put<std::int32_t>(n);
  for (long s : trace.sweep_stamps) w.put<std::int64_t>(s);
  for (const auto& f : trace.frames) {
    if (f.rows() != trace.num_chains) throw std::invalid_argument("frame chain count mismatch");
    if (f.cols() == cols) {
      w.put_bytes(pack_spins(f));
    } else {
      SpinMatrix sub(f.rows(), cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (node_order[j] < 0 || node_order[j] >= f.cols()) throw std::out_of_range("node order entry out of range");
        sub.col(j) = f.col(node_order[j]);
      }
      w.put_bytes(pack_spins(sub));
    }
  }
  w.check();
}

void write_trace(std::ostream& os, const SampleTrace& trace) {
  std::vector<int> order(static_cast<std::size_t>(trace.num_nodes));
  std::iota(order.begin(), order.end(), 0);
  write_trace(os, trace, order);
}

StoredTrace read_trace(std::istream& is) {
  io::LeReader r(is);
  r.expect_magic("DTMT");
  const auto version = r.get<std::uint32_t>();
  if (version != kTraceVersion) throw std::runtime_error("unsupported trace version " + std::to_string(version));
  StoredTrace st;
  auto& t = st.trace;
  t.num_chains = static_cast<int>(r.get<std::uint32_t>());
  const auto cols = r.get<std::uint32_t>();
  const auto frames = r.get<std::uint32_t>();
  t.num_nodes = static_cast<int>(cols);
  st.node_order.resize(cols);
  for (auto& n : st.node_order) n = r.get<std::int32_t>();
  t.sweep_stamps.resize(frames);
  for (auto& s : t.sweep_stamps) s = r.get<std::int64_t>();
  const std::size_t bytes = packed_row_bytes(cols) * static_cast<std::size_t>(t.num_chains);
  t.frames.reserve(frames);
  for (std::uint32_t f = 0; f < frames; ++f) t.frames.push_back(unpack_spins(r.get_bytes(bytes), t.num_chains, cols));
  if (!t.frames.empty()) t.final_states = t.frames.back();
  return st;
}

SampleTrace select_nodes(const SampleTrace& trace, const std::vector<int>& nodes) {
  for (int n : nodes)
    if (n < 0 || n >= trace.num_nodes) throw std::out_of_range("node " + std::to_string(n) + " outside the trace");
  SampleTrace out;
  out.num_chains = trace.num_chains;
  out.num_nodes = static_cast<int>(nodes.size());
  out.sweep_stamps = trace.sweep_stamps;
  out.node_updates = trace.node_updates;
  out.seconds = trace.seconds;
  auto pick = [&](const SpinMatrix& f) {
    SpinMatrix sub(f.rows(), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t j = 0; j < nodes.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = f.col(nodes[j]);
    return sub;
  };
  for (const auto& f : trace.frames) out.frames.push_back(pick(f));
  if (trace.final_states.size() > 0) out.final_states = pick(trace.final_states);
  return out;
}

nlohmann::json trace_manifest(const SampleTrace& trace, const std::vector<int>& node_order) {
  return {{"format", "DTMT"},
          {"version", kTraceVersion},
          {"chains", trace.num_chains},
          {"frames", trace.frames.size()},
          {"node_order", node_order},
          {"sweep_stamps", trace.sweep_stamps},
          {"node_updates", trace.node_updates},
          {"seconds", trace.seconds}};
}

void save_trace(const std::filesystem::path& path, const SampleTrace& trace, const std::vector<int>& node_order,
                const nlohmann::json& extra) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_trace(out, trace, node_order);
  }
  auto manifest = trace_manifest(trace, node_order);
  if (extra.is_object()) manifest.update(extra);
  std::ofstream js(path.string() + ".json");
  js << manifest.dump(2) << '\n';
}

StoredTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  try {
    return read_trace(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace dtm
