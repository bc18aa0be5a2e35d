#include "dtm/energy_model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dtm::hardware {

void ProcessParams::validate() const {
  const double positive[] = {e_rng, tau_ratio, c_bias, v_dd, eta, cell_side, v_thermal};
  for (double v : positive)
    if (!(v > 0.0)) throw std::invalid_argument("process parameters must be positive");
  if (v_sig_mult < 0.0 || v_clk_mult < 0.0) throw std::invalid_argument("voltage multiples must be >= 0");
  if (duty_gamma < 0.0 || duty_gamma > 1.0) throw std::invalid_argument("duty_gamma must lie in [0, 1]");
}

double bias_energy(const ProcessParams& p) {
  return p.c_bias * p.tau_ratio * p.v_dd * p.v_dd * (1.0 - p.duty_gamma) * p.duty_gamma;
}

double neighbor_capacitance(const ConnectivityPattern& pattern, const ProcessParams& p) {
  double length = 0.0;
  for (const auto& r : pattern.rules) length += std::hypot(static_cast<double>(r.a), static_cast<double>(r.b));
  return 4.0 * p.eta * p.cell_side * length;
}

double neighbor_wire_energy(const ConnectivityPattern& pattern, const ProcessParams& p) {
  return 0.5 * neighbor_capacitance(pattern, p) * p.v_sig() * p.v_sig();
}

double clock_energy_per_cell(const ProcessParams& p, int side) {
  if (side < 1) throw std::invalid_argument("grid side must be >= 1");
  return 0.5 * p.eta * p.cell_side * p.v_clk() * p.v_clk();
}

double clock_energy_per_row(const ProcessParams& p, int side) {
  if (side < 1) throw std::invalid_argument("grid side must be >= 1");
  return 0.5 * p.eta * (side * p.cell_side) * p.v_clk() * p.v_clk();
}

double global_bit_energy(const ProcessParams& p, int side) {
  return 0.5 * p.eta * (side * p.cell_side) * p.v_clk() * p.v_clk();
}

EnergyLedger program_energy(const ProgramContext& ctx, const ProcessParams& p) {
  p.validate();
  if (ctx.steps < 1 || ctx.sweeps < 0 || ctx.nodes < 1 || ctx.data_nodes < 0 || ctx.side < 1)
    throw std::invalid_argument("program context counts must be positive");
  EnergyLedger l;
  l.context = ctx;
  l.e_rng = p.e_rng;
  l.e_bias = bias_energy(p);
  l.e_clock = clock_energy_per_cell(p, ctx.side);
  l.e_nb = neighbor_wire_energy(ctx.pattern, p);
  l.e_samp = static_cast<double>(ctx.sweeps) * static_cast<double>(ctx.nodes) * l.e_cell();
  const double bit = global_bit_energy(p, ctx.side);
  l.e_init = static_cast<double>(ctx.nodes) * bit;
  l.e_read = static_cast<double>(ctx.data_nodes) * bit;
  l.total = ctx.steps * (l.e_samp + l.e_init + l.e_read);
  return l;
}

double gpu_baseline(double flops, double peak_flops, double power_watts) {
  if (!(flops > 0) || !(peak_flops > 0) || !(power_watts > 0))
    throw std::invalid_argument("gpu baseline inputs must be positive");
  return flops / peak_flops * power_watts;
}

ProgramContext reference_scenario() {
  ProgramContext ctx;
  ctx.steps = 8;
  ctx.sweeps = 250;
  ctx.side = 70;
  ctx.nodes = 70 * 70;
  ctx.data_nodes = 834;
  ctx.pattern = build_pattern("G12");
  return ctx;
}

nlohmann::json ledger_to_json(const EnergyLedger& l, const ProcessParams& p) {
  nlohmann::json j;
  j["context"] = {{"T", l.context.steps},       {"K", l.context.sweeps},
                  {"N", l.context.nodes},       {"N_data", l.context.data_nodes},
                  {"L", l.context.side},        {"pattern", l.context.pattern.name}};
  j["params"] = {{"E_rng", p.e_rng},         {"tau_ratio", p.tau_ratio}, {"C_bias", p.c_bias},
                 {"V_dd", p.v_dd},           {"duty_gamma", p.duty_gamma}, {"eta", p.eta},
                 {"cell_side", p.cell_side}, {"V_T", p.v_thermal},      {"v_sig_mult", p.v_sig_mult},
                 {"v_clk_mult", p.v_clk_mult}};
  j["cell"] = {{"E_rng", l.e_rng}, {"E_bias", l.e_bias}, {"E_clock", l.e_clock}, {"E_nb", l.e_nb},
               {"E_cell", l.e_cell()}};
  j["program"] = {{"E_samp", l.e_samp}, {"E_init", l.e_init}, {"E_read", l.e_read},
                  {"per_step", l.per_step()}, {"total", l.total}};
  return j;
}

std::string ledger_to_table(const EnergyLedger& l) {
  std::ostringstream os;
  char buf[128];
  auto row = [&](const char* name, double joules, const char* unit, double scale) {
    std::snprintf(buf, sizeof buf, "  %-10s %12.4f %s\n", name, joules / scale, unit);
    os << buf;
  };
  os << "per cell update\n";
  row("E_rng", l.e_rng, "aJ", 1e-18);
  row("E_bias", l.e_bias, "aJ", 1e-18);
  row("E_clock", l.e_clock, "aJ", 1e-18);
  row("E_nb", l.e_nb, "aJ", 1e-18);
  row("E_cell", l.e_cell(), "fJ", 1e-15);
  os << "per denoising step\n";
  row("E_samp", l.e_samp, "nJ", 1e-9);
  row("E_init", l.e_init, "nJ", 1e-9);
  row("E_read", l.e_read, "nJ", 1e-9);
  row("step", l.per_step(), "nJ", 1e-9);
  os << "program (T=" << l.context.steps << ")\n";
  row("total", l.total, "nJ", 1e-9);
  return os.str();
}

}  // namespace dtm::hardware
