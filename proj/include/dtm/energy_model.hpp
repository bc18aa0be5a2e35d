#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "dtm/grid_graph.hpp"

namespace dtm::hardware {

/// Thermal voltage k_B T / e at 300 K.
inline constexpr double kThermalVoltage = 25.85e-3;

/// Bias-network capacitance back-solved so that the reference scenario
/// (T=8, K=250, N=4900, N_data=834, G12, other defaults) costs 1.6 nJ per
/// denoising step:
///   E_cell = (1.6 nJ - E_init - E_read) / (K N) = 1.3003 fJ
///   E_bias = E_cell - E_rng - E_nb - E_clock = 98.65 aJ
///   C_bias = E_bias / (tau_ratio V_dd^2 gamma (1 - gamma)) with V_dd = 0.8 V
inline constexpr double kReferenceBiasCapacitance = 41.11e-18;

struct ProcessParams {
  double e_rng = 350e-18;               // J per random bit
  double tau_ratio = 15.0;              // tau_rng / tau_bias
  double c_bias = kReferenceBiasCapacitance;  // F
  double v_dd = 0.8;                    // V
  double duty_gamma = 0.5;              // resistor-network operating point in [0, 1]
  double eta = 350e-18 / 1e-6;          // wire capacitance per length, F/m (350 aF/um)
  double cell_side = 6e-6;              // m
  double v_thermal = kThermalVoltage;   // V
  double v_sig_mult = 4.0;              // neighbor signalling level, multiples of V_T
  double v_clk_mult = 5.0;              // clock and init/readout level, multiples of V_T

  void validate() const;
  double v_sig() const { return v_sig_mult * v_thermal; }
  double v_clk() const { return v_clk_mult * v_thermal; }
};

struct ProgramContext {
  int steps = 1;      // T
  long sweeps = 1;    // K per step
  long nodes = 1;     // N
  long data_nodes = 1;
  int side = 1;       // L, cells per row
  ConnectivityPattern pattern;
};

struct EnergyLedger {
  // Per cell, per sweep.
  double e_rng = 0, e_bias = 0, e_clock = 0, e_nb = 0;
  // Per denoising step.
  double e_samp = 0, e_init = 0, e_read = 0;
  double total = 0;
  ProgramContext context;

  double e_cell() const { return e_rng + e_bias + e_clock + e_nb; }
  double per_step() const { return e_samp + e_init + e_read; }
};

/// C_bias * tau_ratio * V_dd^2 * gamma * (1 - gamma); static dissipation held for one RNG period.
double bias_energy(const ProcessParams& p);

/// Total wire capacitance to all neighbors: 4 eta l sum sqrt(a^2 + b^2).
double neighbor_capacitance(const ConnectivityPattern& pattern, const ProcessParams& p);

/// 1/2 C_n V_sig^2.
double neighbor_wire_energy(const ConnectivityPattern& pattern, const ProcessParams& p);

/// Per-cell share of the row clock line: 1/2 eta l V_clk^2.
double clock_energy_per_cell(const ProcessParams& p, int side);

/// Charge of one full row line (L cells); equals side * clock_energy_per_cell.
double clock_energy_per_row(const ProcessParams& p, int side);

/// One bit sent over a wire of length L*l at the clock/readout level.
double global_bit_energy(const ProcessParams& p, int side);

EnergyLedger program_energy(const ProgramContext& ctx, const ProcessParams& p);

/// Theoretical GPU joules: flops / peak * power.
inline constexpr double kGpuPeakFlops = 19.5e12;
inline constexpr double kGpuPowerWatts = 400.0;
double gpu_baseline(double flops, double peak_flops = kGpuPeakFlops, double power_watts = kGpuPowerWatts);

/// The reference sampling program: T=8, K=250, L=70 (N=4900), N_data=834, G12.
ProgramContext reference_scenario();

nlohmann::json ledger_to_json(const EnergyLedger& ledger, const ProcessParams& p);
std::string ledger_to_table(const EnergyLedger& ledger);

}  // namespace dtm::hardware
