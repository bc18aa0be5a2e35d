#include "dtm/forward_process.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "dtm/rng.hpp"

namespace dtm {

double gamma(double kappa, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("gamma needs dt > 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("gamma needs kappa > 0");
  const double q = std::exp(-kappa * dt);
  if (q == 0.0) return 0.0;
  // ln((1+q)/(1-q)) = 2 atanh(q); -expm1 keeps precision as q -> 1.
  const double g = std::log1p(q) - std::log(-std::expm1(-kappa * dt));
  return std::min(g, kGammaCap);
}

double flip_kernel(double gamma_val) {
  if (gamma_val < 0.0) throw std::invalid_argument("flip_kernel needs gamma >= 0");
  return 1.0 / (1.0 + std::exp(-gamma_val));
}

double same_probability(double kappa, double dt) { return 0.5 * (1.0 + std::exp(-kappa * dt)); }

NoiseSchedule NoiseSchedule::uniform(int steps, double kappa_pixel, double kappa_label, double dt) {
  NoiseSchedule s;
  s.steps = steps;
  s.kappa_pixel = kappa_pixel;
  s.kappa_label = kappa_label;
  s.times.resize(static_cast<std::size_t>(std::max(steps, 0)) + 1);
  for (int t = 0; t <= steps; ++t) s.times[t] = t * dt;
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::geometric(int steps, double kappa_pixel, double kappa_label, double dt0,
                                       double ratio) {
  NoiseSchedule s;
  s.steps = steps;
  s.kappa_pixel = kappa_pixel;
  s.kappa_label = kappa_label;
  s.times.assign(static_cast<std::size_t>(std::max(steps, 0)) + 1, 0.0);
  double dt = dt0;
  for (int t = 1; t <= steps; ++t, dt *= ratio) s.times[t] = s.times[t - 1] + dt;
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (steps < 1) throw std::invalid_argument("schedule needs T >= 1");
  if (!(kappa_pixel > 0.0) || !(kappa_label > 0.0))
    throw std::invalid_argument("schedule rates must be > 0");
  if (static_cast<int>(times.size()) != steps + 1)
    throw std::invalid_argument("schedule needs T+1 time points");
  if (times[0] != 0.0) throw std::invalid_argument("schedule must start at t_0 = 0");
  for (int t = 1; t <= steps; ++t)
    if (!(times[t] > times[t - 1])) throw std::invalid_argument("schedule times must increase strictly");
}

bool NoiseSchedule::within_guidance() const {
  return kappa_label >= 0.1 && kappa_label <= 0.3 && kappa_pixel >= 0.7 && kappa_pixel <= 1.5;
}

double NoiseSchedule::step_dt(int t) const {
  if (t < 1 || t > steps)
    throw std::out_of_range("step " + std::to_string(t) + " outside 1.." + std::to_string(steps));
  return times[t] - times[t - 1];
}

double NoiseSchedule::step_gamma(int t, VariableClass c) const { return gamma(kappa(c), step_dt(t)); }

double NoiseSchedule::agreement(int t_from, int t_to, VariableClass c) const {
  if (t_from < 0 || t_to > steps || t_from >= t_to)
    throw std::out_of_range("invalid time range for agreement");
  return same_probability(kappa(c), times[t_to] - times[t_from]);
}

nlohmann::json schedule_to_json(const NoiseSchedule& s) {
  return {{"T", s.steps}, {"kappa_pixel", s.kappa_pixel}, {"kappa_label", s.kappa_label}, {"times", s.times}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.steps = j.at("T").get<int>();
  s.kappa_pixel = j.at("kappa_pixel").get<double>();
  s.kappa_label = j.at("kappa_label").get<double>();
  s.times = j.at("times").get<std::vector<double>>();
  s.validate();
  return s;
}

SpinMatrix advance(const SpinMatrix& data, const NoiseSchedule& schedule, int t_from, int t_to,
                   std::uint64_t seed, int n_label_columns) {
  if (n_label_columns < 0 || n_label_columns > data.cols())
    throw std::invalid_argument("label column count out of range");
  if (!all_spins(data)) throw std::invalid_argument("noising needs entries in {-1, +1}");
  const double keep_pixel = schedule.agreement(t_from, t_to, VariableClass::pixel);
  const double keep_label = schedule.agreement(t_from, t_to, VariableClass::label);
  const Eigen::Index first_label = data.cols() - n_label_columns;
  const CounterRng rng(derive_seed(seed, 0x6e6f697365));
  SpinMatrix out = data;
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      const double keep = c < first_label ? keep_pixel : keep_label;
      if (rng.uniform(r, c) >= keep) out(r, c) = static_cast<Spin>(-out(r, c));
    }
  return out;
}

SpinMatrix noise_dataset(const SpinMatrix& data, const NoiseSchedule& schedule, int t, std::uint64_t seed,
                         int n_label_columns) {
  if (t < 1 || t > schedule.steps)
    throw std::out_of_range("step " + std::to_string(t) + " outside 1.." + std::to_string(schedule.steps));
  return advance(data, schedule, 0, t, seed, n_label_columns);
}

Eigen::VectorXd coupling_for_step(const NoiseSchedule& schedule, int t, int n_pixels, int n_labels) {
  const double cx = 0.5 * schedule.step_gamma(t, VariableClass::pixel);
  const double cl = 0.5 * schedule.step_gamma(t, VariableClass::label);
  Eigen::VectorXd c(n_pixels + n_labels);
  c.head(n_pixels).setConstant(cx);
  c.tail(n_labels).setConstant(cl);
  return c;
}

}  // namespace dtm
