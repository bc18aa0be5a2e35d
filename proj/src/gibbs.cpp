#include "dtm/gibbs.hpp"

namespace dtm {

Moments estimate_moments(const SampleTrace& trace, const GridGraph& g, long burn_in) {
  if (trace.frames.empty()) throw std::invalid_argument("trace has no frames");
  if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (burn_in >= trace.sweep_stamps.back())
    throw std::invalid_argument("burn_in must be smaller than the number of sweeps");
  MomentSums sums(g);
  for (std::size_t f = 0; f < trace.frames.size(); ++f)
    if (trace.sweep_stamps[f] > burn_in) sums.add(trace.frames[f], g);
  return sums.mean();
}

}  // namespace dtm
