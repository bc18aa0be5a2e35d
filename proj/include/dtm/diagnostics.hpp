#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "dtm/gibbs.hpp"
#include "dtm/spin.hpp"

namespace dtm {

/// Fixed random linear map y = A x from visible spins to a few features.
struct ProjectionObservable {
  Eigen::MatrixXd A;  // k x n_visible

  int dims() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(A.cols()); }

  /// Rows of i.i.d. standard normal entries; k = 16 by default.
  static ProjectionObservable gaussian(int n_visible, std::uint64_t seed, int k = 16);

  /// Features of each row of spins (n x k).
  Eigen::MatrixXd apply(const SpinMatrix& visible) const;
};

/// Per-chain projected series: element c is a frames x dims matrix.
using ProjectedSeries = std::vector<Eigen::MatrixXd>;

/// Extracts visible columns of every frame and projects them.
ProjectedSeries project(const SampleTrace& trace, const std::vector<int>& visible_nodes,
                        const ProjectionObservable& obs);

struct AutocorrResult {
  std::vector<int> lags;
  std::vector<double> r;
  std::optional<double> sigma2;
  std::pair<int, int> fit_window{0, 0};
  double fit_r2 = 0.0;
  bool single_chain = false;  // cross-chain expectation unavailable, time averages only
};

/// All lags 0..max_lag.
std::vector<int> dense_lags(int max_lag);
/// 0, 1, 2, 4, ... up to max_lag.
std::vector<int> power_of_two_lags(int max_lag);

/// Normalized autocorrelation
///   r[k] = E[(y[j]-mu)(y[j+k]-mu)] / E[(y[j]-mu)^2]
/// with expectations over chains and time origins, averaged over feature
/// dims. mu is taken per chain group (chains that share one conditioning
/// input); groups empty means one group.
AutocorrResult autocorrelation(const ProjectedSeries& series, const std::vector<int>& lags,
                               const std::vector<int>& groups = {});

/// Convenience: project the trace's visible nodes and use power-of-two lags.
AutocorrResult autocorrelation(const SampleTrace& trace, const std::vector<int>& visible_nodes,
                               const ProjectionObservable& obs, int max_lag);

enum class MixingStatus { resolved, unresolved };

struct MixingFit {
  MixingStatus status = MixingStatus::unresolved;
  double sigma2 = 0.0;
  /// 1 / (1 - sigma2): relaxation time in sweeps. An upper-bound-flavored
  /// proxy for mixing time; no tolerance epsilon is implied.
  double relaxation_sweeps = 0.0;
  double fit_r2 = 0.0;
  std::pair<int, int> window{0, 0};
  std::string reason;
};

/// Least-squares slope of ln r against lag over lags in [lo, hi].
/// Throws if fewer than 4 lags fall in the window or any r there is <= 0.
MixingFit fit_sigma2(AutocorrResult& res, std::pair<int, int> window);

struct AutoFitOptions {
  double noise_floor = 0.05;  // r values below this are treated as noise
  double min_r2 = 0.99;       // below this the tail is not a clean exponential
  int min_points = 4;
};

/// Picks the long-lag window automatically: the upper half of the leading run
/// of lags with r above the noise floor. Reports unresolved when the curve
/// has not decayed to the floor by the last lag or the tail is not linear in
/// log space.
MixingFit fit_sigma2_auto(AutocorrResult& res, const AutoFitOptions& opts = {});

/// Frechet distance between Gaussian fits of projected features:
/// |mu1-mu2|^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}). Covariances get eps * I loading.
double proxy_frechet(const SpinMatrix& samples, const SpinMatrix& reference, const ProjectionObservable& obs,
                     double eps = 1e-6);

nlohmann::json autocorr_to_json(const AutocorrResult& res, const MixingFit& fit);
std::string autocorr_to_csv(const AutocorrResult& res);

}  // namespace dtm
