#include "dtm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "dtm/rng.hpp"

namespace dtm {

ProjectionObservable ProjectionObservable::gaussian(int n_visible, std::uint64_t seed, int k) {
  if (n_visible < 1 || k < 1) throw std::invalid_argument("projection needs positive dimensions");
  const CounterRng rng(derive_seed(seed, 0x70726f6a));
  ProjectionObservable obs;
  obs.A.resize(k, n_visible);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < n_visible; ++c) obs.A(r, c) = rng.normal(r, c);
  return obs;
}

Eigen::MatrixXd ProjectionObservable::apply(const SpinMatrix& visible) const {
  if (visible.cols() != A.cols()) throw std::invalid_argument("projection input width mismatch");
  return visible.cast<double>() * A.transpose();
}

ProjectedSeries project(const SampleTrace& trace, const std::vector<int>& visible_nodes,
                        const ProjectionObservable& obs) {
  if (static_cast<int>(visible_nodes.size()) != obs.inputs())
    throw std::invalid_argument("projection width does not match visible node count");
  const auto frames = static_cast<Eigen::Index>(trace.frames.size());
  ProjectedSeries series(trace.num_chains, Eigen::MatrixXd(frames, obs.dims()));
  Eigen::VectorXd x(visible_nodes.size());
  for (Eigen::Index f = 0; f < frames; ++f) {
    const auto& states = trace.frames[f];
    for (int c = 0; c < trace.num_chains; ++c) {
      for (std::size_t k = 0; k < visible_nodes.size(); ++k) x[k] = states(c, visible_nodes[k]);
      series[c].row(f) = (obs.A * x).transpose();
    }
  }
  return series;
}

std::vector<int> dense_lags(int max_lag) {
  std::vector<int> lags(static_cast<std::size_t>(std::max(max_lag, 0)) + 1);
  for (int k = 0; k <= max_lag; ++k) lags[k] = k;
  return lags;
}

std::vector<int> power_of_two_lags(int max_lag) {
  std::vector<int> lags{0};
  for (int k = 1; k <= max_lag; k *= 2) lags.push_back(k);
  return lags;
}

AutocorrResult autocorrelation(const ProjectedSeries& series, const std::vector<int>& lags,
                               const std::vector<int>& groups) {
  if (series.empty()) throw std::invalid_argument("autocorrelation needs at least one chain");
  if (!groups.empty() && groups.size() != series.size())
    throw std::invalid_argument("group vector must have one entry per chain");
  const Eigen::Index frames = series[0].rows();
  const Eigen::Index dims = series[0].cols();
  for (const auto& s : series)
    if (s.rows() != frames || s.cols() != dims) throw std::invalid_argument("ragged projected series");
  const int max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
  if (frames < max_lag + 1) throw std::invalid_argument("trace shorter than max_lag + 1 frames");
  if (!lags.empty() && *std::min_element(lags.begin(), lags.end()) < 0)
    throw std::invalid_argument("lags must be >= 0");

  // Group means over chains and frames.
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t c = 0; c < series.size(); ++c) members[groups.empty() ? 0 : groups[c]].push_back(c);
  std::vector<Eigen::RowVectorXd> mu(series.size());
  for (const auto& [g, chains] : members) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(dims);
    for (auto c : chains) m += series[c].colwise().sum();
    m /= static_cast<double>(chains.size() * frames);
    for (auto c : chains) mu[c] = m;
  }

  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(dims);
  std::vector<Eigen::MatrixXd> centered(series.size());
  for (std::size_t c = 0; c < series.size(); ++c) {
    centered[c] = series[c].rowwise() - mu[c];
    var += centered[c].colwise().squaredNorm();
  }
  var /= static_cast<double>(series.size() * frames);

  AutocorrResult res;
  res.single_chain = series.size() == 1;
  res.lags = lags;
  res.r.reserve(lags.size());
  for (const int k : lags) {
    Eigen::RowVectorXd cov = Eigen::RowVectorXd::Zero(dims);
    const Eigen::Index n = frames - k;
    for (const auto& y : centered)
      cov += (y.topRows(n).array() * y.bottomRows(n).array()).matrix().colwise().sum();
    cov /= static_cast<double>(series.size() * n);
    double acc = 0.0;
    int used = 0;
    for (Eigen::Index d = 0; d < dims; ++d) {
      if (var[d] <= 0.0) continue;
      acc += cov[d] / var[d];
      ++used;
    }
    res.r.push_back(used ? acc / used : (k == 0 ? 1.0 : 0.0));
  }
  return res;
}

AutocorrResult autocorrelation(const SampleTrace& trace, const std::vector<int>& visible_nodes,
                               const ProjectionObservable& obs, int max_lag) {
  return autocorrelation(project(trace, visible_nodes, obs), power_of_two_lags(max_lag));
}

MixingFit fit_sigma2(AutocorrResult& res, std::pair<int, int> window) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < res.lags.size(); ++i) {
    const int k = res.lags[i];
    if (k < window.first || k > window.second) continue;
    if (!(res.r[i] > 0.0))
      throw std::invalid_argument("autocorrelation is non-positive at lag " + std::to_string(k) +
                                  " inside the fit window");
    xs.push_back(k);
    ys.push_back(std::log(res.r[i]));
  }
  if (xs.size() < 4) throw std::invalid_argument("fit window holds fewer than 4 lags");

  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  MixingFit fit;
  fit.sigma2 = std::exp(slope);
  fit.fit_r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.relaxation_sweeps = fit.sigma2 < 1.0 ? 1.0 / (1.0 - fit.sigma2) : INFINITY;
  fit.window = window;
  fit.status = MixingStatus::resolved;
  res.sigma2 = fit.sigma2;
  res.fit_window = window;
  res.fit_r2 = fit.fit_r2;
  return fit;
}

MixingFit fit_sigma2_auto(AutocorrResult& res, const AutoFitOptions& opts) {
  MixingFit out;
  std::vector<int> run;
  bool decayed = false;
  for (std::size_t i = 0; i < res.lags.size(); ++i) {
    if (res.lags[i] == 0) continue;
    if (res.r[i] < opts.noise_floor) {
      decayed = true;
      break;
    }
    run.push_back(res.lags[i]);
  }
  if (!decayed) {
    out.reason = "autocorrelation still above the noise floor at the largest lag; decay too slow to extract";
    return out;
  }
  if (static_cast<int>(run.size()) < opts.min_points) {
    out.reason = "fewer than " + std::to_string(opts.min_points) + " lags above the noise floor";
    return out;
  }
  // Long-time half of the above-floor run, keeping at least min_points lags.
  const std::size_t keep = std::max<std::size_t>(opts.min_points, run.size() - run.size() / 2);
  const std::pair<int, int> window{run[run.size() - keep], run.back()};
  MixingFit fit = fit_sigma2(res, window);
  if (fit.fit_r2 < opts.min_r2) {
    fit.status = MixingStatus::unresolved;
    fit.reason = "log autocorrelation is not linear over the long-lag window";
    res.sigma2.reset();
  }
  return fit;
}

namespace {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

GaussianFit fit_gaussian(const Eigen::MatrixXd& feats, double eps) {
  GaussianFit g;
  g.mean = feats.colwise().mean().transpose();
  const Eigen::MatrixXd c = feats.rowwise() - g.mean.transpose();
  g.cov = (c.transpose() * c) / static_cast<double>(feats.rows());
  g.cov.diagonal().array() += eps;
  return g;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double proxy_frechet(const SpinMatrix& samples, const SpinMatrix& reference, const ProjectionObservable& obs,
                     double eps) {
  if (samples.rows() == 0 || reference.rows() == 0)
    throw std::invalid_argument("proxy_frechet needs non-empty sample sets");
  if (samples.cols() != reference.cols()) throw std::invalid_argument("sample widths differ");
  const auto a = fit_gaussian(obs.apply(samples), eps);
  const auto b = fit_gaussian(obs.apply(reference), eps);
  // tr((C1 C2)^{1/2}) = tr((C1^{1/2} C2 C1^{1/2})^{1/2}).
  const Eigen::MatrixXd s1 = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = s1 * b.cov * s1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

nlohmann::json autocorr_to_json(const AutocorrResult& res, const MixingFit& fit) {
  nlohmann::json j;
  j["lags"] = res.lags;
  j["r"] = res.r;
  j["single_chain"] = res.single_chain;
  j["status"] = fit.status == MixingStatus::resolved ? "resolved" : "unresolved";
  if (fit.status == MixingStatus::resolved) {
    j["sigma2"] = fit.sigma2;
    j["relaxation_sweeps"] = fit.relaxation_sweeps;
    j["relaxation_convention"] = "1/(1-sigma2), sweeps";
  }
  j["fit_r2"] = fit.fit_r2;
  j["fit_window"] = {fit.window.first, fit.window.second};
  if (!fit.reason.empty()) j["reason"] = fit.reason;
  return j;
}

std::string autocorr_to_csv(const AutocorrResult& res) {
  std::ostringstream os;
  os.precision(10);
  os << "lag,r\n";
  for (std::size_t i = 0; i < res.lags.size(); ++i) os << res.lags[i] << ',' << res.r[i] << '\n';
  return os.str();
}

}  // namespace dtm
