#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dtm/forward_process.hpp"
#include "dtm/rng.hpp"

using namespace dtm;

namespace {

/// P(same) from the matrix exponential of the two-state generator with rate kappa/2 per direction.
double generator_same(double kappa, double dt) {
  Eigen::Matrix2d q;
  q << -0.5 * kappa, 0.5 * kappa, 0.5 * kappa, -0.5 * kappa;
  // exp(q dt) via the symmetric eigendecomposition; eigenvalues 0 and -kappa dt.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q * dt);
  const Eigen::Matrix2d e = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                            es.eigenvectors().transpose();
  return e(0, 0);
}

double agreement(const SpinMatrix& a, const SpinMatrix& b) {
  return (a.cast<double>().array() * b.cast<double>().array()).mean() * 0.5 + 0.5;
}

SpinMatrix random_spins(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  const CounterRng rng(seed);
  SpinMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = (rng.bits(r, c) >> 63) ? 1 : -1;
  return m;
}

}  // namespace

TEST_CASE("gamma examples") {
  const double kappa = std::log(2.0);  // e^{-kappa dt} = 0.5 at dt = 1
  CHECK(gamma(kappa, 1.0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(gamma(1.0, 1e3) < 1e-12);
  CHECK(gamma(1.0, 1e-30) == kGammaCap);
  CHECK(std::isfinite(gamma(1.0, 1e-300)));
  CHECK_THROWS_AS(gamma(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gamma(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("gamma agrees with the matrix-exponential kernel") {
  for (double kdt : {0.05, 0.3, 1.0, 2.5}) {
    const double same = generator_same(1.0, kdt);
    CHECK(flip_kernel(gamma(1.0, kdt)) == doctest::Approx(same).epsilon(1e-10));
  }
}

TEST_CASE("flip_kernel examples") {
  CHECK(flip_kernel(0.0) == doctest::Approx(0.5));
  CHECK(flip_kernel(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(flip_kernel(1e6) == 1.0);
}

TEST_CASE("flip_kernel(gamma) equals the closed form across dt") {
  for (double dt = 1e-3; dt <= 10.0; dt *= 1.7)
    for (double kappa : {0.2, 1.0, 1.5}) {
      // Below the cap only; the cap is exercised separately.
      if (gamma(kappa, dt) >= kGammaCap) continue;
      CHECK(std::abs(flip_kernel(gamma(kappa, dt)) - same_probability(kappa, dt)) < 1e-12);
    }
}

TEST_CASE("gamma is positive and decreases with step length") {
  double last = kGammaCap + 1;
  for (double dt = 0.01; dt < 20; dt *= 1.5) {
    const double g = gamma(1.0, dt);
    CHECK(g > 0);
    CHECK(g < last);
    last = g;
  }
}

TEST_CASE("noise_dataset per-bit agreement") {
  const SpinMatrix data = random_spins(2000, 50, 1);  // 1e5 entries
  const double n = static_cast<double>(data.size());
  SUBCASE("Gamma = ln 3 gives 0.75") {
    const auto s = NoiseSchedule::uniform(1, std::log(2.0), std::log(2.0));
    const double a = agreement(data, noise_dataset(data, s, 1, 7));
    CHECK(std::abs(a - 0.75) < 3 * std::sqrt(0.75 * 0.25 / n));
  }
  SUBCASE("Gamma ~ 0 gives 0.5") {
    const auto s = NoiseSchedule::uniform(1, 40.0, 40.0);
    const double a = agreement(data, noise_dataset(data, s, 1, 8));
    CHECK(std::abs(a - 0.5) < 3 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("pixels and labels use their own rates") {
  const SpinMatrix data = random_spins(4000, 30, 2);
  const auto s = NoiseSchedule::uniform(2, 1.2, 0.2);
  const auto noised = noise_dataset(data, s, 2, 3, 10);
  const SpinMatrix px = data.leftCols(20), lx = data.rightCols(10);
  const SpinMatrix pn = noised.leftCols(20), ln = noised.rightCols(10);
  const double ep = same_probability(1.2, 2.0), el = same_probability(0.2, 2.0);
  CHECK(std::abs(agreement(px, pn) - ep) < 3 * std::sqrt(ep * (1 - ep) / px.size()));
  CHECK(std::abs(agreement(lx, ln) - el) < 3 * std::sqrt(el * (1 - el) / lx.size()));
}

TEST_CASE("semigroup: two short jumps equal one long jump in distribution") {
  const SpinMatrix data = random_spins(2000, 50, 4);
  const auto s = NoiseSchedule::uniform(3, 0.7, 0.2);
  const auto two = advance(advance(data, s, 0, 1, 10), s, 1, 3, 11);
  const auto one = advance(data, s, 0, 3, 12);
  const double p = same_probability(0.7, 3.0);
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(data.size()));
  CHECK(std::abs(agreement(data, two) - p) < 3 * se);
  CHECK(std::abs(agreement(data, one) - p) < 3 * se);
  CHECK(std::abs(agreement(data, two) - agreement(data, one)) < 3 * std::sqrt(2.0) * se);
}

TEST_CASE("stationarity: repeated noising gives fair bits (chi-square at 1%)") {
  SpinMatrix x = SpinMatrix::Ones(5000, 20);
  const auto s = NoiseSchedule::uniform(1, 1.0, 1.0);
  for (int k = 0; k < 20; ++k) x = advance(x, s, 0, 1, 100 + k);
  // chi-square with 20 dof over per-column +1 counts; 1% critical value 37.57.
  double chi2 = 0.0;
  const double expect = 2500.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double ones = (x.col(c).array() > 0).count();
    chi2 += (ones - expect) * (ones - expect) / expect + (ones - expect) * (ones - expect) / expect;
  }
  CHECK(chi2 < 37.57);
}

TEST_CASE("noise_dataset rejects non-spins and bad steps") {
  SpinMatrix bad = SpinMatrix::Ones(2, 2);
  bad(0, 1) = 0;
  const auto s = NoiseSchedule::uniform(2, 1.0);
  CHECK_THROWS_AS(noise_dataset(bad, s, 1, 0), std::invalid_argument);
  CHECK_THROWS(noise_dataset(SpinMatrix::Ones(2, 2), s, 3, 0));
  CHECK_THROWS(noise_dataset(SpinMatrix::Ones(2, 2), s, 0, 0));
}

TEST_CASE("noising is deterministic given the seed and row-splittable") {
  const SpinMatrix data = random_spins(100, 16, 5);
  const auto s = NoiseSchedule::uniform(4, 1.0);
  const auto a = noise_dataset(data, s, 2, 9);
  CHECK(a == noise_dataset(data, s, 2, 9));
  CHECK(a != noise_dataset(data, s, 2, 10));
}

TEST_CASE("coupling_for_step") {
  const auto s = NoiseSchedule::uniform(4, 1.0, 0.2);
  const auto c = coupling_for_step(s, 2, 6, 3);
  REQUIRE(c.size() == 9);
  for (int k = 0; k < 6; ++k) CHECK(c[k] == doctest::Approx(gamma(1.0, 1.0) / 2).epsilon(1e-15));
  for (int k = 6; k < 9; ++k) CHECK(c[k] == doctest::Approx(gamma(0.2, 1.0) / 2).epsilon(1e-15));
  const auto u = coupling_for_step(NoiseSchedule::uniform(2, 0.5, 0.5), 1, 5, 0);
  CHECK((u.array() == u[0]).all());
  CHECK_THROWS_AS(coupling_for_step(s, 5, 6, 3), std::out_of_range);
  CHECK_THROWS_AS(coupling_for_step(s, 0, 6, 3), std::out_of_range);
}

TEST_CASE("schedules: geometric grid, guidance ranges, json round trip") {
  const auto g = NoiseSchedule::geometric(3, 1.0, 0.2, 0.5, 2.0);
  REQUIRE(g.times.size() == 4);
  CHECK(g.step_dt(1) == doctest::Approx(0.5));
  CHECK(g.step_dt(3) == doctest::Approx(2.0));
  CHECK(g.step_gamma(1, VariableClass::pixel) > g.step_gamma(3, VariableClass::pixel));
  CHECK(NoiseSchedule::uniform(4, 1.0, 0.2).within_guidance());
  CHECK_FALSE(NoiseSchedule::uniform(4, 3.0, 0.2).within_guidance());
  const auto back = schedule_from_json(schedule_to_json(g));
  CHECK(back.steps == 3);
  CHECK(back.times == g.times);
  CHECK(back.kappa_label == g.kappa_label);
  NoiseSchedule broken = g;
  broken.times[2] = broken.times[1];
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}
