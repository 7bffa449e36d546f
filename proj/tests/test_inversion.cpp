// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "seqlink/inversion.hpp"
#include "seqlink/wrap.hpp"

using namespace seqlink;

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

std::vector<int> spaced_dates(int n, int step = 12) {
  std::vector<int> d(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] = 1 + i * step;
  return d;
}

// Exact L1 regression by basis enumeration: some optimum interpolates
// cols(A) rows exactly, so try every full-rank row subset.
Eigen::VectorXd l1_bruteforce(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  std::vector<int> pick(static_cast<size_t>(n));
  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<size_t>(n), 0);
  // iterate combinations via odometer
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  while (true) {
    Eigen::MatrixXd sub(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      sub.row(i) = a.row(idx[static_cast<size_t>(i)]);
      rhs(i) = b(idx[static_cast<size_t>(i)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.isInvertible()) {
      Eigen::VectorXd x = lu.solve(rhs);
      double obj = (a * x - b).lpNorm<1>();
      if (obj < best_obj) {
        best_obj = obj;
        best = x;
      }
    }
    // next combination
    int pos = n - 1;
    while (pos >= 0 && idx[static_cast<size_t>(pos)] == m - n + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<size_t>(pos)];
    for (int i = pos + 1; i < n; ++i)
      idx[static_cast<size_t>(i)] = idx[static_cast<size_t>(i - 1)] + 1;
  }
  return best;
}

}  // namespace

TEST_CASE("soft threshold shrinks toward zero") {
  Eigen::VectorXd v(5);
  v << -3.0, -0.4, 0.0, 0.4, 3.0;
  Eigen::VectorXd s = soft_threshold(v, 0.5);
  CHECK(s(0) == doctest::Approx(-2.5));
  CHECK(s(1) == doctest::Approx(0.0));
  CHECK(s(2) == doctest::Approx(0.0));
  CHECK(s(3) == doctest::Approx(0.0));
  CHECK(s(4) == doctest::Approx(2.5));
}

TEST_CASE("admm: consistent systems are recovered immediately") {
  IfgNetwork net = build_nearest3(spaced_dates(6));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  Eigen::VectorXd x_true(5);
  for (int i = 0; i < 5; ++i) x_true(i) = uni(rng);
  Eigen::VectorXd b = net.incidence * x_true;

  L1Problem prob(net.incidence);
  L1Problem::Solution sol = prob.solve(b);
  CHECK(sol.converged);
  CHECK((sol.x - x_true).cwiseAbs().maxCoeff() < 1e-6);

  // zero data stays at zero
  L1Problem::Solution zero = prob.solve(Eigen::VectorXd::Zero(net.n_pairs()));
  CHECK(zero.x.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("admm: over-determined scalar fit finds the median") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd b(3);
  b << 1.0, 2.0, 10.0;
  L1Problem prob(a);
  L1Problem::Solution sol = prob.solve(b);
  // grid-scan oracle: the l1 objective over candidate c is minimized at 2
  double best_c = 0.0, best_obj = std::numeric_limits<double>::infinity();
  for (double c = -1.0; c <= 12.0; c += 1e-3) {
    double obj = std::abs(c - 1.0) + std::abs(c - 2.0) + std::abs(c - 10.0);
    if (obj < best_obj) {
      best_obj = obj;
      best_c = c;
    }
  }
  CHECK(best_c == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.x(0) == doctest::Approx(2.0).epsilon(1e-3));
  // least squares lands on the mean instead
  CHECK(lsq_baseline(a, b)(0) == doctest::Approx(13.0 / 3.0));
}

TEST_CASE("admm: single cycle corruption leaves the solution unchanged") {
  IfgNetwork net = build_nearest3(spaced_dates(6));
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  Eigen::VectorXd x_true(5);
  for (int i = 0; i < 5; ++i) x_true(i) = uni(rng);
  Eigen::VectorXd b = net.incidence * x_true;
  Eigen::VectorXd corrupted = b;
  corrupted(7) += kTwoPi;

  L1Problem prob(net.incidence);
  Eigen::VectorXd x_clean = prob.solve(b).x;
  Eigen::VectorXd x_l1 = prob.solve(corrupted).x;
  CHECK((x_l1 - x_clean).cwiseAbs().maxCoeff() < 1e-4);

  // the corrupted pair's residual is the full injected cycle
  Eigen::VectorXd r = corrupted - net.incidence * x_l1;
  CHECK(r(7) == doctest::Approx(kTwoPi).epsilon(1e-3));
  for (int p = 0; p < net.n_pairs(); ++p)
    if (p != 7) CHECK(std::abs(r(p)) < 1e-3);

  // exact brute-force l1 oracle agrees
  Eigen::VectorXd x_bf = l1_bruteforce(net.incidence, corrupted);
  CHECK((x_l1 - x_bf).cwiseAbs().maxCoeff() < 1e-3);

  // least squares smears the error into the corrupted pair's dates
  Eigen::VectorXd x_ls = lsq_baseline(net.incidence, corrupted);
  auto [pi_, k_] = net.pairs[7];
  (void)pi_;
  double l1_err = std::abs(x_l1(k_ - 1) - x_true(k_ - 1));
  double ls_err = std::abs(x_ls(k_ - 1) - x_true(k_ - 1));
  CHECK(ls_err > l1_err);
  CHECK(ls_err > 0.1);
}

TEST_CASE("admm: translation equivariance and warm starts") {
  IfgNetwork net = build_nearest3(spaced_dates(5));
  std::mt19937_64 rng(33);
  std::normal_distribution<double> noise(0.0, 0.1);
  Eigen::VectorXd b(net.n_pairs());
  for (int p = 0; p < net.n_pairs(); ++p) b(p) = noise(rng);

  L1Problem prob(net.incidence);
  L1Problem::Solution base = prob.solve(b);
  Eigen::VectorXd t(4);
  t << 1.0, -2.0, 0.5, 3.0;
  L1Problem::Solution shifted = prob.solve(b + net.incidence * t);
  CHECK((shifted.x - (base.x + t)).cwiseAbs().maxCoeff() < 1e-4);

  // warm start from the converged splits stays at the optimum (within the
  // solver's own stopping tolerance) without extra iterations
  L1Problem::Solution warm = prob.solve(b, &base);
  CHECK((warm.x - base.x).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(warm.iterations <= base.iterations);
}

TEST_CASE("lsq baseline is exact on consistent data") {
  IfgNetwork net = build_nearest3(spaced_dates(7));
  Eigen::VectorXd x_true(6);
  x_true << 0.3, -1.2, 2.2, -0.7, 1.9, -2.8;
  Eigen::VectorXd x = lsq_baseline(net.incidence, net.incidence * x_true);
  CHECK((x - x_true).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("spatial reference zeroes the reference pixel") {
  std::vector<Raster<double>> pairs;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int p = 0; p < 4; ++p) {
    Raster<double> r(5, 5);
    for (auto& v : r.storage()) v = uni(rng);
    pairs.push_back(std::move(r));
  }
  std::vector<Raster<double>> original = pairs;
  spatial_reference(pairs, 2, 3);
  for (size_t p = 0; p < pairs.size(); ++p) {
    CHECK(pairs[p](2, 3) == doctest::Approx(0.0));
    for (size_t i = 0; i < pairs[p].size(); ++i)
      CHECK(pairs[p].storage()[i] ==
            doctest::Approx(original[p].storage()[i] - original[p](2, 3)));
  }
  // idempotent
  std::vector<Raster<double>> again = pairs;
  spatial_reference(again, 2, 3);
  for (size_t p = 0; p < pairs.size(); ++p)
    for (size_t i = 0; i < pairs[p].size(); ++i)
      CHECK(again[p].storage()[i] == doctest::Approx(pairs[p].storage()[i]));

  // adding a per-pair constant is removed by referencing
  std::vector<Raster<double>> offset = original;
  for (size_t p = 0; p < offset.size(); ++p)
    for (auto& v : offset[p].storage()) v += 0.7 * static_cast<double>(p + 1);
  spatial_reference(offset, 2, 3);
  for (size_t p = 0; p < offset.size(); ++p)
    for (size_t i = 0; i < offset[p].size(); ++i)
      CHECK(offset[p].storage()[i] == doctest::Approx(pairs[p].storage()[i]));
}

TEST_CASE("residual classification") {
  Raster<double> r(1, 5);
  r(0, 0) = 0.0;             // clean
  r(0, 1) = kTwoPi;          // pure cycle slip
  r(0, 2) = kPi;             // half cycle: non-integer
  r(0, 3) = 0.3;             // inside tolerance
  r(0, 4) = -2.0 * kTwoPi;   // double slip
  ResidualMask mask = mask_unwrap_errors({r}, 0.5);
  REQUIRE(mask.non_integer.size() == 1);

  CHECK(mask.non_integer[0](0, 0) == 0);
  CHECK(mask.integer_error[0](0, 0) == 0);
  CHECK(mask.non_integer[0](0, 1) == 0);
  CHECK(mask.integer_error[0](0, 1) == 1);
  // half-cycle deviation: rounds to k = 1, so both flags fire
  CHECK(mask.non_integer[0](0, 2) == 1);
  CHECK(mask.integer_error[0](0, 2) == 1);
  CHECK(mask.non_integer[0](0, 3) == 0);
  CHECK(mask.integer_error[0](0, 3) == 0);
  CHECK(mask.non_integer[0](0, 4) == 0);
  CHECK(mask.integer_error[0](0, 4) == 1);
}

TEST_CASE("velocity fit") {
  const int n = 6;
  std::vector<int> dates = spaced_dates(n, 60);
  std::vector<Raster<double>> phase;
  for (int d = 0; d < n; ++d) {
    double years = (dates[static_cast<size_t>(d)] - dates[0]) / 365.25;
    phase.emplace_back(2, 2, 5.0 * years);
  }
  VelocityField vel = fit_velocity(phase, dates);
  for (size_t i = 0; i < vel.rad_per_year.size(); ++i) {
    CHECK(vel.rad_per_year.storage()[i] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(vel.valid.storage()[i] == 1);
  }

  // constant series has zero rate
  std::vector<Raster<double>> flat(6, Raster<double>(2, 2, 1.3));
  VelocityField zero = fit_velocity(flat, dates);
  CHECK(zero.rad_per_year(0, 0) == doctest::Approx(0.0));

  // two epochs define the rate exactly
  std::vector<int> two_dates = {1, 366};
  std::vector<Raster<double>> two = {Raster<double>(1, 1, 0.0), Raster<double>(1, 1, 1.0)};
  VelocityField pairfit = fit_velocity(two, two_dates);
  CHECK(pairfit.rad_per_year(0, 0) == doctest::Approx(365.25 / 365.0));

  // NaN epochs are skipped; too few epochs invalidate the pixel
  std::vector<Raster<double>> gappy = phase;
  gappy[2](0, 0) = std::numeric_limits<double>::quiet_NaN();
  VelocityField skip = fit_velocity(gappy, dates);
  CHECK(skip.rad_per_year(0, 0) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(skip.valid(0, 0) == 1);

  std::vector<Raster<double>> mostly_nan(6, Raster<double>(1, 1, std::numeric_limits<double>::quiet_NaN()));
  mostly_nan[0](0, 0) = 1.0;
  VelocityField invalid = fit_velocity(mostly_nan, dates);
  CHECK(invalid.valid(0, 0) == 0);
}

TEST_CASE("phase to displacement scaling") {
  // two-way: distance = wavelength / (4*pi) per radian
  CHECK(mm_per_radian(4.0 * kPi) == doctest::Approx(1.0));
  CHECK(mm_per_radian(55.47) == doctest::Approx(55.47 / (4.0 * kPi)));
}
