// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "seqlink/parallel.hpp"
#include "seqlink/raster.hpp"
#include "seqlink/wrap.hpp"

using namespace seqlink;

namespace {
constexpr double kPi = std::numbers::pi_v<double>;
}

TEST_CASE("wrap_phase maps onto (-pi, pi] and preserves the phasor") {
  CHECK(wrap_phase(0.0) == doctest::Approx(0.0));
  CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));  // boundary folds up
  CHECK(wrap_phase(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(kTwoPi) == doctest::Approx(0.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    double phi = u(rng);
    double w = wrap_phase(phi);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    // same point on the circle
    CHECK(std::abs(std::remainder(phi - w, kTwoPi)) < 1e-12);
  }
}

TEST_CASE("nearest_cycle rounds the 2*pi count") {
  CHECK(nearest_cycle(0.0) == 0);
  CHECK(nearest_cycle(kTwoPi) == 1);
  CHECK(nearest_cycle(-kTwoPi) == -1);
  CHECK(nearest_cycle(3.0) == 0);     // < pi away from zero
  CHECK(nearest_cycle(3.5) == 1);     // past pi
  CHECK(nearest_cycle(7.0 * kTwoPi + 0.3) == 7);
}

TEST_CASE("unit_phasor and phase_of round-trip") {
  for (double phi : {-3.0, -1.0, 0.0, 0.5, 2.0, 3.1}) {
    auto z = unit_phasor(phi);
    CHECK(std::abs(z) == doctest::Approx(1.0));
    CHECK(phase_of(z) == doctest::Approx(phi));
  }
}

TEST_CASE("Raster shape, fill, bounds checks") {
  Raster<double> r(3, 4, 1.5);
  CHECK(r.rows() == 3);
  CHECK(r.cols() == 4);
  CHECK(r.size() == 12);
  CHECK(r(2, 3) == 1.5);
  r(1, 2) = -2.0;
  CHECK(r.at(1, 2) == -2.0);
  CHECK(r.in_bounds(0, 0));
  CHECK(!r.in_bounds(3, 0));
  CHECK(!r.in_bounds(0, -1));
  CHECK_THROWS(r.at(3, 0));

  Raster<double> s(3, 4);
  CHECK(r.same_shape(s));
  Raster<float> t(4, 3);
  CHECK(!r.same_shape(t));

  Raster<int> e;
  CHECK(e.empty());
}

TEST_CASE("Raster storage is row-major") {
  Raster<int> r(2, 3);
  int v = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = v++;
  const auto& flat = r.storage();
  for (int k = 0; k < 6; ++k) CHECK(flat[static_cast<size_t>(k)] == k);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  std::vector<int> hits(257, 0);
  parallel_for(257, 4, [&](int i) { hits[static_cast<size_t>(i)] += 1; });
  for (int h : hits) CHECK(h == 1);

  // exception from a worker surfaces at the call site
  CHECK_THROWS_AS(
      parallel_for(16, 3, [&](int i) { if (i == 7) throw std::runtime_error("x"); }),
      std::runtime_error);

  // sequential fallback gives identical coverage
  std::vector<int> seq(31, 0);
  parallel_for(31, 1, [&](int i) { seq[static_cast<size_t>(i)] += 1; });
  for (int h : seq) CHECK(h == 1);
}
