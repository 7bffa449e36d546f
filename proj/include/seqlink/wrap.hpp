// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace seqlink {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi_v<double>;

// Wrap to (-pi, pi]. std::remainder is exact for the given modulus, so
// (x - wrap_phase(x)) is an exact multiple of the double closest to 2*pi;
// closure sums of wrapped differences cancel to rounding error.
inline double wrap_phase(double x) {
  double w = std::remainder(x, kTwoPi);
  if (w <= -std::numbers::pi_v<double>) w += kTwoPi;
  return w;
}

// Nearest integer multiple of 2*pi contained in x (ties away from zero).
inline long long nearest_cycle(double x) { return std::llround(x / kTwoPi); }

inline std::complex<double> unit_phasor(double phase) {
  return {std::cos(phase), std::sin(phase)};
}

// Phase of z, or 0 for z == 0 (matches std::arg convention).
inline double phase_of(const std::complex<double>& z) { return std::arg(z); }

}  // namespace seqlink
