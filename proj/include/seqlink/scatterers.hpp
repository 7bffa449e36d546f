// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "seqlink/raster.hpp"
#include "seqlink/stack.hpp"

namespace seqlink {

// Per-pixel amplitude mean and population variance with one scalar
// effective sample weight for the whole raster pair.
struct AmpStats {
  Raster<double> mean;
  Raster<double> var;
  double weight = 0.0;
};

struct Weighting {
  enum class Kind { Equal, ExponentialDecay };
  Kind kind = Kind::Equal;
  double decay_lambda = 0.5;  // older parts scaled by lambda^(K-1-i)
};

struct PsMask {
  Raster<std::uint8_t> mask;   // 1 = persistent scatterer
  Raster<double> dispersion;   // amplitude dispersion D_A
};

// Spatially homogeneous pixel sets: per center pixel, accepted offsets
// within the search window (self always included).
struct ShpMap {
  int rows = 0;
  int cols = 0;
  int half_x = 0;
  int half_y = 0;
  std::vector<std::vector<std::pair<std::int16_t, std::int16_t>>> offsets;

  const std::vector<std::pair<std::int16_t, std::int16_t>>& at(int r, int c) const {
    return offsets[static_cast<size_t>(r) * cols + c];
  }
  int count(int r, int c) const { return static_cast<int>(at(r, c).size()); }
};

// Amplitude statistics over a subset of layer indices; weight = subset size.
AmpStats amp_stats_from_stack(const SlcStack& stack,
                              const std::vector<int>& layer_subset);

// Streaming-equivalent merge of partial statistics. Weighted moment
// combination; tiny negative merged variances (>-1e-12) clamp to 0.
AmpStats merge_amp_stats(const std::vector<AmpStats>& parts,
                         const Weighting& weighting = {});

PsMask select_ps(const AmpStats& stats, double threshold = 0.2);

// Median lag-1 sample coherence magnitude across consecutive layers of the
// subset; 0 when fewer than two layers. Feeds the GLRT null so the test
// keeps its size on temporally correlated speckle.
double lag1_coherence(const SlcStack& stack, const std::vector<int>& layer_subset);

inline constexpr std::uint64_t kGlrtCalibrationSeed = 7777;

// Two-sample likelihood-ratio test between center and neighbor statistics.
// The threshold is the (1-alpha) quantile of the statistic under an
// equal-distribution null of speckle amplitudes (AR(1) circular Gaussian
// draws with the given lag-1 coherence), calibrated by Monte Carlo at the
// current weight. An iid null (rho1 = 0) badly under-sizes the test on
// correlated records, so callers should pass their measured lag-1 value.
ShpMap glrt_shp(const AmpStats& stats, int half_x, int half_y, double alpha = 0.05,
                int calibration_trials = 200000,
                std::uint64_t calibration_seed = kGlrtCalibrationSeed, double rho1 = 0.0);

// Exposed for testing: the GLRT statistic and its calibrated threshold.
double glrt_statistic(double mean_c, double var_c, double mean_n, double var_n);
double glrt_threshold(int n_samples, double alpha, int trials = 200000,
                      std::uint64_t seed = kGlrtCalibrationSeed, double rho1 = 0.0);

}  // namespace seqlink
