// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "seqlink/raster.hpp"

namespace seqlink {

// Interferogram network over a date axis. Pairs hold indices into `dates`;
// the incidence matrix has one column per date except the first (the
// network reference), +1 at the secondary and -1 at the reference date.
struct IfgNetwork {
  std::vector<int> dates;                      // days, strictly increasing
  std::vector<std::pair<int, int>> pairs;      // (ref idx, sec idx), ref < sec
  Eigen::MatrixXd incidence;                   // n_pairs x (n_dates - 1)

  int n_pairs() const { return static_cast<int>(pairs.size()); }
  int n_dates() const { return static_cast<int>(dates.size()); }
};

// All pairs (i, k) with 1 <= k - i <= 3 in date order.
IfgNetwork build_nearest3(const std::vector<int>& dates);

// Pairs whose dates are both among the newest `newest_count` dates, as a
// standalone network referenced to the earliest retained date. Also
// returns the retained global date indices.
IfgNetwork forward_subset(const IfgNetwork& net, int newest_count,
                          std::vector<int>* kept_date_idx = nullptr);

// Wrapped pair phases from per-date phase rasters: wrap(phi_k - phi_i).
std::vector<Raster<double>> reform_interferograms(
    const std::vector<Raster<double>>& date_phase, const IfgNetwork& net);

// Unwrapped pair stack plus bookkeeping rasters.
struct UnwrappedStack {
  std::vector<Raster<double>> unwrapped;        // one per pair
  std::vector<Raster<double>> quality;          // one per pair
  std::vector<Raster<std::int32_t>> cycle_map;  // injected/implied 2*pi counts
  Raster<std::int32_t> components;              // 0 = below threshold/injected
};

struct OracleErrorSpec {
  double fraction = 0.0;       // fraction of pixels receiving cycle errors
  int region_size = 8;         // square patch side
  std::vector<int> multiples = {-1, 1};
  std::uint64_t seed = 1;
};

// Truth-guided unwrapper: exact unwrapping (truth difference plus wrapped
// residual) with optional injected 2*pi patches in contiguous regions.
UnwrappedStack oracle_unwrap(const std::vector<Raster<double>>& wrapped,
                             const std::vector<Raster<double>>& truth_diff,
                             const std::vector<Raster<double>>& quality,
                             const OracleErrorSpec& spec = {});

// Quality-guided flood fill: seeds at the quality maximum of each connected
// region above the threshold, integrates wrapped gradients in descending
// quality order (4-connectivity). Below-threshold pixels keep their wrapped
// value and component label 0.
UnwrappedStack spatial_unwrap(const std::vector<Raster<double>>& wrapped,
                              const std::vector<Raster<double>>& quality,
                              double quality_threshold = 0.0);

// Pixel closest to the centroid of {gamma_t > threshold within the largest
// component}; row-major tie-break. Throws DataError when no candidate
// exists (message suggests lowering the threshold).
std::pair<int, int> select_reference_pixel(const Raster<double>& temporal_coherence,
                                           const Raster<std::int32_t>& components,
                                           double threshold = 0.95);

}  // namespace seqlink
