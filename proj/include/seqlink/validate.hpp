// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "seqlink/config.hpp"
#include "seqlink/inversion.hpp"
#include "seqlink/pipeline.hpp"
#include "seqlink/sim.hpp"
#include "seqlink/stack.hpp"

namespace seqlink {

// Per-date phase RMSE (radians) against simulated truth for the estimator
// family, plus the hybrid bound at the realized look count. All entries are
// indexed by date; entry 0 (the reference date) is zero by construction.
struct RmseCurves {
  std::vector<int> dates;             // days
  std::vector<double> nrt;            // sequential mini-stack estimator
  std::vector<double> datum_adjusted; // independent batches + datum adjustment
  std::vector<double> multilooked;    // full-stack adaptive multilook
  std::vector<double> noise_floor;    // single-look interferogram
  std::vector<double> crlb;           // bound at mean_looks
  double mean_looks = 0.0;
};

// Simulate per cfg.sim and score the estimators on the wrapped linked
// phases (spatially de-meaned error, RMSE over pixels).
RmseCurves rmse_study(const PipelineConfig& cfg);

// Velocity-residual spatial closure check: random pixel pairs binned by
// separation; a bin passes when the required fraction of pairs differs by
// less than the threshold (millimetres per year).
struct Va2Bin {
  double min_km = 0.0;
  double max_km = 0.0;
  int count = 0;
  double frac_below = 0.0;
  bool pass = false;
};

struct ResidualReport {
  std::vector<Va2Bin> bins;   // only populated bins
  int pairs_drawn = 0;
  bool overall_pass = false;  // every populated bin passes
};

ResidualReport va2_residuals(const Raster<double>& velocity_rad_yr,
                             const Raster<std::uint8_t>& valid,
                             double pixel_spacing_m, const Va2Config& cfg);

// Same check for sparse point time series (e.g. corner reflectors or GNSS
// converted to line of sight): per-station least-squares velocity first.
struct PointSeries {
  std::string station_id;
  double x_m = 0.0;
  double y_m = 0.0;
  std::vector<int> dates;      // days
  std::vector<double> los_mm;
};

// CSV columns: station_id,x_m,y_m,date,los_mm (header required).
std::vector<PointSeries> load_point_series(const std::string& csv_path);

ResidualReport va2_point_series(const std::vector<PointSeries>& points,
                                const Va2Config& cfg);

// Forward/historical agreement: process the archive historically, ingest
// the remaining dates one at a time, and compare both forward output
// options against the full historical series at each new date.
struct ConsistencyRow {
  int date_idx = 0;
  int date = 0;              // days
  double max_abs_1 = 0.0;    // option 1 chain vs historical
  double rms_1 = 0.0;
  double max_abs_2 = 0.0;    // option 2 vs historical
  double rms_2 = 0.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  int n_archive_dates = 0;
};

ConsistencyReport forward_vs_historical(const PipelineConfig& cfg,
                                        const SlcStack& stack,
                                        const TruthScene* truth,
                                        int n_archive_dates = -1);

// CSV reports.
void write_rmse_csv(const std::string& path, const RmseCurves& curves);
void write_va2_csv(const std::string& path, const ResidualReport& report);
void write_consistency_csv(const std::string& path, const ConsistencyReport& report);

}  // namespace seqlink
