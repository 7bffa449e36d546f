// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "seqlink/raster.hpp"
#include "seqlink/stack.hpp"

namespace seqlink {

// Exponential temporal decorrelation: rho(t) = (rho0 - rhoInf)*exp(-t/tau) + rhoInf.
struct CoherenceModel {
  double rho0 = 1.0;
  double rho_inf = 0.0;
  double tau_days = 60.0;

  double rho(double dt_days) const;
};

// Correlation matrix over acquisition dates. Off-diagonals follow the model;
// the diagonal is identically 1.
Eigen::MatrixXd correlation_matrix(const CoherenceModel& model,
                                   const std::vector<int>& dates);

struct TruthOptions {
  double bowl_sigma_frac = 1.0 / 6.0;   // Gaussian bowl sigma as fraction of width
  double bowl_center_row_frac = 0.5;    // bowl center, fractions of shape
  double bowl_center_col_frac = 0.5;
  double tropo_corr_frac = 0.25;        // smoothing kernel sigma as fraction of width
};

struct TruthScene {
  std::vector<int> dates;
  std::vector<Raster<double>> phase;        // total truth phase, date 1 == 0
  std::vector<Raster<double>> troposphere;  // tropo component only, date 1 == 0
  Raster<double> bowl_profile;              // unit-peak deformation shape
  double bowl_rate_rad_yr = 0.0;

  int rows() const { return bowl_profile.rows(); }
  int cols() const { return bowl_profile.cols(); }
};

// Deformation bowl plus per-date smooth troposphere. The first date's phase
// is identically zero; tropo fields are standardized to the requested
// spatial std.
TruthScene build_truth_scene(int rows, int cols, const std::vector<int>& dates,
                             double bowl_rate_rad_yr, double tropo_std,
                             std::uint64_t seed, const TruthOptions& opt = {});

// Draws one circular complex Gaussian vector with the given correlation and
// applies deterministic phases: z_i = w_i * exp(j*phase_i).
Eigen::VectorXcd sample_ccg(const Eigen::MatrixXd& corr,
                            const Eigen::VectorXd& true_phase, std::uint64_t seed);

// Precomputed matrix square root for repeated CCG draws over a scene.
class CcgSampler {
 public:
  explicit CcgSampler(const Eigen::MatrixXd& corr);
  Eigen::VectorXcd draw(const Eigen::VectorXd& true_phase, std::uint64_t seed) const;

 private:
  Eigen::MatrixXd factor_;
};

// Full synthetic stack: per-pixel CCG draws carrying the truth phases.
// Per-pixel seeds derive from (seed, pixel index) so threading cannot
// reorder the stream.
SlcStack simulate_stack(const CoherenceModel& model, const TruthScene& truth,
                        std::uint64_t seed, int threads = 1);

// Hybrid Cramer-Rao standard deviation per date for phase linking with
// `looks` samples and true coherence `gamma`. Entry at ref_index is 0.
Eigen::VectorXd crlb_phase_std(const Eigen::MatrixXd& gamma, int looks,
                               int ref_index = 0);

}  // namespace seqlink
