// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "seqlink/network.hpp"
#include "seqlink/raster.hpp"

namespace seqlink {

// min_x ||Ax - b||_1 solved by ADMM with the Cholesky factor of A^T A
// computed once at problem setup.
class L1Problem {
 public:
  struct Options {
    double rho = 1.0;
    double tol_abs = 1e-6;
    double tol_rel = 1e-4;
    int max_iter = 1000;
  };

  explicit L1Problem(const Eigen::MatrixXd& a);
  L1Problem(const Eigen::MatrixXd& a, const Options& opt);

  struct Solution {
    Eigen::VectorXd x;
    Eigen::VectorXd z;  // split variable, for warm starts
    Eigen::VectorXd u;  // scaled dual, for warm starts
    int iterations = 0;
    bool converged = false;
  };

  // Warm start from a previous solution's (z, u) when provided.
  Solution solve(const Eigen::VectorXd& b,
                 const Solution* warm_start = nullptr) const;

  const Eigen::MatrixXd& a() const { return a_; }
  const Options& options() const { return opt_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Options opt_;
};

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double kappa);

// Unweighted least squares through the same incidence matrix.
Eigen::VectorXd lsq_baseline(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

// Subtract the reference pixel's value from every pixel, per pair raster.
void spatial_reference(std::vector<Raster<double>>& pair_rasters, int ref_row,
                       int ref_col);

struct ResidualMask {
  std::vector<Raster<std::uint8_t>> non_integer;    // residual far from 2*pi grid
  std::vector<Raster<std::uint8_t>> integer_error;  // nonzero nearest cycle
};

// Classify inversion residuals r = b - A x per pair and pixel.
ResidualMask mask_unwrap_errors(const std::vector<Raster<double>>& residuals,
                                double tol = 0.5);

struct VelocityField {
  Raster<double> rad_per_year;
  Raster<std::uint8_t> valid;
};

// Per-pixel ordinary least squares rate of phase against decimal years.
// NaN epochs are skipped; pixels with fewer than two valid epochs are
// flagged invalid.
VelocityField fit_velocity(const std::vector<Raster<double>>& date_phase,
                           const std::vector<int>& dates);

// Two-way phase-to-displacement scaling (millimetres per radian).
double mm_per_radian(double wavelength_mm);

}  // namespace seqlink
