// SPDX-License-Identifier: Apache-2.0
#include "seqlink/inversion.hpp"

#include <cmath>
#include <limits>

#include "seqlink/errors.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

L1Problem::L1Problem(const Eigen::MatrixXd& a) : L1Problem(a, Options()) {}

L1Problem::L1Problem(const Eigen::MatrixXd& a, const Options& opt)
    : a_(a), opt_(opt) {
  if (a.rows() < a.cols() || a.cols() < 1)
    throw DataError("design matrix must be tall with at least one column");
  if (opt.rho <= 0.0) throw ConfigError("ADMM rho must be positive");
  chol_.compute(a_.transpose() * a_);
  if (chol_.info() != Eigen::Success)
    throw NumericalError("A^T A is not positive definite; network is disconnected");
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double kappa) {
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    double a = v(i);
    out(i) = a > kappa ? a - kappa : (a < -kappa ? a + kappa : 0.0);
  }
  return out;
}

L1Problem::Solution L1Problem::solve(const Eigen::VectorXd& b,
                                     const Solution* warm_start) const {
  const int m = static_cast<int>(a_.rows());
  const int n = static_cast<int>(a_.cols());
  if (b.size() != m) throw DataError("observation vector length mismatch");

  Solution s;
  s.z = warm_start && warm_start->z.size() == m ? warm_start->z
                                                : Eigen::VectorXd::Zero(m);
  s.u = warm_start && warm_start->u.size() == m ? warm_start->u
                                                : Eigen::VectorXd::Zero(m);
  const double rho = opt_.rho;
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  Eigen::VectorXd ax = Eigen::VectorXd::Zero(m);
  for (s.iterations = 1; s.iterations <= opt_.max_iter; ++s.iterations) {
    s.x = chol_.solve(a_.transpose() * (b + s.z - s.u));
    ax = a_ * s.x;
    Eigen::VectorXd z_old = s.z;
    s.z = soft_threshold(ax - b + s.u, 1.0 / rho);
    s.u += ax - b - s.z;

    double primal = (ax - b - s.z).norm();
    double dual = rho * (a_.transpose() * (s.z - z_old)).norm();
    double eps_primal =
        sqrt_m * opt_.tol_abs +
        opt_.tol_rel * std::max({ax.norm(), s.z.norm(), b.norm()});
    double eps_dual =
        sqrt_n * opt_.tol_abs + opt_.tol_rel * rho * (a_.transpose() * s.u).norm();
    if (primal <= eps_primal && dual <= eps_dual) {
      s.converged = true;
      break;
    }
  }
  if (s.iterations > opt_.max_iter) s.iterations = opt_.max_iter;
  return s;
}

Eigen::VectorXd lsq_baseline(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (b.size() != a.rows()) throw DataError("observation vector length mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols())
    throw NumericalError("design matrix is rank deficient; network is disconnected");
  return qr.solve(b);
}

void spatial_reference(std::vector<Raster<double>>& pair_rasters, int ref_row,
                       int ref_col) {
  for (auto& raster : pair_rasters) {
    if (!raster.in_bounds(ref_row, ref_col))
      throw DataError("reference pixel outside raster");
    double ref = raster(ref_row, ref_col);
    for (double& v : raster.storage()) v -= ref;
  }
}

ResidualMask mask_unwrap_errors(const std::vector<Raster<double>>& residuals,
                                double tol) {
  if (tol <= 0.0) throw ConfigError("residual tolerance must be positive");
  ResidualMask mask;
  mask.non_integer.reserve(residuals.size());
  mask.integer_error.reserve(residuals.size());
  for (const auto& res : residuals) {
    Raster<std::uint8_t> non_int(res.rows(), res.cols(), 0);
    Raster<std::uint8_t> int_err(res.rows(), res.cols(), 0);
    for (int r = 0; r < res.rows(); ++r)
      for (int c = 0; c < res.cols(); ++c) {
        double v = res(r, c);
        long long k = nearest_cycle(v);
        if (std::abs(v - kTwoPi * k) > tol) non_int(r, c) = 1;
        if (k != 0) int_err(r, c) = 1;
      }
    mask.non_integer.push_back(std::move(non_int));
    mask.integer_error.push_back(std::move(int_err));
  }
  return mask;
}

VelocityField fit_velocity(const std::vector<Raster<double>>& date_phase,
                           const std::vector<int>& dates) {
  if (date_phase.size() != dates.size())
    throw DataError("velocity fit needs one raster per date");
  if (dates.size() < 2) throw DataError("velocity fit needs at least two dates");
  const int rows = date_phase.front().rows(), cols = date_phase.front().cols();

  VelocityField out;
  out.rad_per_year = Raster<double>(rows, cols,
                                    std::numeric_limits<double>::quiet_NaN());
  out.valid = Raster<std::uint8_t>(rows, cols, 0);
  std::vector<double> years(dates.size());
  for (size_t d = 0; d < dates.size(); ++d)
    years[d] = static_cast<double>(dates[d] - dates[0]) / 365.25;

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
      int n = 0;
      for (size_t d = 0; d < dates.size(); ++d) {
        double p = date_phase[d](r, c);
        if (!std::isfinite(p)) continue;
        st += years[d];
        sp += p;
        stt += years[d] * years[d];
        stp += years[d] * p;
        ++n;
      }
      if (n < 2) continue;
      double denom = n * stt - st * st;
      if (denom <= 0.0) continue;
      out.rad_per_year(r, c) = (n * stp - st * sp) / denom;
      out.valid(r, c) = 1;
    }
  return out;
}

double mm_per_radian(double wavelength_mm) {
  if (wavelength_mm <= 0.0) throw ConfigError("wavelength must be positive");
  return wavelength_mm / (4.0 * std::numbers::pi_v<double>);
}

}  // namespace seqlink
