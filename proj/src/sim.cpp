// SPDX-License-Identifier: Apache-2.0
#include "seqlink/sim.hpp"

#include <cmath>
#include <random>

#include "seqlink/errors.hpp"
#include "seqlink/parallel.hpp"

namespace seqlink {

namespace {

// splitmix64; used to decorrelate derived seeds before feeding mt19937_64.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::VectorXcd draw_standard_ccg(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXcd e(n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    double re = normal(rng);
    double im = normal(rng);
    e(i) = std::complex<double>(re * inv_sqrt2, im * inv_sqrt2);
  }
  return e;
}

// Cholesky when positive definite, otherwise eigendecomposition square root
// with negative eigenvalues clipped at 0 (tolerance 1e-10 of the largest).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& corr) {
  if (corr.rows() != corr.cols()) throw DataError("correlation matrix must be square");
  Eigen::MatrixXd sym = 0.5 * (corr + corr.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of correlation matrix failed");
  Eigen::VectorXd ev = es.eigenvalues();
  double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10 * scale)
      throw NumericalError("correlation matrix is not positive semidefinite");
    // Noise-level magnitudes also drop to zero: their square roots (~1e-8)
    // would otherwise leak into draws from singular correlations.
    ev(i) = ev(i) < 1e-12 * scale ? 0.0 : ev(i);
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

// Separable Gaussian blur with reflected boundaries, then standardization
// to zero mean / unit std so callers can scale exactly.
void smooth_and_standardize(Raster<double>& field, double sigma_px) {
  const int rows = field.rows(), cols = field.cols();
  if (sigma_px <= 0.0 || rows * cols < 2) return;
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
    kernel[static_cast<size_t>(i + radius)] = v;
    ksum += v;
  }
  for (auto& v : kernel) v /= ksum;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - i - 1;
    }
    return i;
  };

  Raster<double> tmp(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<size_t>(k + radius)] * field(r, reflect(c + k, cols));
      tmp(r, c) = acc;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[static_cast<size_t>(k + radius)] * tmp(reflect(r + k, rows), c);
      field(r, c) = acc;
    }

  double mean = 0.0;
  for (const double v : field.storage()) mean += v;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (const double v : field.storage()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(field.size());
  double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : field.storage()) v = (v - mean) * inv_std;
}

}  // namespace

double CoherenceModel::rho(double dt_days) const {
  return (rho0 - rho_inf) * std::exp(-std::abs(dt_days) / tau_days) + rho_inf;
}

Eigen::MatrixXd correlation_matrix(const CoherenceModel& model,
                                   const std::vector<int>& dates) {
  const int n = static_cast<int>(dates.size());
  if (n == 0) throw DataError("correlation_matrix needs at least one date");
  if (model.tau_days <= 0.0) throw ConfigError("tau_days must be positive");
  if (model.rho0 < model.rho_inf || model.rho0 > 1.0 || model.rho_inf < 0.0)
    throw ConfigError("coherence model requires 0 <= rhoInf <= rho0 <= 1");
  Eigen::MatrixXd corr(n, n);
  for (int m = 0; m < n; ++m) {
    corr(m, m) = 1.0;
    for (int k = m + 1; k < n; ++k) {
      double rho = model.rho(static_cast<double>(dates[k] - dates[m]));
      corr(m, k) = rho;
      corr(k, m) = rho;
    }
  }
  return corr;
}

TruthScene build_truth_scene(int rows, int cols, const std::vector<int>& dates,
                             double bowl_rate_rad_yr, double tropo_std,
                             std::uint64_t seed, const TruthOptions& opt) {
  if (rows <= 0 || cols <= 0) throw DataError("truth scene shape must be positive");
  if (dates.empty()) throw DataError("truth scene needs at least one date");
  for (size_t i = 1; i < dates.size(); ++i)
    if (dates[i] <= dates[i - 1]) throw DataError("dates must be strictly increasing");
  if (tropo_std < 0.0) throw ConfigError("troposphere std must be non-negative");

  TruthScene scene;
  scene.dates = dates;
  scene.bowl_rate_rad_yr = bowl_rate_rad_yr;
  scene.bowl_profile = Raster<double>(rows, cols);
  const double sigma = opt.bowl_sigma_frac * cols;
  const double cr = opt.bowl_center_row_frac * (rows - 1);
  const double cc = opt.bowl_center_col_frac * (cols - 1);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      scene.bowl_profile(r, c) = std::exp(-0.5 * d2 / (sigma * sigma));
    }

  const int n = static_cast<int>(dates.size());
  scene.phase.assign(static_cast<size_t>(n), Raster<double>(rows, cols));
  scene.troposphere.assign(static_cast<size_t>(n), Raster<double>(rows, cols));
  const double sigma_tropo_px = opt.tropo_corr_frac * cols;
  for (int d = 1; d < n; ++d) {
    Raster<double>& tropo = scene.troposphere[static_cast<size_t>(d)];
    if (tropo_std > 0.0) {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(d)));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& v : tropo.storage()) v = normal(rng);
      smooth_and_standardize(tropo, sigma_tropo_px);
      for (double& v : tropo.storage()) v *= tropo_std;
    }
    const double years = static_cast<double>(dates[static_cast<size_t>(d)] - dates[0]) / 365.25;
    Raster<double>& phase = scene.phase[static_cast<size_t>(d)];
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        phase(r, c) = bowl_rate_rad_yr * years * scene.bowl_profile(r, c) + tropo(r, c);
  }
  return scene;
}

CcgSampler::CcgSampler(const Eigen::MatrixXd& corr) : factor_(psd_factor(corr)) {}

Eigen::VectorXcd CcgSampler::draw(const Eigen::VectorXd& true_phase,
                                  std::uint64_t seed) const {
  const int n = static_cast<int>(factor_.rows());
  if (true_phase.size() != n)
    throw DataError("true phase length must match correlation size");
  Eigen::VectorXcd w = factor_ * draw_standard_ccg(n, seed);
  for (int i = 0; i < n; ++i)
    w(i) *= std::complex<double>(std::cos(true_phase(i)), std::sin(true_phase(i)));
  return w;
}

Eigen::VectorXcd sample_ccg(const Eigen::MatrixXd& corr,
                            const Eigen::VectorXd& true_phase, std::uint64_t seed) {
  return CcgSampler(corr).draw(true_phase, seed);
}

SlcStack simulate_stack(const CoherenceModel& model, const TruthScene& truth,
                        std::uint64_t seed, int threads) {
  const int n = static_cast<int>(truth.dates.size());
  const int rows = truth.rows(), cols = truth.cols();
  CcgSampler sampler(correlation_matrix(model, truth.dates));

  SlcStack stack;
  stack.dates = truth.dates;
  stack.kinds.assign(static_cast<size_t>(n), LayerKind{});
  stack.layers.assign(static_cast<size_t>(n),
                      Raster<std::complex<double>>(rows, cols));

  parallel_for(rows, threads, [&](int r) {
    Eigen::VectorXd phase(n);
    for (int c = 0; c < cols; ++c) {
      for (int d = 0; d < n; ++d) phase(d) = truth.phase[static_cast<size_t>(d)](r, c);
      std::uint64_t px_seed =
          mix_seed(seed, static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(cols) + c);
      Eigen::VectorXcd z = sampler.draw(phase, px_seed);
      for (int d = 0; d < n; ++d) stack.layers[static_cast<size_t>(d)](r, c) = z(d);
    }
  });
  return stack;
}

Eigen::VectorXd crlb_phase_std(const Eigen::MatrixXd& gamma, int looks,
                               int ref_index) {
  const int n = static_cast<int>(gamma.rows());
  if (gamma.cols() != n || n < 2) throw DataError("gamma must be square, N >= 2");
  if (looks < 1) throw DataError("looks must be >= 1");
  if (ref_index < 0 || ref_index >= n) throw DataError("reference index out of range");

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(gamma);
  Eigen::MatrixXd inv = lu.inverse();
  if (!inv.allFinite() || lu.rcond() < 1e-15)
    throw NumericalError("gamma is singular; cannot evaluate the phase bound");

  // Fisher information for the phase parameters; reference row/col dropped.
  Eigen::MatrixXd fisher =
      2.0 * looks * (gamma.cwiseProduct(inv) - Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd reduced(n - 1, n - 1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == ref_index) continue;
    for (int k = 0, rk = 0; k < n; ++k) {
      if (k == ref_index) continue;
      reduced(ri, rk) = fisher(i, k);
      ++rk;
    }
    ++ri;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  if (es.info() != Eigen::Success)
    throw NumericalError("Fisher information eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv_ev(ev.size());
  for (int i = 0; i < ev.size(); ++i) inv_ev(i) = ev(i) > tol ? 1.0 / ev(i) : 0.0;
  Eigen::MatrixXd cov =
      es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();

  Eigen::VectorXd out(n);
  out(ref_index) = 0.0;
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == ref_index) continue;
    out(i) = std::sqrt(std::max(cov(ri, ri), 0.0));
    ++ri;
  }
  return out;
}

}  // namespace seqlink
