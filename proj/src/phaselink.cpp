// SPDX-License-Identifier: Apache-2.0
#include "seqlink/phaselink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqlink/errors.hpp"
#include "seqlink/parallel.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

namespace {

// Pairwise-accumulated Z * Z^H over sample columns [lo, hi).
Eigen::MatrixXcd pairwise_outer(const Eigen::MatrixXcd& samples, int lo, int hi) {
  const int n = static_cast<int>(samples.rows());
  if (hi - lo <= 32) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(samples.middleCols(lo, hi - lo));
    return acc;
  }
  int mid = lo + (hi - lo) / 2;
  return pairwise_outer(samples, lo, mid) + pairwise_outer(samples, mid, hi);
}

// Unit-modulus entries; zero entries become 1 so referencing stays defined.
Eigen::VectorXcd normalize_entries(const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    double mag = std::abs(v(i));
    out(i) = mag > 0.0 ? v(i) / mag : std::complex<double>(1.0, 0.0);
  }
  return out;
}

PhaseLinkResult reference_result(const Eigen::VectorXcd& eigvec, int ref_index,
                                 double eigenvalue, LinkMethod method,
                                 bool degenerate) {
  PhaseLinkResult result;
  result.zeta = normalize_entries(eigvec);
  std::complex<double> rot = std::conj(result.zeta(ref_index));
  result.zeta *= rot;
  result.zeta(ref_index) = std::complex<double>(1.0, 0.0);
  result.reference_index = ref_index;
  result.eigenvalue = eigenvalue;
  result.method = method;
  result.degenerate = degenerate;
  return result;
}

// Deterministic start vector: unit phasors of the reference column.
Eigen::VectorXcd start_vector(const Eigen::MatrixXcd& m, int ref_index) {
  Eigen::VectorXcd v = normalize_entries(m.col(ref_index));
  v /= v.norm();
  return v;
}

// Chord distance between unit vectors after optimal global phase
// alignment; equals the angle between them to first order.
double angular_change(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  std::complex<double> dot = a.dot(b);  // conj(a) . b
  double mag = std::abs(dot);
  if (mag == 0.0) return 1.0;
  return (b - (dot / mag) * a).norm();
}

}  // namespace

SampleCoherence sample_coherence(const Eigen::MatrixXcd& samples, int used_cols) {
  const int n = static_cast<int>(samples.rows());
  const int looks = used_cols < 0 ? static_cast<int>(samples.cols()) : used_cols;
  if (looks > samples.cols()) throw DataError("used_cols exceeds sample count");
  if (n < 2 || looks < 1) throw DataError("coherence needs N >= 2 layers, L >= 1 looks");

  SampleCoherence coh;
  coh.looks = looks;
  Eigen::MatrixXcd cov = pairwise_outer(samples, 0, looks) / static_cast<double>(looks);
  cov = cov.selfadjointView<Eigen::Lower>();

  Eigen::VectorXd power = cov.diagonal().real();
  coh.valid = true;
  for (int i = 0; i < n; ++i)
    if (!(power(i) > 0.0)) coh.valid = false;
  coh.matrix = Eigen::MatrixXcd::Zero(n, n);
  if (!coh.valid) return coh;

  Eigen::VectorXd inv_root = power.cwiseSqrt().cwiseInverse();
  coh.matrix = inv_root.asDiagonal() * cov * inv_root.asDiagonal();
  coh.matrix.diagonal().setOnes();
  return coh;
}

SampleCoherence sample_coherence_at(const SlcStack& stack, int row, int col,
                                    const ShpMap& shp) {
  const int n = stack.n_layers();
  if (n < 2) throw DataError("stack needs at least two layers");
  if (row < 0 || row >= stack.rows() || col < 0 || col >= stack.cols())
    throw DataError("pixel out of bounds");
  const auto& offsets = shp.at(row, col);
  Eigen::MatrixXcd samples(n, static_cast<int>(offsets.size()));
  int kept = 0;
  for (const auto& [dr, dc] : offsets) {
    int r = row + dr, c = col + dc;
    if (r < 0 || r >= stack.rows() || c < 0 || c >= stack.cols()) continue;
    for (int d = 0; d < n; ++d)
      samples(d, kept) = stack.layers[static_cast<size_t>(d)](r, c);
    ++kept;
  }
  if (kept == 0) throw DataError("no usable samples at pixel");
  return sample_coherence(samples, kept);
}

PhaseLinkResult emi_solve(const SampleCoherence& coh, int ref_index,
                          const PhaseLinkOptions& opt) {
  const int n = static_cast<int>(coh.matrix.rows());
  if (!coh.valid) throw DataError("cannot link an invalid coherence estimate");
  if (ref_index < 0 || ref_index >= n) throw DataError("reference index out of range");

  // Magnitude matrix inversion; failure of any kind routes to EVD.
  Eigen::MatrixXd mag = coh.matrix.cwiseAbs();
  if (opt.beta > 0.0)
    mag.diagonal().array() += opt.beta;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(mag);
  Eigen::MatrixXd mag_inv = lu.inverse();
  double rcond = lu.rcond();
  if (!mag_inv.allFinite() || rcond <= 0.0 || 1.0 / rcond > opt.cond_limit)
    return evd_solve(coh, ref_index, opt);

  Eigen::MatrixXcd b = mag_inv.cwiseProduct(coh.matrix);
  b = 0.5 * (b + b.adjoint().eval());

  // Shifted inverse iteration toward the smallest eigenvalue. The LU of
  // (B - shift I) is refreshed only when the Rayleigh shift moves by >1e-3.
  // The start carries the coherence phases, not B's: the magnitude inverse
  // flips signs, so B's column phasors can sit in the wrong eigenspace.
  double shift = opt.shift0;
  Eigen::MatrixXcd identity = Eigen::MatrixXcd::Identity(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXcd> solver(b - shift * identity);
  Eigen::VectorXcd x = start_vector(coh.matrix, ref_index);
  double eigenvalue = std::real(x.dot(b * x));
  bool converged = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    Eigen::VectorXcd y = solver.solve(x);
    double norm = y.norm();
    if (!std::isfinite(norm) || norm == 0.0) {
      // Shift landed on an eigenvalue; nudge and refactor.
      shift += 1e-8 * std::max(1.0, std::abs(shift));
      solver.compute(b - shift * identity);
      y = solver.solve(x);
      norm = y.norm();
      if (!std::isfinite(norm) || norm == 0.0) return evd_solve(coh, ref_index, opt);
    }
    y /= norm;
    double change = angular_change(x, y);
    x = y;
    eigenvalue = std::real(x.dot(b * x));
    if (change < opt.tol) {
      converged = true;
      break;
    }
    if (std::abs(eigenvalue - shift) > 1e-3) {
      shift = eigenvalue;
      solver.compute(b - shift * identity);
    }
  }
  if (!converged) return evd_solve(coh, ref_index, opt);
  return reference_result(x, ref_index, eigenvalue, LinkMethod::Emi, false);
}

PhaseLinkResult evd_solve(const SampleCoherence& coh, int ref_index,
                          const PhaseLinkOptions& opt) {
  const int n = static_cast<int>(coh.matrix.rows());
  if (!coh.valid) throw DataError("cannot link an invalid coherence estimate");
  if (ref_index < 0 || ref_index >= n) throw DataError("reference index out of range");

  Eigen::VectorXcd x = start_vector(coh.matrix, ref_index);
  double eigenvalue = std::real(x.dot(coh.matrix * x));
  for (int it = 0; it < std::max(opt.max_iter, 1000); ++it) {
    Eigen::VectorXcd y = coh.matrix * x;
    double norm = y.norm();
    if (norm == 0.0 || !std::isfinite(norm))
      throw NumericalError("power iteration collapsed");
    y /= norm;
    double change = angular_change(x, y);
    x = y;
    eigenvalue = norm;
    if (change < opt.tol) break;
  }

  // Gap diagnostic: one deflated power pass estimates the second eigenvalue.
  // Probes are tried in turn; whichever survives deflation is used (a single
  // probe can be parallel to x, e.g. on an identity matrix).
  Eigen::MatrixXcd deflated = coh.matrix - eigenvalue * (x * x.adjoint());
  double second = 0.0;
  for (int probe = 0; probe <= n; ++probe) {
    Eigen::VectorXcd w;
    if (probe == 0)
      w = Eigen::VectorXcd::Ones(n) / std::sqrt(static_cast<double>(n));
    else
      w = Eigen::VectorXcd::Unit(n, probe - 1);
    w -= x * (x.dot(w));
    if (w.norm() <= 1e-12) continue;
    w /= w.norm();
    for (int it = 0; it < 30; ++it) {
      Eigen::VectorXcd y = deflated * w;
      second = y.norm();
      if (second == 0.0) break;
      w = y / second;
    }
    break;
  }
  bool degenerate = (eigenvalue - second) < 1e-12 * std::max(1.0, eigenvalue);
  return reference_result(x, ref_index, eigenvalue, LinkMethod::EvdFallback,
                          degenerate);
}

double temporal_coherence(const SampleCoherence& coh, const PhaseLinkResult& result) {
  const int n = static_cast<int>(coh.matrix.rows());
  if (result.zeta.size() != n) throw DataError("result size mismatch");
  if (n < 2) throw DataError("temporal coherence needs N >= 2");
  std::complex<double> acc(0.0, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) {
      double observed = phase_of(coh.matrix(i, k));
      double fitted = phase_of(result.zeta(i) * std::conj(result.zeta(k)));
      acc += unit_phasor(observed - fitted);
    }
  const double n_ifg = 0.5 * n * (n - 1);
  return std::abs(acc) / n_ifg;
}

CompressedSlc compress_slc(const SlcStack& stack, const LinkedField& field,
                           int first_layer, int last_layer,
                           const std::string& ref_label, int first_idx,
                           int last_idx) {
  const int n = stack.n_layers();
  if (first_layer < 0 || last_layer >= n || first_layer > last_layer)
    throw DataError("compression layer range out of bounds");
  if (static_cast<int>(field.phase.size()) != n)
    throw DataError("linked field has wrong layer count");
  for (int d = first_layer; d <= last_layer; ++d)
    if (stack.kinds[static_cast<size_t>(d)].type != LayerKind::Type::Real)
      throw DataError("compression range must cover real layers only");

  const int rows = stack.rows(), cols = stack.cols();
  CompressedSlc out;
  out.data = Raster<std::complex<double>>(rows, cols);
  out.ref_label = ref_label;
  out.first_idx = first_idx;
  out.last_idx = last_idx;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::complex<double> acc(0.0, 0.0);
      for (int d = first_layer; d <= last_layer; ++d) {
        std::complex<double> zeta =
            unit_phasor(field.phase[static_cast<size_t>(d)](r, c));
        acc += std::conj(zeta) * stack.layers[static_cast<size_t>(d)](r, c);
      }
      out.data(r, c) = acc;
    }

  std::vector<int> range;
  for (int d = first_layer; d <= last_layer; ++d) range.push_back(d);
  out.stats = amp_stats_from_stack(stack, range);
  return out;
}

Raster<double> phase_similarity_raster(
    const std::vector<Raster<std::complex<float>>>& pair_phasors, int radius_px,
    int threads) {
  if (pair_phasors.empty()) throw DataError("phase similarity needs pair phasors");
  const int rows = pair_phasors.front().rows(), cols = pair_phasors.front().cols();
  const int n_ifg = static_cast<int>(pair_phasors.size());
  if (radius_px < 1) throw ConfigError("similarity radius must be >= 1 pixel");

  std::vector<std::pair<int, int>> disk;
  for (int dr = -radius_px; dr <= radius_px; ++dr)
    for (int dc = -radius_px; dc <= radius_px; ++dc) {
      if (dr == 0 && dc == 0) continue;
      if (dr * dr + dc * dc <= radius_px * radius_px) disk.emplace_back(dr, dc);
    }

  Raster<double> out(rows, cols, 0.0);
  parallel_for(rows, threads, [&](int r) {
    std::vector<double> sims;
    sims.reserve(disk.size());
    for (int c = 0; c < cols; ++c) {
      sims.clear();
      for (const auto& [dr, dc] : disk) {
        int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        // mean_i cos(phi_i - x_i) via Re(p conj(q)) on unit phasors.
        double acc = 0.0;
        for (int i = 0; i < n_ifg; ++i) {
          const auto& p = pair_phasors[static_cast<size_t>(i)];
          std::complex<float> v = p(r, c) * std::conj(p(nr, nc));
          acc += static_cast<double>(v.real());
        }
        sims.push_back(acc / n_ifg);
      }
      if (sims.empty()) {
        out(r, c) = 1.0;  // no neighbors: a single pixel is trivially similar
        continue;
      }
      // Lower median.
      size_t mid = (sims.size() - 1) / 2;
      std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(mid),
                       sims.end());
      out(r, c) = sims[mid];
    }
  });
  return out;
}

std::vector<Raster<double>> regrid_outputs(
    const std::vector<Raster<double>>& full_res_phase,
    const std::vector<Raster<double>>& ds_phase, const PsMask& ps, int dec_x,
    int dec_y) {
  if (dec_x < 1 || dec_y < 1) throw ConfigError("decimation factors must be >= 1");
  if (full_res_phase.empty() || full_res_phase.size() != ds_phase.size())
    throw DataError("regrid needs matching per-date rasters");
  const int rows = full_res_phase.front().rows(), cols = full_res_phase.front().cols();
  const int out_rows = ds_phase.front().rows(), out_cols = ds_phase.front().cols();
  if (out_rows != (rows + dec_y - 1) / dec_y || out_cols != (cols + dec_x - 1) / dec_x)
    throw DataError("decimated grid shape does not match decimation factors");

  const size_t n_dates = full_res_phase.size();
  std::vector<Raster<double>> out(n_dates, Raster<double>(out_rows, out_cols));
  for (int orow = 0; orow < out_rows; ++orow)
    for (int ocol = 0; ocol < out_cols; ++ocol) {
      int r0 = orow * dec_y, r1 = std::min(rows, r0 + dec_y);
      int c0 = ocol * dec_x, c1 = std::min(cols, c0 + dec_x);
      int best_r = -1, best_c = -1;
      double best_da = std::numeric_limits<double>::infinity();
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c)
          if (ps.mask(r, c) && ps.dispersion(r, c) < best_da) {
            best_da = ps.dispersion(r, c);
            best_r = r;
            best_c = c;
          }
      for (size_t d = 0; d < n_dates; ++d)
        out[d](orow, ocol) = best_r >= 0 ? full_res_phase[d](best_r, best_c)
                                         : ds_phase[d](orow, ocol);
    }
  return out;
}

}  // namespace seqlink
