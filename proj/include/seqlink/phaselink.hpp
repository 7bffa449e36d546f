// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "seqlink/raster.hpp"
#include "seqlink/scatterers.hpp"
#include "seqlink/stack.hpp"

namespace seqlink {

// Sample coherence: covariance over looks normalized to unit diagonal.
struct SampleCoherence {
  Eigen::MatrixXcd matrix;
  int looks = 0;
  bool valid = false;  // false when any layer has zero power at this pixel
};

enum class LinkMethod { Emi, EvdFallback };

struct PhaseLinkResult {
  Eigen::VectorXcd zeta;        // unit-modulus per layer, zeta[ref] == 1
  int reference_index = 0;
  double eigenvalue = 0.0;      // smallest eigenvalue (EMI) / leading (EVD)
  LinkMethod method = LinkMethod::Emi;
  bool degenerate = false;      // EVD leading eigenspace not separated
  double temporal_coherence = 0.0;
  double phase_similarity = 0.0;
};

struct PhaseLinkOptions {
  double shift0 = 0.99;         // initial inverse-iteration shift
  double cond_limit = 1e12;     // |Sigma| inversion condition cutoff
  double beta = 0.0;            // optional diagonal loading of |Sigma|
  int max_iter = 100;
  double tol = 1e-10;           // eigenvector angular change
};

// Coherence at one pixel from its SHP samples. Outer products are
// accumulated pairwise so sample order perturbs the sum only at rounding
// level.
SampleCoherence sample_coherence_at(const SlcStack& stack, int row, int col,
                                    const ShpMap& shp);

// Coherence from an explicit list of sample vectors (layers x looks).
// used_cols limits the evaluation to the leading columns (-1 = all).
SampleCoherence sample_coherence(const Eigen::MatrixXcd& samples, int used_cols = -1);

// Maximum-likelihood phase linking: eigenvector of |Sigma|^-1 o Sigma for
// the smallest eigenvalue via shifted inverse iteration. Falls back to EVD
// when |Sigma| cannot be inverted reliably.
PhaseLinkResult emi_solve(const SampleCoherence& coh, int ref_index = 0,
                          const PhaseLinkOptions& opt = {});

// Leading-eigenvector solution of Sigma by power iteration.
PhaseLinkResult evd_solve(const SampleCoherence& coh, int ref_index = 0,
                          const PhaseLinkOptions& opt = {});

// Goodness of fit between linked phases and the original coherence phases,
// averaged over all N(N-1)/2 pairs.
double temporal_coherence(const SampleCoherence& coh, const PhaseLinkResult& result);

// Compressed acquisition: kappa = sum_i conj(zeta_i) z_i over the real-layer
// range [first_layer, last_layer] of the assembled stack.
struct CompressedSlc {
  Raster<std::complex<double>> data;
  std::string ref_label;
  int first_idx = -1;  // global date index range covered
  int last_idx = -1;
  AmpStats stats;
};

// Per-layer wrapped phase fields from raster-wide phase linking, plus
// quality and diagnostic layers. Produced by the sequential driver.
struct LinkedField {
  std::vector<Raster<double>> phase;  // one per assembled layer, ref layer == 0
  Raster<double> temporal_coherence;
  Raster<double> phase_similarity;
  Raster<double> eigenvalue;
  Raster<std::uint8_t> method;     // 0 = EMI, 1 = EVD fallback
  Raster<std::uint8_t> valid;
};

CompressedSlc compress_slc(const SlcStack& stack, const LinkedField& field,
                           int first_layer, int last_layer,
                           const std::string& ref_label, int first_idx, int last_idx);

// Cosine-similarity quality: per pixel, the lower median over disk
// neighbors of mean_i cos(phi_i - x_i) across the given wrapped phase
// vectors (stored as unit phasors, one raster per network pair).
Raster<double> phase_similarity_raster(
    const std::vector<Raster<std::complex<float>>>& pair_phasors, int radius_px,
    int threads = 1);

// Merge full-resolution PS phases with decimated-grid DS phases onto the
// output grid: no PS in footprint -> DS value at footprint center; one
// PS -> that PS; several -> lowest amplitude dispersion (row-major ties).
std::vector<Raster<double>> regrid_outputs(
    const std::vector<Raster<double>>& full_res_phase,
    const std::vector<Raster<double>>& ds_phase, const PsMask& ps, int dec_x,
    int dec_y);

}  // namespace seqlink
