// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqlink/phaselink.hpp"
#include "seqlink/scatterers.hpp"
#include "seqlink/stack.hpp"

namespace seqlink {

enum class CompressionScheme { FirstDate, LastPerMiniStack };

struct MiniStackBatch {
  std::vector<int> compressed_labels;  // 1-based labels of compressed layers used
  std::vector<int> real_idx;           // global date indices, oldest first
  int ref_layer = 0;                   // reference index in the assembled stack
};

struct MiniStackPlan {
  int mini_stack_size = 15;
  int max_compressed = 6;
  CompressionScheme scheme = CompressionScheme::FirstDate;
  std::vector<MiniStackBatch> batches;
};

// Partition n_dates into consecutive batches of m real acquisitions (final
// batch may be smaller), each referencing the most recent compressed layer.
MiniStackPlan plan_mini_stacks(int n_dates, int m, int k, CompressionScheme scheme);

struct SequentialConfig {
  int mini_stack_size = 15;
  int max_compressed = 6;
  CompressionScheme scheme = CompressionScheme::FirstDate;
  int shp_half_x = 6;
  int shp_half_y = 6;
  double glrt_alpha = 0.05;
  int glrt_trials = 200000;
  Weighting weighting;
  double ps_threshold = 0.2;
  PhaseLinkOptions link;
  int similarity_radius_px = 7;
  int threads = 1;
};

// Rolling processor state. `recent` phases are kept relative to the datum
// the next batch will output against, so forward networks can span the
// mini-stack boundary.
struct SequentialState {
  int rows = 0;
  int cols = 0;
  int batches_done = 0;
  int datum_idx = 0;                    // global date index of the current zero phase
  std::vector<int> dates;               // all dates ingested so far (days)
  std::vector<CompressedSlc> compressed;  // retained, oldest first, <= K
  std::vector<int> compressed_labels;     // 1-based batch label per retained layer
  std::optional<AmpStats> merged_stats;
  std::vector<int> recent_idx;            // global indices, oldest first
  std::vector<Raster<double>> recent_phase;  // wrapped, relative to datum_idx
  std::vector<int> partial_idx;              // incomplete mini-stack (forward mode)
  std::vector<Raster<std::complex<double>>> partial_layers;
  int ref_row = -1;  // persisted spatial reference, set by the pipeline
  int ref_col = -1;
};

struct BatchResult {
  std::vector<int> date_idx;          // global real date indices of this batch
  std::vector<Raster<double>> phase;  // wrapped output per date, rel datum_idx
  int datum_idx = 0;
  Raster<double> temporal_coherence;
  Raster<double> phase_similarity;
  Raster<double> eigenvalue;
  Raster<std::uint8_t> method;  // 0 = EMI, 1 = EVD fallback
  Raster<std::uint8_t> valid;
  Raster<std::int32_t> looks;
  PsMask ps;
};

// Process one complete mini-stack: assemble retained compressed layers and
// the batch acquisitions, refresh scatterer decisions, link every pixel,
// form this batch's compressed layer, and update the state.
BatchResult run_batch(SequentialState& state, const SlcStack& stack,
                      const std::vector<int>& real_idx, const SequentialConfig& cfg);

// Same, from explicit layers: the forward driver holds partial batches
// outside any full stack. state.dates must already cover real_idx.
BatchResult run_batch_layers(SequentialState& state,
                             const std::vector<Raster<std::complex<double>>>& reals,
                             const std::vector<int>& real_idx,
                             const std::vector<int>& real_dates,
                             const SequentialConfig& cfg);

// Link the assembled stack [retained compressed | given real layers] without
// touching persistent state. Shared by run_batch and the forward driver.
struct AssembledLink {
  LinkedField field;
  int n_compressed = 0;
  int ref_layer = 0;
  ShpMap shp;
  AmpStats stats_with_current;  // previous merged stats + current real layers
};
AssembledLink link_assembled(const SequentialState& state,
                             const std::vector<Raster<std::complex<double>>>& reals,
                             const std::vector<int>& real_global_idx,
                             const std::vector<int>& real_dates,
                             const SequentialConfig& cfg);

// Independent per-batch solves (no compressed layers, reference = first
// acquisition of the batch) plus one compressed layer per batch.
struct IndependentBatches {
  std::vector<BatchResult> batches;
  std::vector<CompressedSlc> compressed;  // base phase = batch's first date
};
IndependentBatches run_independent_batches(const SlcStack& stack,
                                           const SequentialConfig& cfg);

// Second-level phase linking across the per-batch compressed layers;
// estimated offsets re-align every batch to the first batch's datum.
// Returns per-date wrapped phases relative to the global first date.
std::vector<Raster<double>> datum_adjust_baseline(const IndependentBatches& ind,
                                                  const SequentialConfig& cfg);

}  // namespace seqlink
