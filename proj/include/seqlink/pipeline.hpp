// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seqlink/config.hpp"
#include "seqlink/inversion.hpp"
#include "seqlink/network.hpp"
#include "seqlink/sequential.hpp"
#include "seqlink/sim.hpp"
#include "seqlink/store.hpp"

namespace seqlink {

// Wrapped per-node phases unwrapped over the batch's nearest-3 network and
// inverted to one absolute (date-0 referenced, reference-pixel anchored)
// raster per batch date.
struct BatchProcessed {
  std::vector<Raster<double>> abs_phase;   // one per batch real date
  Raster<std::uint8_t> resid_nonint;       // per-pixel count of flagged pairs
  Raster<std::uint8_t> resid_cycles;
  Raster<std::int32_t> components;         // from the first pair's unwrap
  int ref_row = -1;                        // selected on the first batch
  int ref_col = -1;
};

// Unwrap + L1 inversion of one batch. `datum_abs` is the absolute phase of
// the batch datum (empty raster means the datum is date 0, phase zero).
// When ref_row < 0 the spatial reference pixel is selected here from the
// batch's temporal coherence and the unwrap components.
BatchProcessed process_batch(const BatchResult& batch,
                             const std::vector<int>& all_dates,
                             const Raster<double>& datum_abs,
                             const TruthScene* truth, const PipelineConfig& cfg,
                             int ref_row, int ref_col);

// Per-pixel network inversion of unwrapped pair rasters. Returns one raster
// per non-reference network date plus per-pair residual rasters.
struct NetworkInversion {
  std::vector<Raster<double>> date_phase;
  std::vector<Raster<double>> residuals;
};
NetworkInversion invert_network(const IfgNetwork& net,
                                const std::vector<Raster<double>>& unwrapped,
                                const InversionConfig& inv, int threads);

// Full historical run, in memory.
struct HistoricalOutputs {
  std::vector<int> dates;                  // days
  std::vector<Raster<double>> series;      // per date, date-0 and ref-pixel referenced
  std::vector<BatchResult> batches;        // raw sequential linking outputs
  std::vector<BatchProcessed> processed;
  VelocityField velocity;
  int ref_row = -1;
  int ref_col = -1;
  SequentialState final_state;
};
HistoricalOutputs run_historical(const PipelineConfig& cfg, const SlcStack& stack,
                                 const TruthScene* truth, int n_dates_limit = -1);

// One forward-mode ingest: link [compressed | partial + new], unwrap the
// nearest-3 pairs among the newest four dates, invert the subset, and
// produce the incremental outputs. Completes a mini-stack when the partial
// batch reaches the configured size.
struct ForwardStepResult {
  int date_idx = -1;             // global index of the ingested date
  int prev_idx = -1;
  Raster<double> rel_prev;       // output option 1: relative to the previous date
  int subset_ref_idx = -1;       // earliest date of the unwrapped subset
  Raster<double> rel_subset_ref; // solution relative to that date
  bool completed_batch = false;
  BatchResult completed;         // set when completed_batch
};
ForwardStepResult forward_ingest(SequentialState& state,
                                 const Raster<std::complex<double>>& new_layer,
                                 int new_date_day, const TruthScene* truth,
                                 const PipelineConfig& cfg);

// Truth scene and SLC stack straight from the configuration. The stack uses
// a salted copy of sim.seed so truth noise and speckle are independent.
std::pair<TruthScene, SlcStack> simulate_from_config(const PipelineConfig& cfg);

// Store-backed commands (exit-code mapping happens in the CLI).
void cmd_simulate(const PipelineConfig& cfg, const std::string& out_dir);

void cmd_historical(const PipelineConfig& cfg, const std::string& input_dir,
                    const std::string& out_dir);

void cmd_forward(const PipelineConfig& cfg, const std::string& state_dir,
                 const std::string& input_dir, const std::string& out_dir);

// Store plumbing shared by commands and tests.
SlcStack load_stack(const RasterStore& store);
std::optional<TruthScene> load_truth(const RasterStore& store);
void save_state(const SequentialState& state, const RasterStore& store,
                const std::string& config_hash);
SequentialState load_state(const RasterStore& store);
std::string layer_name(const std::string& prefix, int idx);

}  // namespace seqlink
