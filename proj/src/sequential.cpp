// SPDX-License-Identifier: Apache-2.0
#include "seqlink/sequential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqlink/errors.hpp"
#include "seqlink/network.hpp"
#include "seqlink/parallel.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

namespace {

// Assemble [retained compressed | real layers] as one stack. Compressed
// layers take their reference date as nominal date.
SlcStack assemble(const SequentialState& state,
                  const std::vector<Raster<std::complex<double>>>& reals,
                  const std::vector<int>& real_dates) {
  SlcStack assembled;
  for (size_t i = 0; i < state.compressed.size(); ++i) {
    const CompressedSlc& comp = state.compressed[i];
    LayerKind kind;
    kind.type = LayerKind::Type::Compressed;
    kind.ref_label = comp.ref_label;
    kind.first_idx = comp.first_idx;
    kind.last_idx = comp.last_idx;
    int ref_idx = std::stoi(comp.ref_label);
    assembled.dates.push_back(state.dates[static_cast<size_t>(ref_idx)]);
    assembled.layers.push_back(comp.data);
    assembled.kinds.push_back(kind);
  }
  for (size_t i = 0; i < reals.size(); ++i) {
    assembled.dates.push_back(real_dates[i]);
    assembled.layers.push_back(reals[i]);
    assembled.kinds.push_back(LayerKind{});
  }
  assembled.validate();
  return assembled;
}

}  // namespace

MiniStackPlan plan_mini_stacks(int n_dates, int m, int k,
                               CompressionScheme scheme) {
  if (m < 2) throw ConfigError("mini-stack size must be at least 2");
  if (k < 1) throw ConfigError("retained compressed count must be at least 1");
  if (n_dates < 2) throw DataError("need at least two dates");

  MiniStackPlan plan;
  plan.mini_stack_size = m;
  plan.max_compressed = k;
  plan.scheme = scheme;
  const int n_batches = (n_dates + m - 1) / m;
  for (int b = 0; b < n_batches; ++b) {
    MiniStackBatch batch;
    for (int label = std::max(1, b + 1 - k); label <= b; ++label)
      batch.compressed_labels.push_back(label);
    const int first = b * m;
    const int last = std::min(n_dates, first + m);
    for (int d = first; d < last; ++d) batch.real_idx.push_back(d);
    const int n_comp = static_cast<int>(batch.compressed_labels.size());
    if (n_comp + static_cast<int>(batch.real_idx.size()) < 2)
      throw DataError("a mini-stack must contain at least two layers");
    batch.ref_layer = b == 0 ? 0 : n_comp - 1;
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

AssembledLink link_assembled(const SequentialState& state,
                             const std::vector<Raster<std::complex<double>>>& reals,
                             const std::vector<int>& real_global_idx,
                             const std::vector<int>& real_dates,
                             const SequentialConfig& cfg) {
  if (reals.empty()) throw DataError("a batch needs at least one acquisition");
  SlcStack assembled = assemble(state, reals, real_dates);
  const int n_comp = static_cast<int>(state.compressed.size());
  const int n_layers = assembled.n_layers();
  if (n_layers < 2) throw DataError("a mini-stack must contain at least two layers");
  const int rows = assembled.rows(), cols = assembled.cols();

  AssembledLink out;
  out.n_compressed = n_comp;
  out.ref_layer = n_comp == 0 ? 0 : n_comp - 1;

  // Scatterer statistics: previous merged parts plus the current reals.
  std::vector<int> real_layers;
  for (int i = 0; i < static_cast<int>(reals.size()); ++i)
    real_layers.push_back(n_comp + i);
  AmpStats current = amp_stats_from_stack(assembled, real_layers);
  if (state.merged_stats) {
    out.stats_with_current =
        merge_amp_stats({*state.merged_stats, current}, cfg.weighting);
  } else {
    out.stats_with_current = current;
  }
  out.shp = glrt_shp(out.stats_with_current, cfg.shp_half_x, cfg.shp_half_y,
                     cfg.glrt_alpha, cfg.glrt_trials, kGlrtCalibrationSeed,
                     lag1_coherence(assembled, real_layers));

  LinkedField& field = out.field;
  field.phase.assign(static_cast<size_t>(n_layers), Raster<double>(rows, cols));
  field.temporal_coherence = Raster<double>(rows, cols);
  field.phase_similarity = Raster<double>(rows, cols, 0.0);
  field.eigenvalue = Raster<double>(rows, cols);
  field.method = Raster<std::uint8_t>(rows, cols, 0);
  field.valid = Raster<std::uint8_t>(rows, cols, 0);

  parallel_for(rows, cfg.threads, [&](int r) {
    for (int c = 0; c < cols; ++c) {
      SampleCoherence coh = sample_coherence_at(assembled, r, c, out.shp);
      if (!coh.valid) continue;
      PhaseLinkResult result = emi_solve(coh, out.ref_layer, cfg.link);
      result.temporal_coherence = temporal_coherence(coh, result);
      for (int d = 0; d < n_layers; ++d)
        field.phase[static_cast<size_t>(d)](r, c) = phase_of(result.zeta(d));
      field.temporal_coherence(r, c) = result.temporal_coherence;
      field.eigenvalue(r, c) = result.eigenvalue;
      field.method(r, c) = result.method == LinkMethod::EvdFallback ? 1 : 0;
      field.valid(r, c) = 1;
    }
  });
  (void)real_global_idx;
  return out;
}

BatchResult run_batch(SequentialState& state, const SlcStack& stack,
                      const std::vector<int>& real_idx,
                      const SequentialConfig& cfg) {
  stack.validate();

  std::vector<Raster<std::complex<double>>> reals;
  std::vector<int> real_dates;
  for (int idx : real_idx) {
    if (idx < 0 || idx >= stack.n_layers()) throw DataError("date index out of range");
    reals.push_back(stack.layers[static_cast<size_t>(idx)]);
    real_dates.push_back(stack.dates[static_cast<size_t>(idx)]);
    // Extend the ingested-date record just far enough; a caller may be
    // replaying a prefix of a longer stack.
    while (static_cast<int>(state.dates.size()) <= idx)
      state.dates.push_back(stack.dates[state.dates.size()]);
    if (state.dates[static_cast<size_t>(idx)] != stack.dates[static_cast<size_t>(idx)])
      throw DataError("state dates disagree with the stack");
  }
  return run_batch_layers(state, reals, real_idx, real_dates, cfg);
}

BatchResult run_batch_layers(SequentialState& state,
                             const std::vector<Raster<std::complex<double>>>& reals,
                             const std::vector<int>& real_idx,
                             const std::vector<int>& real_dates,
                             const SequentialConfig& cfg) {
  if (real_idx.empty()) throw DataError("a batch needs at least one acquisition");
  for (size_t i = 1; i < real_idx.size(); ++i)
    if (real_idx[i] != real_idx[i - 1] + 1)
      throw DataError("batch acquisitions must be consecutive");
  if (static_cast<int>(real_idx.size()) > cfg.mini_stack_size)
    throw DataError("batch exceeds the configured mini-stack size");
  if (real_idx.back() >= static_cast<int>(state.dates.size()))
    throw DataError("state date axis does not cover the batch");

  if (state.rows == 0) {
    state.rows = reals.front().rows();
    state.cols = reals.front().cols();
  }

  AssembledLink link = link_assembled(state, reals, real_idx, real_dates, cfg);
  const int n_comp = link.n_compressed;
  const int n_reals = static_cast<int>(real_idx.size());
  const int rows = state.rows, cols = state.cols;

  BatchResult result;
  result.date_idx = real_idx;
  result.datum_idx = state.batches_done == 0 ? real_idx.front() : state.datum_idx;
  for (int i = 0; i < n_reals; ++i)
    result.phase.push_back(link.field.phase[static_cast<size_t>(n_comp + i)]);
  result.temporal_coherence = link.field.temporal_coherence;
  result.eigenvalue = link.field.eigenvalue;
  result.method = link.field.method;
  result.valid = link.field.valid;
  result.looks = Raster<std::int32_t>(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      result.looks(r, c) = link.shp.count(r, c);
  result.ps = select_ps(link.stats_with_current, cfg.ps_threshold);

  // Quality from the pairs that will be unwrapped: nearest-3 over the
  // datum node plus the batch dates.
  {
    std::vector<int> node_dates;
    std::vector<const Raster<double>*> node_phase;
    Raster<double> zeros(rows, cols, 0.0);
    bool datum_in_batch = result.datum_idx == real_idx.front();
    if (!datum_in_batch) {
      node_dates.push_back(state.dates[static_cast<size_t>(result.datum_idx)]);
      node_phase.push_back(&zeros);
    }
    for (int i = 0; i < n_reals; ++i) {
      node_dates.push_back(real_dates[static_cast<size_t>(i)]);
      node_phase.push_back(&result.phase[static_cast<size_t>(i)]);
    }
    if (node_dates.size() >= 2) {
      IfgNetwork net = build_nearest3(node_dates);
      std::vector<Raster<std::complex<float>>> phasors;
      phasors.reserve(net.pairs.size());
      for (const auto& [i, k] : net.pairs) {
        Raster<std::complex<float>> ph(rows, cols);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) {
            double d = (*node_phase[static_cast<size_t>(k)])(r, c) -
                       (*node_phase[static_cast<size_t>(i)])(r, c);
            ph(r, c) = std::complex<float>(static_cast<float>(std::cos(d)),
                                           static_cast<float>(std::sin(d)));
          }
        phasors.push_back(std::move(ph));
      }
      result.phase_similarity =
          phase_similarity_raster(phasors, cfg.similarity_radius_px, cfg.threads);
    } else {
      result.phase_similarity = Raster<double>(rows, cols, 1.0);
    }
  }

  // Form this batch's compressed layer. Under LastPerMiniStack the solution
  // is re-referenced to the batch's last acquisition before projection.
  SlcStack assembled = assemble(state, reals, real_dates);
  LinkedField proj_field = link.field;
  if (cfg.scheme == CompressionScheme::LastPerMiniStack) {
    const Raster<double>& last_phase =
        link.field.phase[static_cast<size_t>(n_comp + n_reals - 1)];
    for (auto& layer : proj_field.phase)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          layer(r, c) = wrap_phase(layer(r, c) - last_phase(r, c));
  }
  std::string ref_label =
      cfg.scheme == CompressionScheme::LastPerMiniStack
          ? std::to_string(real_idx.back())
          : std::to_string(result.datum_idx);
  CompressedSlc formed =
      compress_slc(assembled, proj_field, n_comp, n_comp + n_reals - 1, ref_label,
                   real_idx.front(), real_idx.back());

  // State update: retained layers, merged stats, datum, recent tail.
  state.compressed.push_back(std::move(formed));
  state.compressed_labels.push_back(state.batches_done + 1);
  while (static_cast<int>(state.compressed.size()) > cfg.max_compressed) {
    state.compressed.erase(state.compressed.begin());
    state.compressed_labels.erase(state.compressed_labels.begin());
  }
  state.merged_stats = link.stats_with_current;

  int next_datum = cfg.scheme == CompressionScheme::LastPerMiniStack
                       ? real_idx.back()
                       : result.datum_idx;
  state.recent_idx.clear();
  state.recent_phase.clear();
  const int tail = std::min(3, n_reals);
  for (int i = n_reals - tail; i < n_reals; ++i) {
    state.recent_idx.push_back(real_idx[static_cast<size_t>(i)]);
    Raster<double> ph = result.phase[static_cast<size_t>(i)];
    if (next_datum != result.datum_idx) {
      const Raster<double>& datum_phase =
          result.phase[static_cast<size_t>(n_reals - 1)];
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          ph(r, c) = wrap_phase(ph(r, c) - datum_phase(r, c));
    }
    state.recent_phase.push_back(std::move(ph));
  }
  state.datum_idx = next_datum;
  state.partial_idx.clear();
  state.partial_layers.clear();
  ++state.batches_done;
  return result;
}

IndependentBatches run_independent_batches(const SlcStack& stack,
                                           const SequentialConfig& cfg) {
  stack.validate();
  const int n = stack.n_layers();
  MiniStackPlan plan =
      plan_mini_stacks(n, cfg.mini_stack_size, cfg.max_compressed, cfg.scheme);

  IndependentBatches out;
  SequentialState rolling;  // used only to accumulate merged statistics
  rolling.rows = stack.rows();
  rolling.cols = stack.cols();
  rolling.dates = stack.dates;

  for (const auto& batch : plan.batches) {
    SequentialState isolated;  // no compressed layers: independent solve
    isolated.rows = stack.rows();
    isolated.cols = stack.cols();
    isolated.dates = stack.dates;
    isolated.merged_stats = rolling.merged_stats;

    std::vector<Raster<std::complex<double>>> reals;
    std::vector<int> real_dates;
    for (int idx : batch.real_idx) {
      reals.push_back(stack.layers[static_cast<size_t>(idx)]);
      real_dates.push_back(stack.dates[static_cast<size_t>(idx)]);
    }
    AssembledLink link = link_assembled(isolated, reals, batch.real_idx,
                                        real_dates, cfg);
    rolling.merged_stats = link.stats_with_current;

    BatchResult result;
    result.date_idx = batch.real_idx;
    result.datum_idx = batch.real_idx.front();
    for (size_t i = 0; i < batch.real_idx.size(); ++i)
      result.phase.push_back(link.field.phase[i]);
    result.temporal_coherence = link.field.temporal_coherence;
    result.eigenvalue = link.field.eigenvalue;
    result.method = link.field.method;
    result.valid = link.field.valid;
    result.ps = select_ps(link.stats_with_current, cfg.ps_threshold);

    SlcStack assembled = assemble(isolated, reals, real_dates);
    out.compressed.push_back(compress_slc(
        assembled, link.field, 0, static_cast<int>(reals.size()) - 1,
        std::to_string(batch.real_idx.front()), batch.real_idx.front(),
        batch.real_idx.back()));
    out.batches.push_back(std::move(result));
  }
  return out;
}

std::vector<Raster<double>> datum_adjust_baseline(const IndependentBatches& ind,
                                                  const SequentialConfig& cfg) {
  const size_t n_batches = ind.batches.size();
  if (n_batches == 0) return {};
  if (n_batches == 1) return ind.batches.front().phase;  // nothing to align
  if (ind.compressed.size() != n_batches)
    throw DataError("one compressed layer per batch is required");
  const int rows = ind.compressed.front().data.rows();
  const int cols = ind.compressed.front().data.cols();

  // Second-level stack: one compressed layer per batch, nominal date = the
  // batch's first acquisition.
  SlcStack comp_stack;
  std::vector<AmpStats> parts;
  for (size_t b = 0; b < n_batches; ++b) {
    comp_stack.dates.push_back(ind.batches[b].date_idx.front());
    comp_stack.layers.push_back(ind.compressed[b].data);
    comp_stack.kinds.push_back(LayerKind{});
    parts.push_back(ind.compressed[b].stats);
  }
  AmpStats merged = merge_amp_stats(parts, cfg.weighting);
  std::vector<int> comp_layers(n_batches);
  std::iota(comp_layers.begin(), comp_layers.end(), 0);
  ShpMap shp = glrt_shp(merged, cfg.shp_half_x, cfg.shp_half_y, cfg.glrt_alpha,
                        cfg.glrt_trials, kGlrtCalibrationSeed,
                        lag1_coherence(comp_stack, comp_layers));

  std::vector<Raster<double>> offsets(n_batches, Raster<double>(rows, cols, 0.0));
  parallel_for(rows, cfg.threads, [&](int r) {
    for (int c = 0; c < cols; ++c) {
      SampleCoherence coh = sample_coherence_at(comp_stack, r, c, shp);
      if (!coh.valid) continue;
      PhaseLinkResult result = emi_solve(coh, 0, cfg.link);
      for (size_t b = 1; b < n_batches; ++b)
        offsets[b](r, c) = phase_of(result.zeta(static_cast<int>(b)));
    }
  });

  std::vector<Raster<double>> adjusted;
  for (size_t b = 0; b < n_batches; ++b)
    for (size_t i = 0; i < ind.batches[b].date_idx.size(); ++i) {
      Raster<double> ph(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          ph(r, c) = wrap_phase(ind.batches[b].phase[i](r, c) + offsets[b](r, c));
      adjusted.push_back(std::move(ph));
    }
  return adjusted;
}

}  // namespace seqlink
