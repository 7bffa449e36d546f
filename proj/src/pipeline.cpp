// SPDX-License-Identifier: Apache-2.0
#include "seqlink/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "seqlink/errors.hpp"
#include "seqlink/parallel.hpp"
#include "seqlink/phaselink.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

namespace {

using nlohmann::json;

struct Nodes {
  std::vector<int> days;
  std::vector<int> global_idx;
  std::vector<Raster<double>> phase;  // relative to the batch datum
  int batch_offset = 0;               // node index of the first batch date
};

// Batch network nodes: the datum node (phase zero) followed by the batch
// dates. Batch 1 starts at its own first date, so no extra node is needed.
Nodes batch_nodes(const BatchResult& batch, const std::vector<int>& all_dates) {
  Nodes nodes;
  const int rows = batch.phase.front().rows(), cols = batch.phase.front().cols();
  if (batch.datum_idx != batch.date_idx.front()) {
    nodes.days.push_back(all_dates[static_cast<size_t>(batch.datum_idx)]);
    nodes.global_idx.push_back(batch.datum_idx);
    nodes.phase.emplace_back(rows, cols, 0.0);
    nodes.batch_offset = 1;
  }
  for (size_t i = 0; i < batch.date_idx.size(); ++i) {
    nodes.days.push_back(all_dates[static_cast<size_t>(batch.date_idx[i])]);
    nodes.global_idx.push_back(batch.date_idx[i]);
    nodes.phase.push_back(batch.phase[i]);
  }
  return nodes;
}

std::vector<Raster<double>> oracle_truth_diffs(
    const IfgNetwork& net, const std::vector<int>& node_global_idx,
    const TruthScene& truth) {
  std::vector<Raster<double>> diffs;
  diffs.reserve(net.pairs.size());
  for (const auto& [i, k] : net.pairs) {
    int gi = node_global_idx[static_cast<size_t>(i)];
    int gk = node_global_idx[static_cast<size_t>(k)];
    if (gk >= static_cast<int>(truth.phase.size()))
      throw DataError("truth layers do not cover the processed dates");
    const Raster<double>& pi = truth.phase[static_cast<size_t>(gi)];
    const Raster<double>& pk = truth.phase[static_cast<size_t>(gk)];
    Raster<double> d(pi.rows(), pi.cols());
    for (int r = 0; r < d.rows(); ++r)
      for (int c = 0; c < d.cols(); ++c) d(r, c) = pk(r, c) - pi(r, c);
    diffs.push_back(std::move(d));
  }
  return diffs;
}

UnwrappedStack unwrap_pairs(const std::vector<Raster<double>>& wrapped,
                            const IfgNetwork& net,
                            const std::vector<int>& node_global_idx,
                            const Raster<double>& quality_raster,
                            const TruthScene* truth, const PipelineConfig& cfg) {
  std::vector<Raster<double>> quality(wrapped.size(), quality_raster);
  if (cfg.unwrap.method == UnwrapConfig::Method::Oracle) {
    if (!truth)
      throw DataError("the oracle unwrapper needs truth layers in the input store");
    OracleErrorSpec spec;
    spec.fraction = cfg.unwrap.error_fraction;
    spec.region_size = cfg.unwrap.region_size;
    spec.seed = cfg.unwrap.seed;
    return oracle_unwrap(wrapped, oracle_truth_diffs(net, node_global_idx, *truth),
                         quality, spec);
  }
  return spatial_unwrap(wrapped, quality, cfg.unwrap.quality_threshold);
}

// Per-pixel counts of flagged residual pairs, clamped to 255.
void residual_counts(const ResidualMask& mask, Raster<std::uint8_t>& nonint,
                     Raster<std::uint8_t>& cycles) {
  auto bump = [](Raster<std::uint8_t>& out, const Raster<std::uint8_t>& flag) {
    for (size_t i = 0; i < out.size(); ++i)
      if (flag.storage()[i] && out.storage()[i] < 255) ++out.storage()[i];
  };
  for (const auto& f : mask.non_integer) bump(nonint, f);
  for (const auto& f : mask.integer_error) bump(cycles, f);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("missing ") + what + ": " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("unparseable ") + what + ": " + e.what());
  }
  return j;
}

LayerMeta product_meta(const std::string& name, const std::string& kind,
                       const std::string& units, int date,
                       const std::string& config_hash, std::uint64_t seed) {
  LayerMeta meta;
  meta.name = name;
  meta.kind = kind;
  meta.units = units;
  meta.date = date;
  meta.config_hash = config_hash;
  meta.seed = seed;
  return meta;
}

// Quality and diagnostic products for one completed batch.
void write_batch_products(const RasterStore& store, const BatchResult& batch,
                          const BatchProcessed& processed,
                          const std::vector<int>& all_dates, int batch_index,
                          const std::string& hash, std::uint64_t seed) {
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "_b%02d", batch_index);
  const std::string b(suffix);
  const int last_day = all_dates[static_cast<size_t>(batch.date_idx.back())];
  store.write(batch.temporal_coherence,
              product_meta("gamma_t" + b, "temporal_coherence", "unitless",
                           last_day, hash, seed));
  store.write(batch.phase_similarity,
              product_meta("gamma_s" + b, "phase_similarity", "unitless", last_day,
                           hash, seed));
  store.write(batch.method,
              product_meta("method" + b, "link_method", "flag", last_day, hash, seed));
  store.write(batch.valid,
              product_meta("valid" + b, "link_valid", "flag", last_day, hash, seed));
  store.write(batch.looks,
              product_meta("looks" + b, "shp_looks", "count", last_day, hash, seed));
  store.write(batch.ps.mask,
              product_meta("ps" + b, "ps_mask", "flag", last_day, hash, seed));
  store.write(batch.ps.dispersion,
              product_meta("dispersion" + b, "amplitude_dispersion", "unitless",
                           last_day, hash, seed));
  store.write(processed.resid_nonint,
              product_meta("resid_nonint" + b, "residual_noninteger_count", "count",
                           last_day, hash, seed));
  store.write(processed.resid_cycles,
              product_meta("resid_cycles" + b, "residual_cycle_count", "count",
                           last_day, hash, seed));
  store.write(processed.components,
              product_meta("components" + b, "unwrap_components", "label", last_day,
                           hash, seed));
  for (size_t i = 0; i < processed.abs_phase.size(); ++i) {
    int idx = batch.date_idx[i];
    store.write(processed.abs_phase[i],
                product_meta(layer_name("phase", idx), "phase_rel_date0", "rad",
                             all_dates[static_cast<size_t>(idx)], hash, seed));
  }
}

void write_velocity_products(const RasterStore& store,
                             const std::vector<Raster<double>>& series,
                             const std::vector<int>& dates,
                             const PipelineConfig& cfg, const std::string& hash) {
  VelocityField vel = fit_velocity(series, dates);
  const double scale = mm_per_radian(cfg.va2.wavelength_mm);
  Raster<double> mm(vel.rad_per_year.rows(), vel.rad_per_year.cols());
  for (size_t i = 0; i < mm.size(); ++i)
    mm.storage()[i] = vel.rad_per_year.storage()[i] * scale;
  store.write(vel.rad_per_year, product_meta("velocity", "los_velocity", "rad/yr",
                                             dates.back(), hash, cfg.sim.seed));
  store.write(mm, product_meta("velocity_mm_yr", "los_velocity", "mm/yr",
                               dates.back(), hash, cfg.sim.seed));
  store.write(vel.valid, product_meta("velocity_valid", "velocity_valid", "flag",
                                      dates.back(), hash, cfg.sim.seed));
}

AmpStats read_stats(const RasterStore& store, const std::string& prefix,
                    double weight) {
  AmpStats stats;
  stats.mean = store.read_real(prefix + "_mean");
  stats.var = store.read_real(prefix + "_var");
  stats.weight = weight;
  return stats;
}

void write_stats(const RasterStore& store, const std::string& prefix,
                 const AmpStats& stats, const std::string& hash) {
  store.write(stats.mean, product_meta(prefix + "_mean", "amp_mean", "amplitude",
                                       0, hash, 0));
  store.write(stats.var, product_meta(prefix + "_var", "amp_var", "amplitude^2",
                                      0, hash, 0));
}

}  // namespace

std::string layer_name(const std::string& prefix, int idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", idx);
  return prefix + buf;
}

NetworkInversion invert_network(const IfgNetwork& net,
                                const std::vector<Raster<double>>& unwrapped,
                                const InversionConfig& inv, int threads) {
  if (static_cast<int>(unwrapped.size()) != net.n_pairs())
    throw DataError("one unwrapped raster per network pair is required");
  const int rows = unwrapped.front().rows(), cols = unwrapped.front().cols();
  const int n_pairs = net.n_pairs();
  const int n_x = net.n_dates() - 1;

  NetworkInversion out;
  out.date_phase.assign(static_cast<size_t>(n_x), Raster<double>(rows, cols));
  out.residuals.assign(static_cast<size_t>(n_pairs), Raster<double>(rows, cols));

  if (inv.method == InversionConfig::Method::L1) {
    L1Problem problem(net.incidence, inv.admm);
    parallel_for(rows, threads, [&](int r) {
      Eigen::VectorXd b(n_pairs);
      L1Problem::Solution warm;
      bool have_warm = false;  // warm starts chain along each row
      for (int c = 0; c < cols; ++c) {
        for (int p = 0; p < n_pairs; ++p) b(p) = unwrapped[static_cast<size_t>(p)](r, c);
        L1Problem::Solution sol = problem.solve(b, have_warm ? &warm : nullptr);
        Eigen::VectorXd resid = b - net.incidence * sol.x;
        for (int d = 0; d < n_x; ++d) out.date_phase[static_cast<size_t>(d)](r, c) = sol.x(d);
        for (int p = 0; p < n_pairs; ++p) out.residuals[static_cast<size_t>(p)](r, c) = resid(p);
        warm = std::move(sol);
        have_warm = true;
      }
    });
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(net.incidence);
    if (qr.rank() < n_x)
      throw NumericalError("network incidence matrix is rank deficient");
    parallel_for(rows, threads, [&](int r) {
      Eigen::VectorXd b(n_pairs);
      for (int c = 0; c < cols; ++c) {
        for (int p = 0; p < n_pairs; ++p) b(p) = unwrapped[static_cast<size_t>(p)](r, c);
        Eigen::VectorXd x = qr.solve(b);
        Eigen::VectorXd resid = b - net.incidence * x;
        for (int d = 0; d < n_x; ++d) out.date_phase[static_cast<size_t>(d)](r, c) = x(d);
        for (int p = 0; p < n_pairs; ++p) out.residuals[static_cast<size_t>(p)](r, c) = resid(p);
      }
    });
  }
  return out;
}

BatchProcessed process_batch(const BatchResult& batch,
                             const std::vector<int>& all_dates,
                             const Raster<double>& datum_abs,
                             const TruthScene* truth, const PipelineConfig& cfg,
                             int ref_row, int ref_col) {
  const int rows = batch.phase.front().rows(), cols = batch.phase.front().cols();
  Nodes nodes = batch_nodes(batch, all_dates);

  BatchProcessed out;
  out.resid_nonint = Raster<std::uint8_t>(rows, cols, 0);
  out.resid_cycles = Raster<std::uint8_t>(rows, cols, 0);

  if (nodes.days.size() < 2) {
    // Degenerate single-date batch 1: nothing to unwrap.
    out.components = Raster<std::int32_t>(rows, cols, 1);
    out.abs_phase.emplace_back(rows, cols, 0.0);
    out.ref_row = ref_row;
    out.ref_col = ref_col;
    return out;
  }

  IfgNetwork net = build_nearest3(nodes.days);
  std::vector<Raster<double>> wrapped = reform_interferograms(nodes.phase, net);
  UnwrappedStack unw = unwrap_pairs(wrapped, net, nodes.global_idx,
                                    batch.phase_similarity, truth, cfg);
  out.components = unw.components;

  if (ref_row < 0) {
    auto [r, c] = select_reference_pixel(batch.temporal_coherence, unw.components,
                                         cfg.reference_coherence_threshold);
    ref_row = r;
    ref_col = c;
  }
  out.ref_row = ref_row;
  out.ref_col = ref_col;
  spatial_reference(unw.unwrapped, ref_row, ref_col);

  NetworkInversion inv = invert_network(net, unw.unwrapped, cfg.inversion,
                                        cfg.threads);
  residual_counts(mask_unwrap_errors(inv.residuals, cfg.inversion.mask_tol),
                  out.resid_nonint, out.resid_cycles);

  // Chain to the absolute (date-0) reference. Network date 0 is the datum
  // node (or batch-1's first date, identically zero).
  const bool have_datum = !datum_abs.empty();
  for (size_t i = 0; i < batch.date_idx.size(); ++i) {
    int node = nodes.batch_offset + static_cast<int>(i);
    Raster<double> abs(rows, cols, 0.0);
    if (node > 0) abs = inv.date_phase[static_cast<size_t>(node - 1)];
    if (have_datum) {
      if (!abs.same_shape(datum_abs))
        throw DataError("datum product shape does not match the batch");
      for (size_t px = 0; px < abs.size(); ++px)
        abs.storage()[px] += datum_abs.storage()[px];
    }
    out.abs_phase.push_back(std::move(abs));
  }
  return out;
}

HistoricalOutputs run_historical(const PipelineConfig& cfg, const SlcStack& stack,
                                 const TruthScene* truth, int n_dates_limit) {
  stack.validate();
  int n = stack.n_layers();
  if (n_dates_limit >= 0) n = std::min(n, n_dates_limit);
  if (n < 2) throw DataError("historical mode needs at least two dates");

  MiniStackPlan plan =
      plan_mini_stacks(n, cfg.sequential.mini_stack_size,
                       cfg.sequential.max_compressed, cfg.sequential.scheme);

  HistoricalOutputs out;
  out.dates.assign(stack.dates.begin(), stack.dates.begin() + n);
  out.series.assign(static_cast<size_t>(n), Raster<double>());

  SequentialState state;
  state.dates = out.dates;
  for (const auto& entry : plan.batches) {
    BatchResult batch = run_batch(state, stack, entry.real_idx, cfg.sequential);
    Raster<double> datum_abs;
    if (batch.datum_idx != batch.date_idx.front())
      datum_abs = out.series[static_cast<size_t>(batch.datum_idx)];
    BatchProcessed processed = process_batch(batch, out.dates, datum_abs, truth,
                                             cfg, out.ref_row, out.ref_col);
    if (out.ref_row < 0) {
      out.ref_row = processed.ref_row;
      out.ref_col = processed.ref_col;
      state.ref_row = out.ref_row;
      state.ref_col = out.ref_col;
    }
    for (size_t i = 0; i < batch.date_idx.size(); ++i)
      out.series[static_cast<size_t>(batch.date_idx[i])] = processed.abs_phase[i];
    out.batches.push_back(std::move(batch));
    out.processed.push_back(std::move(processed));
  }
  out.velocity = fit_velocity(out.series, out.dates);
  out.final_state = std::move(state);
  return out;
}

ForwardStepResult forward_ingest(SequentialState& state,
                                 const Raster<std::complex<double>>& new_layer,
                                 int new_date_day, const TruthScene* truth,
                                 const PipelineConfig& cfg) {
  if (state.batches_done == 0)
    throw DataError("forward mode needs at least one completed mini-stack; "
                    "run historical mode first");
  if (state.ref_row < 0)
    throw DataError("persisted state carries no reference pixel; "
                    "run historical mode first");
  if (!new_layer.same_shape(state.rows, state.cols))
    throw DataError("new acquisition shape does not match the archive");
  if (!state.dates.empty() && new_date_day <= state.dates.back())
    throw DataError("new acquisition date must follow the archive");

  const int rows = state.rows, cols = state.cols;
  const int new_idx = static_cast<int>(state.dates.size());
  state.dates.push_back(new_date_day);
  state.partial_idx.push_back(new_idx);
  state.partial_layers.push_back(new_layer);

  std::vector<int> partial_days;
  for (int idx : state.partial_idx)
    partial_days.push_back(state.dates[static_cast<size_t>(idx)]);
  AssembledLink link = link_assembled(state, state.partial_layers,
                                      state.partial_idx, partial_days,
                                      cfg.sequential);

  // Network nodes in date order: datum (zero phase), the retained tail of
  // the previous batch, and the partial batch. All phases share the datum.
  struct Node {
    int day;
    int global_idx;
    Raster<double> phase;
  };
  std::vector<Node> nodes;
  nodes.push_back({state.dates[static_cast<size_t>(state.datum_idx)],
                   state.datum_idx, Raster<double>(rows, cols, 0.0)});
  for (size_t i = 0; i < state.recent_idx.size(); ++i) {
    if (state.recent_idx[i] == state.datum_idx) continue;
    nodes.push_back({state.dates[static_cast<size_t>(state.recent_idx[i])],
                     state.recent_idx[i], state.recent_phase[i]});
  }
  for (size_t i = 0; i < state.partial_idx.size(); ++i)
    nodes.push_back({partial_days[i], state.partial_idx[i],
                     link.field.phase[static_cast<size_t>(link.n_compressed) + i]});
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.day < b.day; });

  std::vector<int> node_days;
  std::vector<Raster<double>> node_phase;
  std::vector<int> node_global;
  for (auto& nd : nodes) {
    node_days.push_back(nd.day);
    node_global.push_back(nd.global_idx);
    node_phase.push_back(std::move(nd.phase));
  }

  IfgNetwork full = build_nearest3(node_days);
  const int newest = std::min<int>(4, static_cast<int>(node_days.size()));
  std::vector<int> kept;
  IfgNetwork sub = forward_subset(full, newest, &kept);

  std::vector<Raster<double>> kept_phase;
  std::vector<int> kept_global;
  for (int idx : kept) {
    kept_phase.push_back(node_phase[static_cast<size_t>(idx)]);
    kept_global.push_back(node_global[static_cast<size_t>(idx)]);
  }
  std::vector<Raster<double>> wrapped = reform_interferograms(kept_phase, sub);

  // Quality for the subset pairs only.
  std::vector<Raster<std::complex<float>>> phasors;
  phasors.reserve(wrapped.size());
  for (const auto& w : wrapped) {
    Raster<std::complex<float>> ph(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        ph(r, c) = std::complex<float>(static_cast<float>(std::cos(w(r, c))),
                                       static_cast<float>(std::sin(w(r, c))));
    phasors.push_back(std::move(ph));
  }
  Raster<double> quality = phase_similarity_raster(
      phasors, cfg.sequential.similarity_radius_px, cfg.threads);

  UnwrappedStack unw = unwrap_pairs(wrapped, sub, kept_global, quality, truth, cfg);
  spatial_reference(unw.unwrapped, state.ref_row, state.ref_col);
  NetworkInversion inv = invert_network(sub, unw.unwrapped, cfg.inversion,
                                        cfg.threads);

  ForwardStepResult result;
  result.date_idx = new_idx;
  result.subset_ref_idx = kept_global.front();
  const int n_kept = static_cast<int>(kept.size());
  result.rel_subset_ref = inv.date_phase.back();  // newest vs earliest kept
  result.prev_idx = kept_global[static_cast<size_t>(n_kept - 2)];
  result.rel_prev = inv.date_phase.back();
  if (n_kept >= 3) {
    const Raster<double>& prev = inv.date_phase[static_cast<size_t>(n_kept - 3)];
    for (size_t i = 0; i < result.rel_prev.size(); ++i)
      result.rel_prev.storage()[i] -= prev.storage()[i];
  }

  if (static_cast<int>(state.partial_idx.size()) == cfg.sequential.mini_stack_size) {
    std::vector<Raster<std::complex<double>>> reals = std::move(state.partial_layers);
    std::vector<int> idxs = state.partial_idx;
    state.partial_layers.clear();
    state.partial_idx.clear();
    result.completed = run_batch_layers(state, reals, idxs, partial_days,
                                        cfg.sequential);
    result.completed_batch = true;
  }
  return result;
}

std::pair<TruthScene, SlcStack> simulate_from_config(const PipelineConfig& cfg) {
  TruthScene truth =
      build_truth_scene(cfg.sim.rows, cfg.sim.cols, cfg.sim.dates,
                        cfg.sim.bowl_rate_rad_yr, cfg.sim.tropo_std, cfg.sim.seed,
                        cfg.sim.truth);
  SlcStack stack = simulate_stack(cfg.sim.model, truth,
                                  cfg.sim.seed + 0x517cc1b727220a95ULL, cfg.threads);
  return {std::move(truth), std::move(stack)};
}

void cmd_simulate(const PipelineConfig& cfg, const std::string& out_dir) {
  const std::string hash = config_hash(cfg);
  auto [truth, stack] = simulate_from_config(cfg);

  RasterStore store{std::filesystem::path(out_dir)};
  for (int d = 0; d < stack.n_layers(); ++d) {
    store.write(stack.layers[static_cast<size_t>(d)],
                product_meta(layer_name("slc", d), "real", "amplitude",
                             stack.dates[static_cast<size_t>(d)], hash, cfg.sim.seed));
    store.write(truth.phase[static_cast<size_t>(d)],
                product_meta(layer_name("truth", d), "truth_phase", "rad",
                             stack.dates[static_cast<size_t>(d)], hash, cfg.sim.seed));
  }
  store.write(truth.bowl_profile,
              product_meta("bowl_profile", "truth_bowl", "unitless", 0, hash,
                           cfg.sim.seed));

  json manifest;
  manifest["command"] = "simulate";
  manifest["configHash"] = hash;
  manifest["config"] = json::parse(serialize_config(cfg));
  manifest["nDates"] = stack.n_layers();
  manifest["shape"] = {cfg.sim.rows, cfg.sim.cols};
  manifest["bowlRateRadYr"] = cfg.sim.bowl_rate_rad_yr;
  write_json_file(std::filesystem::path(out_dir) / "manifest.json", manifest);
}

SlcStack load_stack(const RasterStore& store) {
  SlcStack stack;
  for (const std::string& name : store.list()) {
    if (name.rfind("slc_", 0) != 0) continue;
    LayerMeta meta;
    stack.layers.push_back(store.read_complex(name, &meta));
    stack.dates.push_back(meta.date);
    LayerKind kind;
    if (meta.kind == "compressed") {
      kind.type = LayerKind::Type::Compressed;
      kind.ref_label = meta.ref_label;
      kind.first_idx = meta.first_idx;
      kind.last_idx = meta.last_idx;
    }
    stack.kinds.push_back(kind);
  }
  if (stack.layers.empty()) throw DataError("no slc_* layers in the input store");
  for (size_t i = 1; i < stack.dates.size(); ++i)
    if (stack.dates[i] <= stack.dates[i - 1])
      throw DataError("input stack dates must be strictly increasing");
  stack.validate();
  return stack;
}

std::optional<TruthScene> load_truth(const RasterStore& store) {
  TruthScene truth;
  for (const std::string& name : store.list()) {
    if (name.rfind("truth_", 0) != 0) continue;
    LayerMeta meta;
    truth.phase.push_back(store.read_real(name, &meta));
    truth.dates.push_back(meta.date);
  }
  if (truth.phase.empty()) return std::nullopt;
  if (store.exists("bowl_profile")) truth.bowl_profile = store.read_real("bowl_profile");
  auto manifest_path = store.dir() / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    json manifest = read_json_file(manifest_path, "store manifest");
    if (manifest.contains("bowlRateRadYr"))
      truth.bowl_rate_rad_yr = manifest["bowlRateRadYr"].get<double>();
  }
  return truth;
}

void save_state(const SequentialState& state, const RasterStore& store,
                const std::string& hash) {
  std::filesystem::create_directories(store.dir());
  for (const auto& entry : std::filesystem::directory_iterator(store.dir())) {
    const std::string stem = entry.path().filename().string();
    if (stem.rfind("state_", 0) == 0) std::filesystem::remove(entry.path());
  }

  json j;
  j["batchesDone"] = state.batches_done;
  j["datumIdx"] = state.datum_idx;
  j["rows"] = state.rows;
  j["cols"] = state.cols;
  j["dates"] = state.dates;
  j["refRow"] = state.ref_row;
  j["refCol"] = state.ref_col;
  j["compressedLabels"] = state.compressed_labels;
  j["recentIdx"] = state.recent_idx;
  j["partialIdx"] = state.partial_idx;
  j["configHash"] = hash;

  json comp_weights = json::array();
  for (size_t i = 0; i < state.compressed.size(); ++i) {
    const CompressedSlc& comp = state.compressed[i];
    std::string prefix = "state_comp" + layer_name("", static_cast<int>(i));
    LayerMeta meta = product_meta(prefix, "compressed", "amplitude", 0, hash, 0);
    meta.ref_label = comp.ref_label;
    meta.first_idx = comp.first_idx;
    meta.last_idx = comp.last_idx;
    store.write(comp.data, meta);
    write_stats(store, prefix, comp.stats, hash);
    comp_weights.push_back(comp.stats.weight);
  }
  j["compressedWeights"] = comp_weights;

  if (state.merged_stats) {
    write_stats(store, "state_merged", *state.merged_stats, hash);
    j["mergedWeight"] = state.merged_stats->weight;
  }
  for (size_t i = 0; i < state.recent_phase.size(); ++i)
    store.write(state.recent_phase[i],
                product_meta("state_recent" + layer_name("", static_cast<int>(i)),
                             "recent_phase", "rad",
                             state.dates[static_cast<size_t>(state.recent_idx[i])],
                             hash, 0));
  for (size_t i = 0; i < state.partial_layers.size(); ++i)
    store.write(state.partial_layers[i],
                product_meta("state_partial" + layer_name("", static_cast<int>(i)),
                             "real", "amplitude",
                             state.dates[static_cast<size_t>(state.partial_idx[i])],
                             hash, 0));

  write_json_file(store.dir() / "state.json", j);
}

SequentialState load_state(const RasterStore& store) {
  auto path = store.dir() / "state.json";
  if (!std::filesystem::exists(path))
    throw DataError("no persisted state at " + store.dir().string() +
                    "; run historical mode first");
  json j = read_json_file(path, "state manifest");

  SequentialState state;
  try {
    state.batches_done = j.at("batchesDone").get<int>();
    state.datum_idx = j.at("datumIdx").get<int>();
    state.rows = j.at("rows").get<int>();
    state.cols = j.at("cols").get<int>();
    state.dates = j.at("dates").get<std::vector<int>>();
    state.ref_row = j.at("refRow").get<int>();
    state.ref_col = j.at("refCol").get<int>();
    state.compressed_labels = j.at("compressedLabels").get<std::vector<int>>();
    state.recent_idx = j.at("recentIdx").get<std::vector<int>>();
    state.partial_idx = j.at("partialIdx").get<std::vector<int>>();

    auto comp_weights = j.at("compressedWeights").get<std::vector<double>>();
    for (size_t i = 0; i < comp_weights.size(); ++i) {
      std::string prefix = "state_comp" + layer_name("", static_cast<int>(i));
      CompressedSlc comp;
      LayerMeta meta;
      comp.data = store.read_complex(prefix, &meta);
      comp.ref_label = meta.ref_label;
      comp.first_idx = meta.first_idx;
      comp.last_idx = meta.last_idx;
      comp.stats = read_stats(store, prefix, comp_weights[i]);
      state.compressed.push_back(std::move(comp));
    }
    if (j.contains("mergedWeight"))
      state.merged_stats =
          read_stats(store, "state_merged", j.at("mergedWeight").get<double>());
    for (size_t i = 0; i < state.recent_idx.size(); ++i)
      state.recent_phase.push_back(
          store.read_real("state_recent" + layer_name("", static_cast<int>(i))));
    for (size_t i = 0; i < state.partial_idx.size(); ++i)
      state.partial_layers.push_back(
          store.read_complex("state_partial" + layer_name("", static_cast<int>(i))));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed state manifest: ") + e.what());
  }
  return state;
}

namespace {

std::filesystem::path state_dir_for(const PipelineConfig& cfg,
                                    const std::string& out_dir) {
  if (!cfg.state_dir.empty()) return cfg.state_dir;
  return std::filesystem::path(out_dir) / "state";
}

Raster<double> read_series_layer(const RasterStore& store, int idx) {
  const std::string name = layer_name("phase", idx);
  if (!store.exists(name))
    throw DataError("missing product layer " + name +
                    "; earlier batches must be processed first");
  return store.read_real(name);
}

}  // namespace

void cmd_historical(const PipelineConfig& cfg, const std::string& input_dir,
                    const std::string& out_dir) {
  const std::string hash = config_hash(cfg);
  RasterStore in_store{std::filesystem::path(input_dir)};
  SlcStack stack = load_stack(in_store);
  std::optional<TruthScene> truth = load_truth(in_store);
  if (cfg.unwrap.method == UnwrapConfig::Method::Oracle) {
    if (!truth)
      throw DataError("the oracle unwrapper needs truth_* layers in " + input_dir);
    if (truth->dates != stack.dates)
      throw DataError("truth layers do not cover the stack dates");
  }

  RasterStore out_store{std::filesystem::path(out_dir)};
  RasterStore state_store{state_dir_for(cfg, out_dir)};

  SequentialState state;
  const bool resume = std::filesystem::exists(state_store.dir() / "state.json");
  if (resume) {
    state = load_state(state_store);
    if (state.rows != stack.rows() || state.cols != stack.cols())
      throw DataError("persisted state shape does not match the input stack");
    json j = read_json_file(state_store.dir() / "state.json", "state manifest");
    if (j.value("configHash", hash) != hash)
      std::cerr << "warning: persisted state was produced with a different "
                   "configuration; clear " << state_store.dir().string()
                << " to reprocess from scratch\n";
    if (cfg.verbose)
      std::cerr << "resuming after " << state.batches_done << " completed batches\n";
  }

  MiniStackPlan plan =
      plan_mini_stacks(stack.n_layers(), cfg.sequential.mini_stack_size,
                       cfg.sequential.max_compressed, cfg.sequential.scheme);

  std::vector<Raster<double>> series(static_cast<size_t>(stack.n_layers()));
  for (int b = 0; b < static_cast<int>(plan.batches.size()); ++b) {
    const auto& entry = plan.batches[static_cast<size_t>(b)];
    if (b < state.batches_done) continue;  // already processed and persisted

    BatchResult batch = run_batch(state, stack, entry.real_idx, cfg.sequential);
    Raster<double> datum_abs;
    if (batch.datum_idx != batch.date_idx.front()) {
      Raster<double>& cached = series[static_cast<size_t>(batch.datum_idx)];
      if (cached.empty()) cached = read_series_layer(out_store, batch.datum_idx);
      datum_abs = cached;
    }
    BatchProcessed processed = process_batch(batch, stack.dates, datum_abs,
                                             truth ? &*truth : nullptr, cfg,
                                             state.ref_row, state.ref_col);
    if (state.ref_row < 0) {
      state.ref_row = processed.ref_row;
      state.ref_col = processed.ref_col;
    }
    for (size_t i = 0; i < batch.date_idx.size(); ++i)
      series[static_cast<size_t>(batch.date_idx[i])] = processed.abs_phase[i];
    write_batch_products(out_store, batch, processed, stack.dates, b, hash,
                         cfg.sim.seed);
    save_state(state, state_store, hash);
    if (cfg.verbose)
      std::cerr << "batch " << (b + 1) << "/" << plan.batches.size() << " done\n";
  }

  for (int d = 0; d < stack.n_layers(); ++d)
    if (series[static_cast<size_t>(d)].empty())
      series[static_cast<size_t>(d)] = read_series_layer(out_store, d);
  write_velocity_products(out_store, series, stack.dates, cfg, hash);

  json manifest;
  manifest["command"] = "historical";
  manifest["configHash"] = hash;
  manifest["config"] = json::parse(serialize_config(cfg));
  manifest["nDates"] = stack.n_layers();
  manifest["batches"] = plan.batches.size();
  manifest["refPixel"] = {state.ref_row, state.ref_col};
  write_json_file(std::filesystem::path(out_dir) / "manifest.json", manifest);
}

void cmd_forward(const PipelineConfig& cfg, const std::string& state_dir,
                 const std::string& input_dir, const std::string& out_dir) {
  const std::string hash = config_hash(cfg);
  RasterStore state_store{std::filesystem::path(state_dir)};
  SequentialState state = load_state(state_store);

  RasterStore in_store{std::filesystem::path(input_dir)};
  std::optional<TruthScene> truth = load_truth(in_store);

  // New acquisitions: slc_* layers dated after the archive.
  struct NewLayer {
    int date;
    std::string name;
  };
  std::vector<NewLayer> incoming;
  for (const std::string& name : in_store.list()) {
    if (name.rfind("slc_", 0) != 0) continue;
    LayerMeta meta = in_store.read_meta(name);
    if (state.dates.empty() || meta.date > state.dates.back())
      incoming.push_back({meta.date, name});
  }
  std::sort(incoming.begin(), incoming.end(),
            [](const NewLayer& a, const NewLayer& b) { return a.date < b.date; });
  if (incoming.empty())
    throw DataError("no new acquisitions found in " + input_dir);

  RasterStore out_store{std::filesystem::path(out_dir)};

  // Archived absolute phase of a date: batch product, forward product, or
  // identically zero for date 0 (the global reference).
  auto archived_abs = [&](int idx) -> Raster<double> {
    const std::string batch_name = layer_name("phase", idx);
    if (out_store.exists(batch_name)) return out_store.read_real(batch_name);
    const std::string fwd_name = layer_name("forward_abs", idx);
    if (state_store.exists(fwd_name)) return state_store.read_real(fwd_name);
    if (idx == 0) return Raster<double>(state.rows, state.cols, 0.0);
    throw DataError("missing archived product " + batch_name +
                    "; point --out at the historical product directory");
  };

  json ingested = json::array();
  for (const NewLayer& item : incoming) {
    Raster<std::complex<double>> layer = in_store.read_complex(item.name);
    ForwardStepResult step =
        forward_ingest(state, layer, item.date, truth ? &*truth : nullptr, cfg);

    // Absolute (date-0) value via the archived subset-reference product.
    Raster<double> ref_abs = archived_abs(step.subset_ref_idx);
    Raster<double> abs = step.rel_subset_ref;
    for (size_t i = 0; i < abs.size(); ++i) abs.storage()[i] += ref_abs.storage()[i];
    state_store.write(abs, product_meta(layer_name("forward_abs", step.date_idx),
                                        "phase_rel_date0", "rad", item.date, hash,
                                        cfg.sim.seed));

    if (cfg.forward_output_option == 1) {
      LayerMeta meta = product_meta(layer_name("forward_phase_rel_prev", step.date_idx),
                                    "phase_rel_prev", "rad", item.date, hash,
                                    cfg.sim.seed);
      meta.first_idx = step.prev_idx;
      meta.last_idx = step.date_idx;
      out_store.write(step.rel_prev, meta);
    } else {
      out_store.write(abs, product_meta(layer_name("forward_phase", step.date_idx),
                                        "phase_rel_date0", "rad", item.date, hash,
                                        cfg.sim.seed));
    }

    if (step.completed_batch) {
      const BatchResult& batch = step.completed;
      Raster<double> datum_abs;
      if (batch.datum_idx != batch.date_idx.front())
        datum_abs = archived_abs(batch.datum_idx);
      BatchProcessed processed =
          process_batch(batch, state.dates, datum_abs, truth ? &*truth : nullptr,
                        cfg, state.ref_row, state.ref_col);
      write_batch_products(out_store, batch, processed, state.dates,
                           state.batches_done - 1, hash, cfg.sim.seed);
    }
    save_state(state, state_store, hash);
    json record;
    record["dateIdx"] = step.date_idx;
    record["date"] = item.date;
    record["relPrevIdx"] = step.prev_idx;
    record["subsetRefIdx"] = step.subset_ref_idx;
    record["completedBatch"] = step.completed_batch;
    ingested.push_back(record);
    if (cfg.verbose) std::cerr << "ingested date index " << step.date_idx << "\n";
  }

  json manifest;
  manifest["command"] = "forward";
  manifest["configHash"] = hash;
  manifest["outputOption"] = cfg.forward_output_option;
  manifest["ingested"] = ingested;
  write_json_file(std::filesystem::path(out_dir) / "forward_manifest.json", manifest);
}

}  // namespace seqlink
