// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <vector>

#include "seqlink/sequential.hpp"
#include "seqlink/sim.hpp"
#include "seqlink/wrap.hpp"

using namespace seqlink;

namespace {

std::vector<int> spaced_dates(int n, int step = 12) {
  std::vector<int> d(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] = 1 + i * step;
  return d;
}

// Noiseless stack with spatially constant truth phases: every pixel is a
// rank-1 draw carrying exactly phase[d], so window mixing is harmless.
SlcStack noiseless_stack(int rows, int cols, const std::vector<double>& phase,
                         std::uint64_t seed) {
  TruthScene truth;
  truth.dates = spaced_dates(static_cast<int>(phase.size()));
  truth.bowl_profile = Raster<double>(rows, cols, 0.0);
  for (double p : phase) {
    truth.phase.emplace_back(rows, cols, p);
    truth.troposphere.emplace_back(rows, cols, 0.0);
  }
  return simulate_stack(CoherenceModel{1.0, 1.0, 60.0}, truth, seed);
}

SequentialConfig tiny_config(int m) {
  SequentialConfig cfg;
  cfg.mini_stack_size = m;
  cfg.max_compressed = 6;
  cfg.shp_half_x = 1;
  cfg.shp_half_y = 1;
  cfg.glrt_trials = 20000;
  cfg.similarity_radius_px = 2;
  return cfg;
}

}  // namespace

TEST_CASE("plan: three four-date batches") {
  MiniStackPlan plan = plan_mini_stacks(12, 4, 6, CompressionScheme::FirstDate);
  REQUIRE(plan.batches.size() == 3);

  CHECK(plan.batches[0].compressed_labels.empty());
  CHECK(plan.batches[0].real_idx == std::vector<int>{0, 1, 2, 3});
  CHECK(plan.batches[0].ref_layer == 0);  // first acquisition is the reference

  CHECK(plan.batches[1].compressed_labels == std::vector<int>{1});
  CHECK(plan.batches[1].real_idx == std::vector<int>{4, 5, 6, 7});
  CHECK(plan.batches[1].ref_layer == 0);  // the single compressed layer

  CHECK(plan.batches[2].compressed_labels == std::vector<int>{1, 2});
  CHECK(plan.batches[2].real_idx == std::vector<int>{8, 9, 10, 11});
  CHECK(plan.batches[2].ref_layer == 1);  // newest compressed layer
}

TEST_CASE("plan: few dates make a single batch") {
  MiniStackPlan plan = plan_mini_stacks(4, 15, 6, CompressionScheme::FirstDate);
  REQUIRE(plan.batches.size() == 1);
  CHECK(plan.batches[0].real_idx == std::vector<int>{0, 1, 2, 3});
  CHECK(plan.batches[0].ref_layer == 0);
}

TEST_CASE("plan: retention keeps the newest K compressed layers") {
  MiniStackPlan plan = plan_mini_stacks(60, 15, 2, CompressionScheme::FirstDate);
  REQUIRE(plan.batches.size() == 4);
  CHECK(plan.batches[3].compressed_labels == std::vector<int>{2, 3});
  for (const auto& b : plan.batches)
    CHECK(b.compressed_labels.size() <= 2);

  MiniStackPlan k1 = plan_mini_stacks(12, 4, 1, CompressionScheme::FirstDate);
  CHECK(k1.batches[2].compressed_labels == std::vector<int>{2});
}

TEST_CASE("plan: final partial batch is processed, not deferred") {
  MiniStackPlan plan = plan_mini_stacks(10, 4, 6, CompressionScheme::FirstDate);
  REQUIRE(plan.batches.size() == 3);
  CHECK(plan.batches[2].real_idx == std::vector<int>{8, 9});
}

TEST_CASE("plan: validation") {
  CHECK_THROWS_AS(plan_mini_stacks(12, 1, 6, CompressionScheme::FirstDate), ConfigError);
  CHECK_THROWS_AS(plan_mini_stacks(12, 4, 0, CompressionScheme::FirstDate), ConfigError);
  CHECK_THROWS_AS(plan_mini_stacks(1, 4, 6, CompressionScheme::FirstDate), DataError);
}

TEST_CASE("run_batch: noiseless first-date outputs equal the truth") {
  const int rows = 6, cols = 6;
  std::vector<double> phase = {0.0, 0.7, -1.1, 2.9, 0.4, -2.2, 1.6, 3.0};
  SlcStack stack = noiseless_stack(rows, cols, phase, 2001);
  SequentialConfig cfg = tiny_config(4);

  SequentialState state;
  state.rows = rows;
  state.cols = cols;
  MiniStackPlan plan =
      plan_mini_stacks(stack.n_layers(), 4, 6, CompressionScheme::FirstDate);
  for (const auto& b : plan.batches) {
    BatchResult res = run_batch(state, stack, b.real_idx, cfg);
    CHECK(res.datum_idx == 0);  // first-date scheme never moves the datum
    for (size_t i = 0; i < res.date_idx.size(); ++i) {
      double expect = wrap_phase(phase[static_cast<size_t>(res.date_idx[i])] - phase[0]);
      for (double v : res.phase[i].storage())
        CHECK(std::abs(wrap_phase(v - expect)) < 1e-9);
    }
    // noiseless input: the fit is exact everywhere
    for (double g : res.temporal_coherence.storage()) CHECK(g > 1.0 - 1e-9);
  }
  CHECK(state.batches_done == 2);
  CHECK(state.compressed.size() == 2);
  CHECK(state.compressed_labels == std::vector<int>{1, 2});
}

TEST_CASE("run_batch: last-per-ministack datum advances and daisy-chains") {
  const int rows = 5, cols = 5;
  std::vector<double> phase = {0.0, 1.3, -0.8, 2.4, -2.9, 0.6};
  SlcStack stack = noiseless_stack(rows, cols, phase, 77);
  SequentialConfig cfg = tiny_config(3);
  cfg.scheme = CompressionScheme::LastPerMiniStack;

  SequentialState state;
  state.rows = rows;
  state.cols = cols;
  BatchResult b0 = run_batch(state, stack, {0, 1, 2}, cfg);
  CHECK(b0.datum_idx == 0);
  BatchResult b1 = run_batch(state, stack, {3, 4, 5}, cfg);
  // batch 2 outputs are relative to the last real date of batch 1
  CHECK(b1.datum_idx == 2);

  for (size_t i = 0; i < b1.date_idx.size(); ++i) {
    double expect_rel =
        wrap_phase(phase[static_cast<size_t>(b1.date_idx[i])] - phase[2]);
    // daisy chain through batch 1's output at the datum date
    double chained = wrap_phase(b1.phase[i](2, 2) + b0.phase[2](2, 2));
    CHECK(std::abs(wrap_phase(b1.phase[i](2, 2) - expect_rel)) < 1e-9);
    CHECK(std::abs(wrap_phase(chained -
                              (phase[static_cast<size_t>(b1.date_idx[i])] - phase[0]))) < 1e-9);
  }
}

TEST_CASE("run_batch_layers matches run_batch") {
  const int rows = 5, cols = 5;
  std::vector<double> phase = {0.0, 0.9, -1.7, 2.1};
  SlcStack stack = noiseless_stack(rows, cols, phase, 31);
  SequentialConfig cfg = tiny_config(4);

  SequentialState a, b;
  a.rows = b.rows = rows;
  a.cols = b.cols = cols;
  b.dates = stack.dates;
  BatchResult via_stack = run_batch(a, stack, {0, 1, 2, 3}, cfg);
  BatchResult via_layers =
      run_batch_layers(b, stack.layers, {0, 1, 2, 3}, stack.dates, cfg);

  REQUIRE(via_stack.phase.size() == via_layers.phase.size());
  for (size_t d = 0; d < via_stack.phase.size(); ++d)
    for (size_t i = 0; i < via_stack.phase[d].size(); ++i)
      CHECK(via_stack.phase[d].storage()[i] == via_layers.phase[d].storage()[i]);
  for (size_t i = 0; i < via_stack.temporal_coherence.size(); ++i)
    CHECK(via_stack.temporal_coherence.storage()[i] ==
          via_layers.temporal_coherence.storage()[i]);
}

TEST_CASE("run_batch: state evolution is deterministic") {
  const int rows = 4, cols = 4;
  std::vector<double> phase = {0.0, 0.5, 1.5, -2.5, 0.2, 2.8};
  SequentialConfig cfg = tiny_config(3);

  auto run_twice = [&](std::uint64_t seed) {
    SlcStack stack = noiseless_stack(rows, cols, phase, seed);
    SequentialState state;
    state.rows = rows;
    state.cols = cols;
    run_batch(state, stack, {0, 1, 2}, cfg);
    run_batch(state, stack, {3, 4, 5}, cfg);
    return state;
  };
  SequentialState s1 = run_twice(11), s2 = run_twice(11);
  REQUIRE(s1.compressed.size() == s2.compressed.size());
  for (size_t k = 0; k < s1.compressed.size(); ++k) {
    const auto& d1 = s1.compressed[k].data.storage();
    const auto& d2 = s2.compressed[k].data.storage();
    CHECK(std::memcmp(d1.data(), d2.data(), d1.size() * sizeof(d1[0])) == 0);
  }
  REQUIRE(s1.recent_phase.size() == s2.recent_phase.size());
  for (size_t k = 0; k < s1.recent_phase.size(); ++k) {
    const auto& r1 = s1.recent_phase[k].storage();
    const auto& r2 = s2.recent_phase[k].storage();
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
  }
  CHECK(s1.datum_idx == s2.datum_idx);
  CHECK(s1.recent_idx == s2.recent_idx);
}

TEST_CASE("run_batch: compressed retention is capped at K") {
  const int rows = 4, cols = 4;
  std::vector<double> phase(9, 0.0);
  for (size_t i = 0; i < phase.size(); ++i) phase[i] = wrap_phase(0.9 * static_cast<double>(i));
  SlcStack stack = noiseless_stack(rows, cols, phase, 5);
  SequentialConfig cfg = tiny_config(3);
  cfg.max_compressed = 1;

  SequentialState state;
  state.rows = rows;
  state.cols = cols;
  run_batch(state, stack, {0, 1, 2}, cfg);
  run_batch(state, stack, {3, 4, 5}, cfg);
  run_batch(state, stack, {6, 7, 8}, cfg);
  CHECK(state.compressed.size() == 1);
  CHECK(state.compressed_labels == std::vector<int>{3});
  CHECK(state.batches_done == 3);
}

TEST_CASE("independent batches plus datum adjustment recover the series") {
  const int rows = 5, cols = 5;
  std::vector<double> phase = {0.0, 0.8, -1.9, 2.6, -0.4, 1.1};
  SlcStack stack = noiseless_stack(rows, cols, phase, 909);
  SequentialConfig cfg = tiny_config(3);

  IndependentBatches ind = run_independent_batches(stack, cfg);
  REQUIRE(ind.batches.size() == 2);
  REQUIRE(ind.compressed.size() == 2);
  // each batch is referenced to its own first date
  for (size_t i = 0; i < ind.batches[1].date_idx.size(); ++i) {
    double expect = wrap_phase(phase[static_cast<size_t>(ind.batches[1].date_idx[i])] -
                               phase[3]);
    for (double v : ind.batches[1].phase[i].storage())
      CHECK(std::abs(wrap_phase(v - expect)) < 1e-9);
  }

  std::vector<Raster<double>> adjusted = datum_adjust_baseline(ind, cfg);
  REQUIRE(adjusted.size() == phase.size());
  for (size_t d = 0; d < phase.size(); ++d) {
    double expect = wrap_phase(phase[d] - phase[0]);
    for (double v : adjusted[d].storage())
      CHECK(std::abs(wrap_phase(v - expect)) < 1e-9);
  }
}

TEST_CASE("datum adjustment with one batch is the identity") {
  const int rows = 4, cols = 4;
  std::vector<double> phase = {0.0, 0.6, -0.9};
  SlcStack stack = noiseless_stack(rows, cols, phase, 15);
  SequentialConfig cfg = tiny_config(3);
  IndependentBatches ind = run_independent_batches(stack, cfg);
  REQUIRE(ind.batches.size() == 1);
  std::vector<Raster<double>> adjusted = datum_adjust_baseline(ind, cfg);
  REQUIRE(adjusted.size() == 3);
  for (size_t d = 0; d < 3; ++d)
    for (size_t i = 0; i < adjusted[d].size(); ++i)
      CHECK(std::abs(wrap_phase(adjusted[d].storage()[i] -
                                ind.batches[0].phase[d].storage()[i])) < 1e-12);
}
