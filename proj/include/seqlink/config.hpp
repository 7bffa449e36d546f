// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqlink/inversion.hpp"
#include "seqlink/network.hpp"
#include "seqlink/sequential.hpp"
#include "seqlink/sim.hpp"

namespace seqlink {

struct SimConfig {
  int rows = 200;
  int cols = 200;
  CoherenceModel model{1.0, 0.0, 60.0};
  double bowl_rate_rad_yr = 5.0;
  double tropo_std = 0.0;
  std::uint64_t seed = 42;
  std::vector<int> dates;  // days; built from count/spacing when not explicit
  TruthOptions truth;
};

struct UnwrapConfig {
  enum class Method { Oracle, Spatial };
  Method method = Method::Oracle;
  double error_fraction = 0.0;
  int region_size = 8;
  std::uint64_t seed = 1;
  double quality_threshold = 0.3;
};

struct InversionConfig {
  enum class Method { L1, Lsq };
  Method method = Method::L1;
  L1Problem::Options admm;
  double mask_tol = 0.5;
};

struct Va2Config {
  double wavelength_mm = 55.47;
  int pairs = 100000;
  double max_distance_km = 50.0;
  double threshold_mm_yr = 5.0;
  double pass_fraction = 0.68;
  double bin_width_km = 5.0;
  std::uint64_t seed = 123;
};

// The full pipeline configuration: every module's keys in one document.
// Unknown keys are rejected; defaults are applied and echoed back out, so
// the canonical serialization (and its hash) always reflects what ran.
struct PipelineConfig {
  SimConfig sim;
  SequentialConfig sequential;
  std::string state_dir;  // empty: <outDir>/state
  UnwrapConfig unwrap;
  InversionConfig inversion;
  double reference_coherence_threshold = 0.95;
  int forward_output_option = 1;
  double pixel_spacing_m = 30.0;
  double similarity_radius_m = 200.0;
  Va2Config va2;
  int threads = 1;
  bool verbose = false;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

// Canonical serialization: object keys sorted, defaults filled in.
std::string serialize_config(const PipelineConfig& cfg);

// FNV-1a hash of the canonical serialization, hex-encoded.
std::string config_hash(const PipelineConfig& cfg);

// Disk radius in pixels for the phase-similarity metric.
int similarity_radius_px(const PipelineConfig& cfg);

}  // namespace seqlink
