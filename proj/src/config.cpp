// SPDX-License-Identifier: Apache-2.0
#include "seqlink/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "seqlink/errors.hpp"
#include "seqlink/store.hpp"

namespace seqlink {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

// Consume known keys and reject leftovers, so typos never pass silently.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) bad("config section '" + name_ + "' must be an object");
    obj_ = j;
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      bad("config key '" + name_ + "." + key + "' has the wrong type");
    }
    taken_.insert(key);
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& raw(const char* key) {
    taken_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!taken_.count(it.key()))
        bad("unknown config key '" + name_ + "." + it.key() + "'");
  }

 private:
  json obj_;
  std::string name_;
  std::set<std::string> taken_;
};

std::vector<int> parse_dates(Section& sim) {
  if (!sim.has("dates")) {
    std::vector<int> days;
    for (int i = 0; i < 60; ++i) days.push_back(i * 12);
    return days;
  }
  const json& j = sim.raw("dates");
  std::vector<int> days;
  if (j.is_array()) {
    try {
      days = j.get<std::vector<int>>();
    } catch (const json::exception&) {
      bad("config key 'sim.dates' must be an integer array or {count,spacingDays}");
    }
  } else if (j.is_object()) {
    Section d(j, "sim.dates");
    int count = 60, spacing = 12, start = 0;
    d.get("count", count);
    d.get("spacingDays", spacing);
    d.get("startDay", start);
    d.finish();
    if (count < 2) bad("sim.dates.count must be at least 2");
    if (spacing <= 0) bad("sim.dates.spacingDays must be positive");
    for (int i = 0; i < count; ++i) days.push_back(start + i * spacing);
  } else {
    bad("config key 'sim.dates' must be an integer array or {count,spacingDays}");
  }
  if (days.size() < 2) bad("sim.dates must contain at least 2 dates");
  for (size_t i = 1; i < days.size(); ++i)
    if (days[i] <= days[i - 1]) bad("sim.dates must be strictly increasing");
  return days;
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) bad("config root must be a JSON object");

  PipelineConfig cfg;
  Section top(root, "");

  if (top.has("sim")) {
    Section s(top.raw("sim"), "sim");
    std::vector<int> shape{cfg.sim.rows, cfg.sim.cols};
    s.get("shape", shape);
    if (shape.size() != 2 || shape[0] < 1 || shape[1] < 1)
      bad("sim.shape must be [rows, cols] with positive entries");
    cfg.sim.rows = shape[0];
    cfg.sim.cols = shape[1];
    s.get("rho0", cfg.sim.model.rho0);
    s.get("rhoInf", cfg.sim.model.rho_inf);
    s.get("tauDays", cfg.sim.model.tau_days);
    s.get("bowlRateRadYr", cfg.sim.bowl_rate_rad_yr);
    s.get("tropoStd", cfg.sim.tropo_std);
    s.get("seed", cfg.sim.seed);
    s.get("bowlSigmaFrac", cfg.sim.truth.bowl_sigma_frac);
    s.get("bowlCenterRowFrac", cfg.sim.truth.bowl_center_row_frac);
    s.get("bowlCenterColFrac", cfg.sim.truth.bowl_center_col_frac);
    s.get("tropoCorrFrac", cfg.sim.truth.tropo_corr_frac);
    cfg.sim.dates = parse_dates(s);
    s.finish();
  } else {
    Section s(json::object(), "sim");
    cfg.sim.dates = parse_dates(s);
  }

  if (top.has("scene")) {
    Section s(top.raw("scene"), "scene");
    s.get("pixelSpacingM", cfg.pixel_spacing_m);
    s.finish();
    if (cfg.pixel_spacing_m <= 0) bad("scene.pixelSpacingM must be positive");
  }

  if (top.has("ps")) {
    Section s(top.raw("ps"), "ps");
    s.get("threshold", cfg.sequential.ps_threshold);
    s.finish();
    if (cfg.sequential.ps_threshold <= 0) bad("ps.threshold must be positive");
  }

  if (top.has("shp")) {
    Section s(top.raw("shp"), "shp");
    std::vector<int> window{cfg.sequential.shp_half_x, cfg.sequential.shp_half_y};
    s.get("window", window);
    if (window.size() != 2 || window[0] < 0 || window[1] < 0)
      bad("shp.window must be [halfX, halfY] with non-negative entries");
    cfg.sequential.shp_half_x = window[0];
    cfg.sequential.shp_half_y = window[1];
    s.get("alpha", cfg.sequential.glrt_alpha);
    s.get("calibrationTrials", cfg.sequential.glrt_trials);
    s.finish();
    if (cfg.sequential.glrt_alpha <= 0 || cfg.sequential.glrt_alpha >= 1)
      bad("shp.alpha must lie in (0, 1)");
    if (cfg.sequential.glrt_trials < 1000) bad("shp.calibrationTrials too small");
  }

  if (top.has("stats")) {
    Section s(top.raw("stats"), "stats");
    std::string weighting = "equal";
    s.get("weighting", weighting);
    if (weighting == "equal") {
      cfg.sequential.weighting.kind = Weighting::Kind::Equal;
    } else if (weighting == "exponentialDecay") {
      cfg.sequential.weighting.kind = Weighting::Kind::ExponentialDecay;
    } else {
      bad("stats.weighting must be 'equal' or 'exponentialDecay'");
    }
    s.get("decayLambda", cfg.sequential.weighting.decay_lambda);
    s.finish();
    if (cfg.sequential.weighting.decay_lambda <= 0 ||
        cfg.sequential.weighting.decay_lambda > 1)
      bad("stats.decayLambda must lie in (0, 1]");
  }

  if (top.has("phaselink")) {
    Section s(top.raw("phaselink"), "phaselink");
    s.get("maxIter", cfg.sequential.link.max_iter);
    s.get("shift0", cfg.sequential.link.shift0);
    s.get("condLimit", cfg.sequential.link.cond_limit);
    s.get("beta", cfg.sequential.link.beta);
    s.finish();
    if (cfg.sequential.link.max_iter < 1) bad("phaselink.maxIter must be positive");
    if (cfg.sequential.link.cond_limit <= 0) bad("phaselink.condLimit must be positive");
    if (cfg.sequential.link.beta < 0) bad("phaselink.beta must be non-negative");
  }

  if (top.has("similarity")) {
    Section s(top.raw("similarity"), "similarity");
    s.get("radiusMeters", cfg.similarity_radius_m);
    s.finish();
    if (cfg.similarity_radius_m <= 0) bad("similarity.radiusMeters must be positive");
  }

  if (top.has("sequential")) {
    Section s(top.raw("sequential"), "sequential");
    s.get("miniStackSize", cfg.sequential.mini_stack_size);
    s.get("maxCompressed", cfg.sequential.max_compressed);
    s.get("stateDir", cfg.state_dir);
    std::string scheme = "firstDate";
    s.get("scheme", scheme);
    if (scheme == "firstDate") {
      cfg.sequential.scheme = CompressionScheme::FirstDate;
    } else if (scheme == "lastPerMiniStack") {
      cfg.sequential.scheme = CompressionScheme::LastPerMiniStack;
    } else {
      bad("sequential.scheme must be 'firstDate' or 'lastPerMiniStack'");
    }
    s.finish();
    if (cfg.sequential.mini_stack_size < 2) bad("sequential.miniStackSize must be >= 2");
    if (cfg.sequential.max_compressed < 1) bad("sequential.maxCompressed must be >= 1");
  }

  if (top.has("unwrap")) {
    Section s(top.raw("unwrap"), "unwrap");
    std::string method = "oracle";
    s.get("method", method);
    if (method == "oracle") {
      cfg.unwrap.method = UnwrapConfig::Method::Oracle;
    } else if (method == "spatial") {
      cfg.unwrap.method = UnwrapConfig::Method::Spatial;
    } else {
      bad("unwrap.method must be 'oracle' or 'spatial'");
    }
    s.get("errorFraction", cfg.unwrap.error_fraction);
    s.get("regionSize", cfg.unwrap.region_size);
    s.get("seed", cfg.unwrap.seed);
    s.get("qualityThreshold", cfg.unwrap.quality_threshold);
    s.finish();
    if (cfg.unwrap.error_fraction < 0 || cfg.unwrap.error_fraction > 1)
      bad("unwrap.errorFraction must lie in [0, 1]");
    if (cfg.unwrap.region_size < 1) bad("unwrap.regionSize must be positive");
  }

  if (top.has("inv")) {
    Section s(top.raw("inv"), "inv");
    s.get("rho", cfg.inversion.admm.rho);
    s.get("maxIter", cfg.inversion.admm.max_iter);
    s.get("tolAbs", cfg.inversion.admm.tol_abs);
    s.get("tolRel", cfg.inversion.admm.tol_rel);
    s.get("maskTol", cfg.inversion.mask_tol);
    std::string method = "l1";
    s.get("method", method);
    if (method == "l1") {
      cfg.inversion.method = InversionConfig::Method::L1;
    } else if (method == "lsq") {
      cfg.inversion.method = InversionConfig::Method::Lsq;
    } else {
      bad("inv.method must be 'l1' or 'lsq'");
    }
    s.finish();
    if (cfg.inversion.admm.rho <= 0) bad("inv.rho must be positive");
    if (cfg.inversion.admm.max_iter < 1) bad("inv.maxIter must be positive");
    if (cfg.inversion.mask_tol <= 0) bad("inv.maskTol must be positive");
  }

  if (top.has("reference")) {
    Section s(top.raw("reference"), "reference");
    s.get("coherenceThreshold", cfg.reference_coherence_threshold);
    s.finish();
    if (cfg.reference_coherence_threshold < 0 || cfg.reference_coherence_threshold >= 1)
      bad("reference.coherenceThreshold must lie in [0, 1)");
  }

  if (top.has("forward")) {
    Section s(top.raw("forward"), "forward");
    s.get("outputOption", cfg.forward_output_option);
    s.finish();
    if (cfg.forward_output_option != 1 && cfg.forward_output_option != 2)
      bad("forward.outputOption must be 1 or 2");
  }

  if (top.has("validate")) {
    Section s(top.raw("validate"), "validate");
    s.get("wavelengthMm", cfg.va2.wavelength_mm);
    s.get("va2Pairs", cfg.va2.pairs);
    s.get("va2MaxDistanceKm", cfg.va2.max_distance_km);
    s.get("va2ThresholdMmYr", cfg.va2.threshold_mm_yr);
    s.get("va2PassFraction", cfg.va2.pass_fraction);
    s.get("va2BinWidthKm", cfg.va2.bin_width_km);
    s.get("va2Seed", cfg.va2.seed);
    s.finish();
    if (cfg.va2.wavelength_mm <= 0) bad("validate.wavelengthMm must be positive");
    if (cfg.va2.pairs < 1) bad("validate.va2Pairs must be positive");
    if (cfg.va2.bin_width_km <= 0) bad("validate.va2BinWidthKm must be positive");
  }

  if (top.has("runtime")) {
    Section s(top.raw("runtime"), "runtime");
    s.get("threads", cfg.threads);
    s.get("verbose", cfg.verbose);
    s.finish();
    if (cfg.threads < 1) bad("runtime.threads must be positive");
  }
  top.finish();

  cfg.sequential.threads = cfg.threads;
  cfg.sequential.similarity_radius_px = similarity_radius_px(cfg);
  if (static_cast<int>(cfg.sim.dates.size()) < 2) bad("need at least two dates");
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const PipelineConfig& cfg) {
  json root;
  root["sim"] = {
      {"shape", {cfg.sim.rows, cfg.sim.cols}},
      {"rho0", cfg.sim.model.rho0},
      {"rhoInf", cfg.sim.model.rho_inf},
      {"tauDays", cfg.sim.model.tau_days},
      {"bowlRateRadYr", cfg.sim.bowl_rate_rad_yr},
      {"tropoStd", cfg.sim.tropo_std},
      {"seed", cfg.sim.seed},
      {"bowlSigmaFrac", cfg.sim.truth.bowl_sigma_frac},
      {"bowlCenterRowFrac", cfg.sim.truth.bowl_center_row_frac},
      {"bowlCenterColFrac", cfg.sim.truth.bowl_center_col_frac},
      {"tropoCorrFrac", cfg.sim.truth.tropo_corr_frac},
      {"dates", cfg.sim.dates},
  };
  root["scene"] = {{"pixelSpacingM", cfg.pixel_spacing_m}};
  root["ps"] = {{"threshold", cfg.sequential.ps_threshold}};
  root["shp"] = {
      {"window", {cfg.sequential.shp_half_x, cfg.sequential.shp_half_y}},
      {"alpha", cfg.sequential.glrt_alpha},
      {"calibrationTrials", cfg.sequential.glrt_trials},
  };
  root["stats"] = {
      {"weighting", cfg.sequential.weighting.kind == Weighting::Kind::Equal
                        ? "equal"
                        : "exponentialDecay"},
      {"decayLambda", cfg.sequential.weighting.decay_lambda},
  };
  root["phaselink"] = {
      {"maxIter", cfg.sequential.link.max_iter},
      {"shift0", cfg.sequential.link.shift0},
      {"condLimit", cfg.sequential.link.cond_limit},
      {"beta", cfg.sequential.link.beta},
  };
  root["similarity"] = {{"radiusMeters", cfg.similarity_radius_m}};
  root["sequential"] = {
      {"miniStackSize", cfg.sequential.mini_stack_size},
      {"maxCompressed", cfg.sequential.max_compressed},
      {"stateDir", cfg.state_dir},
      {"scheme", cfg.sequential.scheme == CompressionScheme::FirstDate
                     ? "firstDate"
                     : "lastPerMiniStack"},
  };
  root["unwrap"] = {
      {"method",
       cfg.unwrap.method == UnwrapConfig::Method::Oracle ? "oracle" : "spatial"},
      {"errorFraction", cfg.unwrap.error_fraction},
      {"regionSize", cfg.unwrap.region_size},
      {"seed", cfg.unwrap.seed},
      {"qualityThreshold", cfg.unwrap.quality_threshold},
  };
  root["inv"] = {
      {"rho", cfg.inversion.admm.rho},
      {"maxIter", cfg.inversion.admm.max_iter},
      {"tolAbs", cfg.inversion.admm.tol_abs},
      {"tolRel", cfg.inversion.admm.tol_rel},
      {"maskTol", cfg.inversion.mask_tol},
      {"method", cfg.inversion.method == InversionConfig::Method::L1 ? "l1" : "lsq"},
  };
  root["reference"] = {{"coherenceThreshold", cfg.reference_coherence_threshold}};
  root["forward"] = {{"outputOption", cfg.forward_output_option}};
  root["validate"] = {
      {"wavelengthMm", cfg.va2.wavelength_mm},
      {"va2Pairs", cfg.va2.pairs},
      {"va2MaxDistanceKm", cfg.va2.max_distance_km},
      {"va2ThresholdMmYr", cfg.va2.threshold_mm_yr},
      {"va2PassFraction", cfg.va2.pass_fraction},
      {"va2BinWidthKm", cfg.va2.bin_width_km},
      {"va2Seed", cfg.va2.seed},
  };
  root["runtime"] = {{"threads", cfg.threads}, {"verbose", cfg.verbose}};
  return root.dump(2);
}

std::string config_hash(const PipelineConfig& cfg) {
  std::string text = serialize_config(cfg);
  std::uint64_t h = fnv1a(text.data(), text.size());
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

int similarity_radius_px(const PipelineConfig& cfg) {
  return static_cast<int>(std::ceil(cfg.similarity_radius_m / cfg.pixel_spacing_m));
}

}  // namespace seqlink
