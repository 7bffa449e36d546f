// SPDX-License-Identifier: Apache-2.0
#include "seqlink/validate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "seqlink/errors.hpp"
#include "seqlink/parallel.hpp"
#include "seqlink/scatterers.hpp"
#include "seqlink/sequential.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

namespace {

// RMSE of wrap(est - truth) about its circular mean.
double demeaned_rmse(const Raster<double>& est, const Raster<double>& truth) {
  const size_t n = est.size();
  std::vector<double> err(n);
  double sx = 0.0, sy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    err[i] = wrap_phase(est.storage()[i] - truth.storage()[i]);
    sx += std::cos(err[i]);
    sy += std::sin(err[i]);
  }
  const double mu = std::atan2(sy, sx);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double e = wrap_phase(err[i] - mu);
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

Raster<double> wrapped_sum(const Raster<double>& a, const Raster<double>& b) {
  Raster<double> out(a.rows(), a.cols());
  for (size_t i = 0; i < out.size(); ++i)
    out.storage()[i] = wrap_phase(a.storage()[i] + b.storage()[i]);
  return out;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << std::setprecision(12);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    size_t a = field.find_first_not_of(" \t\r");
    size_t b = field.find_last_not_of(" \t\r");
    fields.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  return fields;
}

double parse_number(const std::string& s, int line_no, const char* what) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("point series line " + std::to_string(line_no) +
                    ": bad " + std::string(what) + " value '" + s + "'");
  }
}

struct BinAccum {
  std::vector<long> count;
  std::vector<long> below;
  double width_km;
  int n_bins;

  BinAccum(double max_km, double bin_width_km) {
    if (bin_width_km <= 0.0 || max_km <= 0.0)
      throw ConfigError("closure-check distances must be positive");
    width_km = bin_width_km;
    n_bins = static_cast<int>(std::ceil(max_km / bin_width_km));
    count.assign(static_cast<size_t>(n_bins), 0);
    below.assign(static_cast<size_t>(n_bins), 0);
  }

  void add(double dist_km, bool is_below) {
    int bin = std::min(static_cast<int>(dist_km / width_km), n_bins - 1);
    ++count[static_cast<size_t>(bin)];
    if (is_below) ++below[static_cast<size_t>(bin)];
  }

  ResidualReport report(double pass_fraction, int pairs_drawn) const {
    ResidualReport rep;
    rep.pairs_drawn = pairs_drawn;
    for (int b = 0; b < n_bins; ++b) {
      if (count[static_cast<size_t>(b)] == 0) continue;
      Va2Bin bin;
      bin.min_km = b * width_km;
      bin.max_km = (b + 1) * width_km;
      bin.count = static_cast<int>(count[static_cast<size_t>(b)]);
      bin.frac_below = static_cast<double>(below[static_cast<size_t>(b)]) /
                       static_cast<double>(count[static_cast<size_t>(b)]);
      bin.pass = bin.frac_below >= pass_fraction;
      rep.bins.push_back(bin);
    }
    rep.overall_pass = !rep.bins.empty();
    for (const Va2Bin& bin : rep.bins) rep.overall_pass = rep.overall_pass && bin.pass;
    return rep;
  }
};

}  // namespace

RmseCurves rmse_study(const PipelineConfig& cfg) {
  auto [truth, stack] = simulate_from_config(cfg);
  const int n = stack.n_layers();
  const int rows = stack.rows(), cols = stack.cols();

  RmseCurves out;
  out.dates = stack.dates;
  out.nrt.assign(static_cast<size_t>(n), 0.0);
  out.datum_adjusted.assign(static_cast<size_t>(n), 0.0);
  out.multilooked.assign(static_cast<size_t>(n), 0.0);
  out.noise_floor.assign(static_cast<size_t>(n), 0.0);
  out.crlb.assign(static_cast<size_t>(n), 0.0);

  // Sequential estimator: chain batch outputs through the datum.
  {
    MiniStackPlan plan =
        plan_mini_stacks(n, cfg.sequential.mini_stack_size,
                         cfg.sequential.max_compressed, cfg.sequential.scheme);
    SequentialState state;
    state.dates = stack.dates;
    std::vector<Raster<double>> est(static_cast<size_t>(n));
    double looks_sum = 0.0;
    long looks_px = 0;
    for (const auto& entry : plan.batches) {
      BatchResult batch = run_batch(state, stack, entry.real_idx, cfg.sequential);
      const bool chained = batch.datum_idx != batch.date_idx.front();
      for (size_t i = 0; i < batch.date_idx.size(); ++i) {
        int d = batch.date_idx[i];
        est[static_cast<size_t>(d)] =
            chained ? wrapped_sum(batch.phase[i], est[static_cast<size_t>(batch.datum_idx)])
                    : batch.phase[i];
      }
      for (size_t i = 0; i < batch.looks.size(); ++i) looks_sum += batch.looks.storage()[i];
      looks_px += static_cast<long>(batch.looks.size());
    }
    out.mean_looks = looks_sum / static_cast<double>(looks_px);
    for (int d = 0; d < n; ++d)
      out.nrt[static_cast<size_t>(d)] =
          demeaned_rmse(est[static_cast<size_t>(d)], truth.phase[static_cast<size_t>(d)]);
  }

  // Independent batches aligned afterwards.
  {
    IndependentBatches ind = run_independent_batches(stack, cfg.sequential);
    std::vector<Raster<double>> adj = datum_adjust_baseline(ind, cfg.sequential);
    for (int d = 0; d < n; ++d)
      out.datum_adjusted[static_cast<size_t>(d)] =
          demeaned_rmse(adj[static_cast<size_t>(d)], truth.phase[static_cast<size_t>(d)]);
  }

  // Full-stack adaptive multilook and the single-look floor.
  {
    std::vector<int> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    AmpStats stats = amp_stats_from_stack(stack, all);
    ShpMap shp = glrt_shp(stats, cfg.sequential.shp_half_x, cfg.sequential.shp_half_y,
                          cfg.sequential.glrt_alpha, cfg.sequential.glrt_trials,
                          kGlrtCalibrationSeed, lag1_coherence(stack, all));
    const Raster<std::complex<double>>& z0 = stack.layers.front();
    for (int d = 1; d < n; ++d) {
      const Raster<std::complex<double>>& zd = stack.layers[static_cast<size_t>(d)];
      Raster<double> ml(rows, cols), sl(rows, cols);
      parallel_for(rows, cfg.threads, [&](int r) {
        for (int c = 0; c < cols; ++c) {
          std::complex<double> acc{0.0, 0.0};
          for (const auto& [dr, dc] : shp.at(r, c))
            acc += zd(r + dr, c + dc) * std::conj(z0(r + dr, c + dc));
          ml(r, c) = std::arg(acc);
          sl(r, c) = std::arg(zd(r, c) * std::conj(z0(r, c)));
        }
      });
      out.multilooked[static_cast<size_t>(d)] =
          demeaned_rmse(ml, truth.phase[static_cast<size_t>(d)]);
      out.noise_floor[static_cast<size_t>(d)] =
          demeaned_rmse(sl, truth.phase[static_cast<size_t>(d)]);
    }
  }

  // Bound at the realized mean look count.
  {
    Eigen::MatrixXd gamma = correlation_matrix(cfg.sim.model, stack.dates);
    int looks = std::max(1, static_cast<int>(std::llround(out.mean_looks)));
    Eigen::VectorXd bound = crlb_phase_std(gamma, looks, 0);
    for (int d = 0; d < n; ++d) out.crlb[static_cast<size_t>(d)] = bound(d);
  }
  return out;
}

ResidualReport va2_residuals(const Raster<double>& velocity_rad_yr,
                             const Raster<std::uint8_t>& valid,
                             double pixel_spacing_m, const Va2Config& cfg) {
  if (!velocity_rad_yr.same_shape(valid))
    throw DataError("velocity and validity rasters must share a shape");
  if (pixel_spacing_m <= 0.0) throw ConfigError("pixel spacing must be positive");

  std::vector<std::pair<int, int>> pixels;
  for (int r = 0; r < velocity_rad_yr.rows(); ++r)
    for (int c = 0; c < velocity_rad_yr.cols(); ++c)
      if (valid(r, c) && std::isfinite(velocity_rad_yr(r, c))) pixels.push_back({r, c});
  if (pixels.size() < 2)
    throw DataError("fewer than two valid velocity pixels; nothing to compare");

  BinAccum bins(cfg.max_distance_km, cfg.bin_width_km);
  const double scale = mm_per_radian(cfg.wavelength_mm);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, pixels.size() - 1);

  int accepted = 0;
  const long cap = static_cast<long>(cfg.pairs) * 1000;
  for (long attempt = 0; attempt < cap && accepted < cfg.pairs; ++attempt) {
    size_t i = pick(rng), j = pick(rng);
    if (i == j) continue;
    const auto& [ri, ci] = pixels[i];
    const auto& [rj, cj] = pixels[j];
    double dist_km = std::hypot(static_cast<double>(ri - rj),
                                static_cast<double>(ci - cj)) *
                     pixel_spacing_m / 1000.0;
    if (dist_km > cfg.max_distance_km) continue;
    double dv_mm = std::abs(velocity_rad_yr(ri, ci) - velocity_rad_yr(rj, cj)) * scale;
    bins.add(dist_km, dv_mm < cfg.threshold_mm_yr);
    ++accepted;
  }
  if (accepted == 0)
    throw DataError("no pixel pairs within the distance limit; "
                    "raise va2MaxDistanceKm");
  return bins.report(cfg.pass_fraction, accepted);
}

std::vector<PointSeries> load_point_series(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot read point series " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw DataError("point series " + csv_path + " is empty");
  {
    std::vector<std::string> header = split_csv_line(line);
    const std::vector<std::string> expected = {"station_id", "x_m", "y_m", "date",
                                               "los_mm"};
    if (header != expected)
      throw DataError("point series header must be station_id,x_m,y_m,date,los_mm");
  }

  std::vector<PointSeries> stations;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 5)
      throw DataError("point series line " + std::to_string(line_no) +
                      ": expected 5 fields, got " + std::to_string(f.size()));
    double x = parse_number(f[1], line_no, "x_m");
    double y = parse_number(f[2], line_no, "y_m");
    int date = static_cast<int>(parse_number(f[3], line_no, "date"));
    double los = parse_number(f[4], line_no, "los_mm");

    auto it = std::find_if(stations.begin(), stations.end(),
                           [&](const PointSeries& s) { return s.station_id == f[0]; });
    if (it == stations.end()) {
      PointSeries s;
      s.station_id = f[0];
      s.x_m = x;
      s.y_m = y;
      stations.push_back(std::move(s));
      it = std::prev(stations.end());
    }
    it->dates.push_back(date);
    it->los_mm.push_back(los);
  }
  for (PointSeries& s : stations) {
    std::vector<size_t> order(s.dates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return s.dates[a] < s.dates[b]; });
    PointSeries sorted = s;
    for (size_t i = 0; i < order.size(); ++i) {
      sorted.dates[i] = s.dates[order[i]];
      sorted.los_mm[i] = s.los_mm[order[i]];
    }
    s = std::move(sorted);
  }
  return stations;
}

ResidualReport va2_point_series(const std::vector<PointSeries>& points,
                                const Va2Config& cfg) {
  // Station velocities, ordinary least squares against decimal years.
  std::vector<double> vel;
  std::vector<std::pair<double, double>> pos;
  for (const PointSeries& s : points) {
    if (s.dates.size() < 2) continue;
    double n = static_cast<double>(s.dates.size());
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (size_t i = 0; i < s.dates.size(); ++i) {
      double t = s.dates[i] / 365.25;
      st += t;
      sy += s.los_mm[i];
      stt += t * t;
      sty += t * s.los_mm[i];
    }
    double denom = n * stt - st * st;
    if (denom <= 0.0) continue;  // all epochs on one day
    vel.push_back((n * sty - st * sy) / denom);
    pos.push_back({s.x_m, s.y_m});
  }
  if (vel.size() < 2)
    throw DataError("fewer than two stations with fittable series");

  BinAccum bins(cfg.max_distance_km, cfg.bin_width_km);
  int drawn = 0;
  for (size_t i = 0; i < vel.size(); ++i) {
    for (size_t j = i + 1; j < vel.size(); ++j) {
      double dist_km =
          std::hypot(pos[i].first - pos[j].first, pos[i].second - pos[j].second) /
          1000.0;
      if (dist_km > cfg.max_distance_km) continue;
      bins.add(dist_km, std::abs(vel[i] - vel[j]) < cfg.threshold_mm_yr);
      ++drawn;
    }
  }
  if (drawn == 0)
    throw DataError("no station pairs within the distance limit");
  return bins.report(cfg.pass_fraction, drawn);
}

ConsistencyReport forward_vs_historical(const PipelineConfig& cfg,
                                        const SlcStack& stack,
                                        const TruthScene* truth,
                                        int n_archive_dates) {
  stack.validate();
  const int n = stack.n_layers();
  const int m = cfg.sequential.mini_stack_size;
  int n_arch = n_archive_dates > 0 ? n_archive_dates : m;
  if (n_arch < 2 || n_arch >= n)
    throw DataError("archive must cover at least two dates and leave some to ingest");
  if (n_arch % m != 0)
    throw DataError("archive length must be a whole number of mini-stacks");

  HistoricalOutputs hist = run_historical(cfg, stack, truth);
  HistoricalOutputs arch = run_historical(cfg, stack, truth, n_arch);

  SequentialState state = std::move(arch.final_state);
  std::vector<Raster<double>> f1(static_cast<size_t>(n)), f2(static_cast<size_t>(n));
  for (int d = 0; d < n_arch; ++d) {
    f1[static_cast<size_t>(d)] = arch.series[static_cast<size_t>(d)];
    f2[static_cast<size_t>(d)] = arch.series[static_cast<size_t>(d)];
  }

  auto unwrapped_sum = [](const Raster<double>& base, const Raster<double>& inc) {
    Raster<double> out(base.rows(), base.cols());
    for (size_t i = 0; i < out.size(); ++i)
      out.storage()[i] = base.storage()[i] + inc.storage()[i];
    return out;
  };

  ConsistencyReport rep;
  rep.n_archive_dates = n_arch;
  for (int d = n_arch; d < n; ++d) {
    ForwardStepResult step =
        forward_ingest(state, stack.layers[static_cast<size_t>(d)],
                       stack.dates[static_cast<size_t>(d)], truth, cfg);
    f1[static_cast<size_t>(d)] =
        unwrapped_sum(f1[static_cast<size_t>(step.prev_idx)], step.rel_prev);
    f2[static_cast<size_t>(d)] =
        unwrapped_sum(f2[static_cast<size_t>(step.subset_ref_idx)], step.rel_subset_ref);

    ConsistencyRow row;
    row.date_idx = d;
    row.date = stack.dates[static_cast<size_t>(d)];
    const Raster<double>& ref = hist.series[static_cast<size_t>(d)];
    auto score = [&](const Raster<double>& est, double& max_abs, double& rms) {
      double ss = 0.0;
      max_abs = 0.0;
      for (size_t i = 0; i < est.size(); ++i) {
        double e = est.storage()[i] - ref.storage()[i];
        max_abs = std::max(max_abs, std::abs(e));
        ss += e * e;
      }
      rms = std::sqrt(ss / static_cast<double>(est.size()));
    };
    score(f1[static_cast<size_t>(d)], row.max_abs_1, row.rms_1);
    score(f2[static_cast<size_t>(d)], row.max_abs_2, row.rms_2);
    rep.rows.push_back(row);
  }
  return rep;
}

void write_rmse_csv(const std::string& path, const RmseCurves& curves) {
  std::ofstream out = open_csv(path);
  out << "date,estimator,rmse_rad\n";
  auto emit = [&](const char* name, const std::vector<double>& v) {
    for (size_t d = 0; d < curves.dates.size(); ++d)
      out << curves.dates[d] << "," << name << "," << v[d] << "\n";
  };
  emit("nrtSequential", curves.nrt);
  emit("datumAdjusted", curves.datum_adjusted);
  emit("multilooked", curves.multilooked);
  emit("noiseFloor", curves.noise_floor);
  emit("crlb", curves.crlb);
}

void write_va2_csv(const std::string& path, const ResidualReport& report) {
  std::ofstream out = open_csv(path);
  out << "bin_min_km,bin_max_km,count,frac_below,pass\n";
  for (const Va2Bin& bin : report.bins)
    out << bin.min_km << "," << bin.max_km << "," << bin.count << ","
        << bin.frac_below << "," << (bin.pass ? 1 : 0) << "\n";
}

void write_consistency_csv(const std::string& path, const ConsistencyReport& report) {
  std::ofstream out = open_csv(path);
  out << "date,option,max_abs_rad,rms_rad\n";
  for (const ConsistencyRow& row : report.rows) {
    out << row.date << ",1," << row.max_abs_1 << "," << row.rms_1 << "\n";
    out << row.date << ",2," << row.max_abs_2 << "," << row.rms_2 << "\n";
  }
}

}  // namespace seqlink
