// SPDX-License-Identifier: Apache-2.0
#include "seqlink/scatterers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

#include "seqlink/errors.hpp"

namespace seqlink {

namespace {
constexpr double kVarianceFloor = 1e-12;
}

AmpStats amp_stats_from_stack(const SlcStack& stack,
                              const std::vector<int>& layer_subset) {
  stack.validate();
  if (layer_subset.empty()) throw DataError("amplitude stats need at least one layer");
  for (int idx : layer_subset)
    if (idx < 0 || idx >= stack.n_layers()) throw DataError("layer index out of range");

  const int rows = stack.rows(), cols = stack.cols();
  AmpStats stats;
  stats.mean = Raster<double>(rows, cols);
  stats.var = Raster<double>(rows, cols);
  stats.weight = static_cast<double>(layer_subset.size());

  const double inv_n = 1.0 / stats.weight;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double sum = 0.0, sum2 = 0.0;
      for (int idx : layer_subset) {
        double a = std::abs(stack.layers[static_cast<size_t>(idx)](r, c));
        sum += a;
        sum2 += a * a;
      }
      double mean = sum * inv_n;
      stats.mean(r, c) = mean;
      stats.var(r, c) = std::max(0.0, sum2 * inv_n - mean * mean);
    }
  return stats;
}

AmpStats merge_amp_stats(const std::vector<AmpStats>& parts,
                         const Weighting& weighting) {
  if (parts.empty()) throw DataError("merge_amp_stats needs at least one part");
  const int rows = parts.front().mean.rows(), cols = parts.front().mean.cols();
  const size_t k = parts.size();
  std::vector<double> w(k);
  for (size_t i = 0; i < k; ++i) {
    if (!parts[i].mean.same_shape(rows, cols) || !parts[i].var.same_shape(rows, cols))
      throw DataError("merge_amp_stats requires identical shapes");
    if (parts[i].weight <= 0.0) throw DataError("part weights must be positive");
    w[i] = parts[i].weight;
    if (weighting.kind == Weighting::Kind::ExponentialDecay) {
      if (weighting.decay_lambda <= 0.0 || weighting.decay_lambda > 1.0)
        throw ConfigError("decay lambda must be in (0, 1]");
      w[i] *= std::pow(weighting.decay_lambda, static_cast<double>(k - 1 - i));
    }
  }
  double w_total = 0.0;
  for (double wi : w) w_total += wi;

  AmpStats merged;
  merged.mean = Raster<double>(rows, cols);
  merged.var = Raster<double>(rows, cols);
  merged.weight = w_total;
  const double inv_w = 1.0 / w_total;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double m = 0.0, second = 0.0;
      for (size_t i = 0; i < k; ++i) {
        double mu = parts[i].mean(r, c);
        m += w[i] * mu;
        second += w[i] * (parts[i].var(r, c) + mu * mu);
      }
      m *= inv_w;
      double var = second * inv_w - m * m;
      if (var < 0.0) {
        if (var < -kVarianceFloor) throw NumericalError("merged variance is negative");
        var = 0.0;
      }
      merged.mean(r, c) = m;
      merged.var(r, c) = var;
    }
  return merged;
}

PsMask select_ps(const AmpStats& stats, double threshold) {
  if (threshold <= 0.0) throw ConfigError("PS threshold must be positive");
  const int rows = stats.mean.rows(), cols = stats.mean.cols();
  PsMask ps;
  ps.mask = Raster<std::uint8_t>(rows, cols, 0);
  ps.dispersion = Raster<double>(rows, cols, std::numeric_limits<double>::infinity());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double mu = stats.mean(r, c);
      if (mu <= 0.0) continue;  // zero-amplitude pixels are never PS
      double da = std::sqrt(stats.var(r, c)) / mu;
      ps.dispersion(r, c) = da;
      ps.mask(r, c) = da < threshold ? 1 : 0;
    }
  return ps;
}

double glrt_statistic(double mean_c, double var_c, double mean_n, double var_n) {
  double vc = std::max(var_c, kVarianceFloor);
  double vn = std::max(var_n, kVarianceFloor);
  double dm = mean_c - mean_n;
  double pooled = 0.5 * (vc + vn) + 0.25 * dm * dm;
  return std::log(pooled) - 0.5 * std::log(vc) - 0.5 * std::log(vn);
}

double glrt_threshold(int n_samples, double alpha, int trials, std::uint64_t seed,
                      double rho1) {
  if (n_samples < 2) throw DataError("GLRT calibration needs weight >= 2");
  if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("alpha must be in (0, 1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> stats(static_cast<size_t>(trials));
  const double inv_n = 1.0 / n_samples;
  const double a = std::clamp(rho1, 0.0, 0.999);
  const double b = std::sqrt(1.0 - a * a);
  auto sample_moments = [&](double& mean, double& var) {
    double sum = 0.0, sum2 = 0.0;
    double re = normal(rng), im = normal(rng);
    for (int i = 0; i < n_samples; ++i) {
      if (i > 0) {
        re = a * re + b * normal(rng);
        im = a * im + b * normal(rng);
      }
      double x = std::hypot(re, im);
      sum += x;
      sum2 += x * x;
    }
    mean = sum * inv_n;
    var = std::max(0.0, sum2 * inv_n - mean * mean);
  };
  for (auto& t : stats) {
    double mc, vc, mn, vn;
    sample_moments(mc, vc);
    sample_moments(mn, vn);
    t = glrt_statistic(mc, vc, mn, vn);
  }
  size_t idx = static_cast<size_t>(std::floor((1.0 - alpha) * (trials - 1)));
  std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(idx),
                   stats.end());
  return stats[idx];
}

double lag1_coherence(const SlcStack& stack, const std::vector<int>& layer_subset) {
  if (layer_subset.size() < 2) return 0.0;
  for (size_t i = 1; i < layer_subset.size(); ++i)
    if (layer_subset[i] <= layer_subset[i - 1])
      throw DataError("layer subset must be strictly increasing");
  for (int idx : layer_subset)
    if (idx < 0 || idx >= stack.n_layers()) throw DataError("layer index out of range");

  const int rows = stack.rows(), cols = stack.cols();
  std::vector<double> values;
  values.reserve(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::complex<double> cross{0.0, 0.0};
      double p0 = 0.0, p1 = 0.0;
      for (size_t i = 0; i + 1 < layer_subset.size(); ++i) {
        std::complex<double> z0 = stack.layers[static_cast<size_t>(layer_subset[i])](r, c);
        std::complex<double> z1 =
            stack.layers[static_cast<size_t>(layer_subset[i + 1])](r, c);
        cross += z1 * std::conj(z0);
        p0 += std::norm(z0);
        p1 += std::norm(z1);
      }
      double denom = std::sqrt(p0 * p1);
      if (denom > 0.0) values.push_back(std::abs(cross) / denom);
    }
  if (values.empty()) return 0.0;
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

ShpMap glrt_shp(const AmpStats& stats, int half_x, int half_y, double alpha,
                int calibration_trials, std::uint64_t calibration_seed, double rho1) {
  if (half_x < 0 || half_y < 0) throw ConfigError("window half extents must be >= 0");
  const int rows = stats.mean.rows(), cols = stats.mean.cols();
  if (rows == 0 || cols == 0) throw DataError("empty statistics raster");
  if (stats.weight < 2.0 && (half_x > 0 || half_y > 0))
    throw DataError("GLRT needs an effective weight of at least 2");

  ShpMap shp;
  shp.rows = rows;
  shp.cols = cols;
  shp.half_x = half_x;
  shp.half_y = half_y;
  shp.offsets.resize(static_cast<size_t>(rows) * cols);

  const bool trivial = half_x == 0 && half_y == 0;
  const double threshold =
      trivial ? 0.0
              : glrt_threshold(std::max(2, static_cast<int>(std::llround(stats.weight))),
                               alpha, calibration_trials, calibration_seed, rho1);

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      auto& accepted = shp.offsets[static_cast<size_t>(r) * cols + c];
      accepted.emplace_back(0, 0);
      if (trivial) continue;
      double mc = stats.mean(r, c), vc = stats.var(r, c);
      for (int dr = -half_y; dr <= half_y; ++dr)
        for (int dc = -half_x; dc <= half_x; ++dc) {
          if (dr == 0 && dc == 0) continue;
          int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
          double t = glrt_statistic(mc, vc, stats.mean(nr, nc), stats.var(nr, nc));
          if (t <= threshold)
            accepted.emplace_back(static_cast<std::int16_t>(dr),
                                  static_cast<std::int16_t>(dc));
        }
    }
  return shp;
}

}  // namespace seqlink
