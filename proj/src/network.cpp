// SPDX-License-Identifier: Apache-2.0
#include "seqlink/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <tuple>

#include "seqlink/errors.hpp"
#include "seqlink/wrap.hpp"

namespace seqlink {

namespace {

Eigen::MatrixXd incidence_for(const std::vector<std::pair<int, int>>& pairs,
                              int n_dates) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<int>(pairs.size()),
                                            n_dates - 1);
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    auto [i, k] = pairs[static_cast<size_t>(p)];
    a(p, k - 1) = 1.0;   // column d holds date d+1; date 0 is the reference
    if (i > 0) a(p, i - 1) = -1.0;
  }
  return a;
}

void check_dates(const std::vector<int>& dates) {
  if (dates.size() < 2) throw DataError("a network needs at least two dates");
  for (size_t i = 1; i < dates.size(); ++i)
    if (dates[i] <= dates[i - 1]) throw DataError("dates must be strictly increasing");
}

struct PixelRef {
  double quality;
  int order;  // tie-break: earlier enqueue first
  int r, c;
  int from_r, from_c;
};
struct PixelRefLess {
  bool operator()(const PixelRef& a, const PixelRef& b) const {
    if (a.quality != b.quality) return a.quality < b.quality;
    return a.order > b.order;
  }
};

}  // namespace

IfgNetwork build_nearest3(const std::vector<int>& dates) {
  check_dates(dates);
  IfgNetwork net;
  net.dates = dates;
  const int n = static_cast<int>(dates.size());
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k <= std::min(n - 1, i + 3); ++k)
      net.pairs.emplace_back(i, k);
  net.incidence = incidence_for(net.pairs, n);
  return net;
}

IfgNetwork forward_subset(const IfgNetwork& net, int newest_count,
                          std::vector<int>* kept_date_idx) {
  const int n = net.n_dates();
  if (newest_count < 2) throw ConfigError("forward subset needs at least two dates");
  newest_count = std::min(newest_count, n);
  const int first_kept = n - newest_count;

  IfgNetwork sub;
  for (int d = first_kept; d < n; ++d)
    sub.dates.push_back(net.dates[static_cast<size_t>(d)]);
  if (kept_date_idx) {
    kept_date_idx->clear();
    for (int d = first_kept; d < n; ++d) kept_date_idx->push_back(d);
  }
  for (const auto& [i, k] : net.pairs)
    if (i >= first_kept) sub.pairs.emplace_back(i - first_kept, k - first_kept);
  if (sub.pairs.empty()) throw DataError("forward subset retained no pairs");
  sub.incidence = incidence_for(sub.pairs, newest_count);

  // The retained dates must stay connected through the retained pairs.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sub.incidence);
  if (lu.rank() < newest_count - 1)
    throw DataError("forward subset disconnects the requested dates");
  return sub;
}

std::vector<Raster<double>> reform_interferograms(
    const std::vector<Raster<double>>& date_phase, const IfgNetwork& net) {
  if (static_cast<int>(date_phase.size()) != net.n_dates())
    throw DataError("per-date phase count does not match the network");
  const int rows = date_phase.front().rows(), cols = date_phase.front().cols();
  std::vector<Raster<double>> out;
  out.reserve(net.pairs.size());
  for (const auto& [i, k] : net.pairs) {
    Raster<double> ifg(rows, cols);
    const auto& pi = date_phase[static_cast<size_t>(i)];
    const auto& pk = date_phase[static_cast<size_t>(k)];
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) ifg(r, c) = wrap_phase(pk(r, c) - pi(r, c));
    out.push_back(std::move(ifg));
  }
  return out;
}

UnwrappedStack oracle_unwrap(const std::vector<Raster<double>>& wrapped,
                             const std::vector<Raster<double>>& truth_diff,
                             const std::vector<Raster<double>>& quality,
                             const OracleErrorSpec& spec) {
  if (wrapped.empty() || wrapped.size() != truth_diff.size() ||
      wrapped.size() != quality.size())
    throw DataError("oracle unwrap needs matching wrapped/truth/quality stacks");
  if (spec.fraction < 0.0 || spec.fraction > 1.0)
    throw ConfigError("error fraction must be in [0, 1]");
  if (spec.fraction > 0.0 && spec.multiples.empty())
    throw ConfigError("error injection needs a non-empty multiple set");
  const int rows = wrapped.front().rows(), cols = wrapped.front().cols();

  UnwrappedStack out;
  out.quality = quality;
  out.components = Raster<std::int32_t>(rows, cols, 1);
  const size_t n_pairs = wrapped.size();
  out.unwrapped.assign(n_pairs, Raster<double>(rows, cols));
  out.cycle_map.assign(n_pairs, Raster<std::int32_t>(rows, cols, 0));

  for (size_t p = 0; p < n_pairs; ++p) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double t = truth_diff[p](r, c);
        out.unwrapped[p](r, c) = t + wrap_phase(wrapped[p](r, c) - t);
      }
    if (spec.fraction <= 0.0) continue;

    // Contiguous square patches until the requested pixel fraction is hit.
    std::mt19937_64 rng(spec.seed + 0x51ed2700ULL * (p + 1));
    std::uniform_int_distribution<int> row_at(0, std::max(0, rows - spec.region_size));
    std::uniform_int_distribution<int> col_at(0, std::max(0, cols - spec.region_size));
    std::uniform_int_distribution<size_t> pick(0, spec.multiples.size() - 1);
    const long target = std::lround(spec.fraction * rows * cols);
    long injected = 0;
    int attempts = 0;
    std::int32_t next_component = 2;
    while (injected < target && attempts < 10000) {
      ++attempts;
      int r0 = row_at(rng), c0 = col_at(rng);
      int k = spec.multiples[pick(rng)];
      if (k == 0) continue;
      bool fresh = false;
      for (int r = r0; r < std::min(rows, r0 + spec.region_size); ++r)
        for (int c = c0; c < std::min(cols, c0 + spec.region_size); ++c) {
          if (out.cycle_map[p](r, c) != 0) continue;
          out.cycle_map[p](r, c) = k;
          out.unwrapped[p](r, c) += kTwoPi * k;
          out.components(r, c) = next_component;
          ++injected;
          fresh = true;
        }
      if (fresh) ++next_component;
    }
  }
  return out;
}

UnwrappedStack spatial_unwrap(const std::vector<Raster<double>>& wrapped,
                              const std::vector<Raster<double>>& quality,
                              double quality_threshold) {
  if (wrapped.empty() || wrapped.size() != quality.size())
    throw DataError("spatial unwrap needs one quality raster per pair");
  const int rows = wrapped.front().rows(), cols = wrapped.front().cols();

  UnwrappedStack out;
  out.quality = quality;
  const size_t n_pairs = wrapped.size();
  out.unwrapped.assign(n_pairs, Raster<double>(rows, cols));
  out.cycle_map.assign(n_pairs, Raster<std::int32_t>(rows, cols, 0));
  out.components = Raster<std::int32_t>(rows, cols, 0);

  // Components are defined by the first pair's quality (the caller passes a
  // shared quality raster in the pipeline).
  const Raster<double>& q0 = quality.front();
  std::int32_t next_label = 0;
  std::vector<std::pair<int, int>> stack_px;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (out.components(r, c) != 0 || q0(r, c) < quality_threshold) continue;
      ++next_label;
      stack_px.assign(1, {r, c});
      out.components(r, c) = next_label;
      while (!stack_px.empty()) {
        auto [pr, pc] = stack_px.back();
        stack_px.pop_back();
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          int nr = pr + dr[d], nc = pc + dc[d];
          if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
          if (out.components(nr, nc) != 0 || q0(nr, nc) < quality_threshold) continue;
          out.components(nr, nc) = next_label;
          stack_px.emplace_back(nr, nc);
        }
      }
    }
  if (next_label == 0) throw DataError("all pixels fall below the quality threshold");

  for (size_t p = 0; p < n_pairs; ++p) {
    const Raster<double>& w = wrapped[p];
    const Raster<double>& q = quality[p];
    Raster<std::uint8_t> visited(rows, cols, 0);
    // One seed per component: its maximum-quality pixel (row-major ties).
    std::vector<std::tuple<double, int, int>> seeds(
        static_cast<size_t>(next_label),
        {-std::numeric_limits<double>::infinity(), -1, -1});
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        std::int32_t label = out.components(r, c);
        if (label == 0) {
          out.unwrapped[p](r, c) = w(r, c);
          continue;
        }
        auto& s = seeds[static_cast<size_t>(label - 1)];
        if (q(r, c) > std::get<0>(s)) s = {q(r, c), r, c};
      }

    std::priority_queue<PixelRef, std::vector<PixelRef>, PixelRefLess> frontier;
    int order = 0;
    auto push_neighbors = [&](int r, int c) {
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        int nr = r + dr[d], nc = c + dc[d];
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        if (visited(nr, nc) || out.components(nr, nc) != out.components(r, c))
          continue;
        frontier.push({q(nr, nc), order++, nr, nc, r, c});
      }
    };
    for (const auto& [sq, sr, sc] : seeds) {
      if (sr < 0) continue;
      out.unwrapped[p](sr, sc) = w(sr, sc);
      visited(sr, sc) = 1;
      push_neighbors(sr, sc);
    }
    while (!frontier.empty()) {
      PixelRef px = frontier.top();
      frontier.pop();
      if (visited(px.r, px.c)) continue;
      visited(px.r, px.c) = 1;
      double step = wrap_phase(w(px.r, px.c) - w(px.from_r, px.from_c));
      double value = out.unwrapped[p](px.from_r, px.from_c) + step;
      out.unwrapped[p](px.r, px.c) = value;
      out.cycle_map[p](px.r, px.c) =
          static_cast<std::int32_t>(nearest_cycle(value - w(px.r, px.c)));
      push_neighbors(px.r, px.c);
    }
  }
  return out;
}

std::pair<int, int> select_reference_pixel(const Raster<double>& temporal_coherence,
                                           const Raster<std::int32_t>& components,
                                           double threshold) {
  if (!temporal_coherence.same_shape(components))
    throw DataError("coherence and component rasters must share a shape");
  const int rows = temporal_coherence.rows(), cols = temporal_coherence.cols();

  std::int32_t max_label = 0;
  for (const auto v : components.storage()) max_label = std::max(max_label, v);
  std::vector<long> count(static_cast<size_t>(max_label) + 1, 0);
  for (const auto v : components.storage())
    if (v > 0) ++count[static_cast<size_t>(v)];
  std::int32_t largest = 0;
  long best_count = 0;
  for (std::int32_t label = 1; label <= max_label; ++label)
    if (count[static_cast<size_t>(label)] > best_count) {
      best_count = count[static_cast<size_t>(label)];
      largest = label;
    }
  if (largest == 0)
    throw DataError("no unwrapping component available for reference selection; "
                    "lower the coherence threshold");

  double sum_r = 0.0, sum_c = 0.0;
  long n = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (components(r, c) == largest && temporal_coherence(r, c) > threshold) {
        sum_r += r;
        sum_c += c;
        ++n;
      }
  if (n == 0)
    throw DataError("no pixel exceeds the reference coherence threshold; "
                    "lower the threshold");
  const double cr = sum_r / n, cc = sum_c / n;
  std::pair<int, int> best{-1, -1};
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (components(r, c) != largest || temporal_coherence(r, c) <= threshold)
        continue;
      double d = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d < best_d) {
        best_d = d;
        best = {r, c};
      }
    }
  return best;
}

}  // namespace seqlink
