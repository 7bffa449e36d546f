// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "seqlink/raster.hpp"

namespace seqlink {

struct LayerKind {
  enum class Type { Real, Compressed };
  Type type = Type::Real;
  // Compressed layers only: label of the date carrying the base phase and
  // the global index range of the real acquisitions that were projected.
  std::string ref_label;
  int first_idx = -1;
  int last_idx = -1;
};

// A stack of co-registered complex layers. Simulated stacks hold real
// acquisitions with strictly increasing dates; assembled mini-stacks may
// prepend compressed layers whose nominal date is their reference date.
struct SlcStack {
  std::vector<int> dates;  // days, one per layer
  std::vector<Raster<std::complex<double>>> layers;
  std::vector<LayerKind> kinds;

  int n_layers() const { return static_cast<int>(layers.size()); }
  int rows() const { return layers.empty() ? 0 : layers.front().rows(); }
  int cols() const { return layers.empty() ? 0 : layers.front().cols(); }

  void validate() const {
    if (dates.size() != layers.size() || kinds.size() != layers.size())
      throw DataError("stack fields must have one entry per layer");
    for (const auto& l : layers)
      if (!l.same_shape(rows(), cols())) throw DataError("stack layer shape mismatch");
  }
};

}  // namespace seqlink
