// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "seqlink/errors.hpp"

namespace seqlink {

// Dense row-major 2-D grid. Rows/cols are ints: scene sizes here are
// desk-scale and signed arithmetic keeps offset math honest.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DataError("raster shape must be non-negative");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  T& at(int r, int c) {
    check_bounds(r, c);
    return (*this)(r, c);
  }
  const T& at(int r, int c) const {
    check_bounds(r, c);
    return (*this)(r, c);
  }
  bool in_bounds(int r, int c) const {
    return r >= 0 && r < rows_ && c >= 0 && c < cols_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

 private:
  void check_bounds(int r, int c) const {
    if (!in_bounds(r, c)) throw DataError("raster index out of bounds");
  }
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using RasterD = Raster<double>;
using RasterZ = Raster<std::complex<double>>;
using RasterU8 = Raster<std::uint8_t>;

}  // namespace seqlink
