// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>

#include "seqlink/raster.hpp"

namespace seqlink {

// Raster store: one flat little-endian binary file per layer (row-major,
// complex64 or float32) plus a JSON sidecar `<name>.json` carrying shape,
// dtype, date, kind tags, units, and provenance. The sidecar records an
// FNV-1a hash of the payload bytes; readers recompute and compare it, and
// require header shape x dtype size to equal the payload size exactly.
struct LayerMeta {
  std::string name;
  std::string dtype;       // "complex64" | "float32" | "int32" | "uint8"
  int rows = 0;
  int cols = 0;
  int date = 0;            // acquisition day, 0 when not applicable
  std::string kind;        // "real" | "compressed" | product tag
  std::string units;
  std::string ref_label;   // compressed layers: base-phase date label
  int first_idx = -1;
  int last_idx = -1;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t payload_hash = 0;
};

std::uint64_t fnv1a(const void* data, std::size_t n_bytes,
                    std::uint64_t seed = 14695981039346656037ull);

class RasterStore {
 public:
  explicit RasterStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  const std::filesystem::path& dir() const { return dir_; }

  bool exists(const std::string& name) const;
  std::vector<std::string> list() const;  // layer names, sorted

  // Write raster + sidecar. The dtype is fixed by the overload: complex
  // rasters narrow to complex64, double rasters to float32.
  void write(const Raster<std::complex<double>>& raster, LayerMeta meta) const;
  void write(const Raster<double>& raster, LayerMeta meta) const;
  void write(const Raster<std::int32_t>& raster, LayerMeta meta) const;
  void write(const Raster<std::uint8_t>& raster, LayerMeta meta) const;

  Raster<std::complex<double>> read_complex(const std::string& name,
                                            LayerMeta* meta = nullptr) const;
  Raster<double> read_real(const std::string& name, LayerMeta* meta = nullptr) const;
  Raster<std::int32_t> read_int32(const std::string& name,
                                  LayerMeta* meta = nullptr) const;
  Raster<std::uint8_t> read_uint8(const std::string& name,
                                  LayerMeta* meta = nullptr) const;

  LayerMeta read_meta(const std::string& name) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace seqlink
