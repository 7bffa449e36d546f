// SPDX-License-Identifier: Apache-2.0
#include "seqlink/store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "seqlink/errors.hpp"

namespace seqlink {

namespace {

using nlohmann::json;

int dtype_size(const std::string& dtype) {
  if (dtype == "complex64") return 8;
  if (dtype == "float32") return 4;
  if (dtype == "int32") return 4;
  if (dtype == "uint8") return 1;
  throw DataError("unknown raster dtype: " + dtype);
}

json meta_to_json(const LayerMeta& m) {
  json j;
  j["name"] = m.name;
  j["dtype"] = m.dtype;
  j["shape"] = {m.rows, m.cols};
  j["date"] = m.date;
  j["kind"] = m.kind;
  j["units"] = m.units;
  if (!m.ref_label.empty()) {
    j["refLabel"] = m.ref_label;
    j["firstIdx"] = m.first_idx;
    j["lastIdx"] = m.last_idx;
  }
  j["provenance"] = {{"configHash", m.config_hash}, {"seed", m.seed}};
  j["payloadHash"] = m.payload_hash;
  return j;
}

LayerMeta meta_from_json(const json& j, const std::string& name) {
  LayerMeta m;
  try {
    m.name = j.at("name").get<std::string>();
    m.dtype = j.at("dtype").get<std::string>();
    m.rows = j.at("shape").at(0).get<int>();
    m.cols = j.at("shape").at(1).get<int>();
    m.date = j.at("date").get<int>();
    m.kind = j.at("kind").get<std::string>();
    m.units = j.at("units").get<std::string>();
    if (j.contains("refLabel")) {
      m.ref_label = j.at("refLabel").get<std::string>();
      m.first_idx = j.at("firstIdx").get<int>();
      m.last_idx = j.at("lastIdx").get<int>();
    }
    m.config_hash = j.at("provenance").at("configHash").get<std::string>();
    m.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    m.payload_hash = j.at("payloadHash").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar for layer " + name + ": " + e.what());
  }
  return m;
}

void write_payload(const std::filesystem::path& path, const void* data,
                   std::size_t n_bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n_bytes));
  if (!out) throw DataError("short write: " + path.string());
}

std::vector<char> read_payload(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("missing raster payload: " + path.string());
  auto n = static_cast<std::size_t>(in.tellg());
  std::vector<char> bytes(n);
  in.seekg(0);
  in.read(bytes.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("short read: " + path.string());
  return bytes;
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t n_bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n_bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

bool RasterStore::exists(const std::string& name) const {
  return std::filesystem::exists(dir_ / (name + ".json"));
}

std::vector<std::string> RasterStore::list() const {
  std::vector<std::string> names;
  if (!std::filesystem::exists(dir_)) return names;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json" &&
        std::filesystem::exists(entry.path().parent_path() /
                                (entry.path().stem().string() + ".bin")))
      names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

namespace {

template <typename Packed>
void write_impl(const std::filesystem::path& dir, const std::vector<Packed>& packed,
                LayerMeta& meta) {
  std::filesystem::create_directories(dir);
  const std::size_t n_bytes = packed.size() * sizeof(Packed);
  meta.payload_hash = fnv1a(packed.data(), n_bytes);
  write_payload(dir / (meta.name + ".bin"), packed.data(), n_bytes);
  std::ofstream side(dir / (meta.name + ".json"), std::ios::trunc);
  if (!side) throw DataError("cannot write sidecar for layer " + meta.name);
  side << meta_to_json(meta).dump(2) << "\n";
}

std::vector<char> read_checked(const std::filesystem::path& dir,
                               const std::string& name,
                               const std::string& expected_dtype, LayerMeta& meta) {
  std::ifstream side(dir / (name + ".json"));
  if (!side) throw DataError("missing layer sidecar: " + name);
  json j;
  try {
    side >> j;
  } catch (const json::exception& e) {
    throw DataError("unparseable sidecar for layer " + name + ": " + e.what());
  }
  meta = meta_from_json(j, name);
  if (meta.dtype != expected_dtype)
    throw DataError("layer " + name + " has dtype " + meta.dtype + ", expected " +
                    expected_dtype);
  std::vector<char> bytes = read_payload(dir / (name + ".bin"));
  const std::size_t expected =
      static_cast<std::size_t>(meta.rows) * static_cast<std::size_t>(meta.cols) *
      static_cast<std::size_t>(dtype_size(meta.dtype));
  if (bytes.size() != expected)
    throw DataError("layer " + name + " payload size mismatch");
  if (fnv1a(bytes.data(), bytes.size()) != meta.payload_hash)
    throw DataError("layer " + name + " payload hash mismatch");
  return bytes;
}

}  // namespace

void RasterStore::write(const Raster<std::complex<double>>& raster,
                        LayerMeta meta) const {
  meta.dtype = "complex64";
  meta.rows = raster.rows();
  meta.cols = raster.cols();
  std::vector<std::complex<float>> packed(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i)
    packed[i] = std::complex<float>(raster.storage()[i]);
  write_impl(dir_, packed, meta);
}

void RasterStore::write(const Raster<double>& raster, LayerMeta meta) const {
  meta.dtype = "float32";
  meta.rows = raster.rows();
  meta.cols = raster.cols();
  std::vector<float> packed(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i)
    packed[i] = static_cast<float>(raster.storage()[i]);
  write_impl(dir_, packed, meta);
}

void RasterStore::write(const Raster<std::int32_t>& raster, LayerMeta meta) const {
  meta.dtype = "int32";
  meta.rows = raster.rows();
  meta.cols = raster.cols();
  write_impl(dir_, raster.storage(), meta);
}

void RasterStore::write(const Raster<std::uint8_t>& raster, LayerMeta meta) const {
  meta.dtype = "uint8";
  meta.rows = raster.rows();
  meta.cols = raster.cols();
  write_impl(dir_, raster.storage(), meta);
}

Raster<std::complex<double>> RasterStore::read_complex(const std::string& name,
                                                       LayerMeta* meta_out) const {
  LayerMeta meta;
  std::vector<char> bytes = read_checked(dir_, name, "complex64", meta);
  Raster<std::complex<double>> raster(meta.rows, meta.cols);
  const auto* src = reinterpret_cast<const std::complex<float>*>(bytes.data());
  for (std::size_t i = 0; i < raster.size(); ++i)
    raster.storage()[i] = std::complex<double>(src[i]);
  if (meta_out) *meta_out = meta;
  return raster;
}

Raster<double> RasterStore::read_real(const std::string& name,
                                      LayerMeta* meta_out) const {
  LayerMeta meta;
  std::vector<char> bytes = read_checked(dir_, name, "float32", meta);
  Raster<double> raster(meta.rows, meta.cols);
  const auto* src = reinterpret_cast<const float*>(bytes.data());
  for (std::size_t i = 0; i < raster.size(); ++i)
    raster.storage()[i] = static_cast<double>(src[i]);
  if (meta_out) *meta_out = meta;
  return raster;
}

Raster<std::int32_t> RasterStore::read_int32(const std::string& name,
                                             LayerMeta* meta_out) const {
  LayerMeta meta;
  std::vector<char> bytes = read_checked(dir_, name, "int32", meta);
  Raster<std::int32_t> raster(meta.rows, meta.cols);
  std::memcpy(raster.storage().data(), bytes.data(), bytes.size());
  if (meta_out) *meta_out = meta;
  return raster;
}

Raster<std::uint8_t> RasterStore::read_uint8(const std::string& name,
                                             LayerMeta* meta_out) const {
  LayerMeta meta;
  std::vector<char> bytes = read_checked(dir_, name, "uint8", meta);
  Raster<std::uint8_t> raster(meta.rows, meta.cols);
  std::memcpy(raster.storage().data(), bytes.data(), bytes.size());
  if (meta_out) *meta_out = meta;
  return raster;
}

LayerMeta RasterStore::read_meta(const std::string& name) const {
  std::ifstream side(dir_ / (name + ".json"));
  if (!side) throw DataError("missing layer sidecar: " + name);
  json j;
  try {
    side >> j;
  } catch (const json::exception& e) {
    throw DataError("unparseable sidecar for layer " + name + ": " + e.what());
  }
  return meta_from_json(j, name);
}

}  // namespace seqlink
