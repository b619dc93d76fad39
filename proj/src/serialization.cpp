#include "gebc/serialization.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace gebc {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'T', 'C'};
constexpr uint32_t kVersion = 1;
constexpr size_t kMaxNdim = 8;
constexpr size_t kMaxName = 256;

template <typename T>
void put_le(std::ostream& os, T v) {
  uint8_t buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i));
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
  uint8_t buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError(std::string("rvtc: truncated stream reading ") + what);
  }
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

Dtype dtype_from_u8(uint8_t v) {
  if (v > 2) throw DataError("rvtc: unsupported dtype tag " + std::to_string(v));
  return static_cast<Dtype>(v);
}

}  // namespace

uint64_t TensorBlob::numel() const {
  uint64_t n = 1;
  for (uint64_t d : dims) {
    if (d == 0) throw DataError("rvtc: zero dimension");
    if (n > std::numeric_limits<uint64_t>::max() / d) {
      throw DataError("rvtc: dimension product overflow");
    }
    n *= d;
  }
  return n;
}

void TensorBlob::validate(const std::string& name) const {
  if (dims.size() > kMaxNdim) {
    throw DataError("rvtc: entry '" + name + "' has ndim > 8");
  }
  const uint64_t expect = numel() * dtype_size(dtype);
  if (payload.size() != expect) {
    throw DataError("rvtc: entry '" + name + "' payload length " +
                    std::to_string(payload.size()) + " != expected " +
                    std::to_string(expect));
  }
}

TensorBlob TensorBlob::from_f32(const Tensor<float>& t) {
  TensorBlob b;
  b.dtype = Dtype::F32;
  b.dims.assign(t.dims.begin(), t.dims.end());
  b.payload.resize(t.data.size() * 4);
  for (size_t i = 0; i < t.data.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &t.data[i], 4);
    for (size_t k = 0; k < 4; ++k) b.payload[i * 4 + k] = uint8_t(bits >> (8 * k));
  }
  return b;
}

TensorBlob TensorBlob::from_i64(const Tensor<int64_t>& t) {
  TensorBlob b;
  b.dtype = Dtype::I64;
  b.dims.assign(t.dims.begin(), t.dims.end());
  b.payload.resize(t.data.size() * 8);
  for (size_t i = 0; i < t.data.size(); ++i) {
    const uint64_t bits = static_cast<uint64_t>(t.data[i]);
    for (size_t k = 0; k < 8; ++k) b.payload[i * 8 + k] = uint8_t(bits >> (8 * k));
  }
  return b;
}

TensorBlob TensorBlob::from_u8(const Tensor<uint8_t>& t) {
  TensorBlob b;
  b.dtype = Dtype::U8;
  b.dims.assign(t.dims.begin(), t.dims.end());
  b.payload = t.data;
  return b;
}

Tensor<float> TensorBlob::to_f32() const {
  if (dtype != Dtype::F32) throw DataError("rvtc: blob is not f32");
  Tensor<float> t;
  t.dims.assign(dims.begin(), dims.end());
  t.data.resize(numel());
  for (size_t i = 0; i < t.data.size(); ++i) {
    uint32_t bits = 0;
    for (size_t k = 0; k < 4; ++k) bits |= uint32_t(payload[i * 4 + k]) << (8 * k);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

Tensor<int64_t> TensorBlob::to_i64() const {
  if (dtype != Dtype::I64) throw DataError("rvtc: blob is not i64");
  Tensor<int64_t> t;
  t.dims.assign(dims.begin(), dims.end());
  t.data.resize(numel());
  for (size_t i = 0; i < t.data.size(); ++i) {
    uint64_t bits = 0;
    for (size_t k = 0; k < 8; ++k) bits |= uint64_t(payload[i * 8 + k]) << (8 * k);
    t.data[i] = static_cast<int64_t>(bits);
  }
  return t;
}

Tensor<uint8_t> TensorBlob::to_u8() const {
  if (dtype != Dtype::U8) throw DataError("rvtc: blob is not u8");
  Tensor<uint8_t> t;
  t.dims.assign(dims.begin(), dims.end());
  t.data = payload;
  return t;
}

void NamedTensorMap::add(const std::string& name, TensorBlob blob) {
  if (find(name)) throw DataError("rvtc: duplicate entry name '" + name + "'");
  entries.emplace_back(name, std::move(blob));
}

const TensorBlob* NamedTensorMap::find(const std::string& name) const {
  for (const auto& [n, b] : entries) {
    if (n == name) return &b;
  }
  return nullptr;
}

const TensorBlob& NamedTensorMap::get(const std::string& name) const {
  const TensorBlob* b = find(name);
  if (!b) throw DataError("rvtc: missing entry '" + name + "'");
  return *b;
}

bool NamedTensorMap::operator==(const NamedTensorMap& o) const {
  if (meta != o.meta || entries.size() != o.entries.size()) return false;
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& [an, ab] = entries[i];
    const auto& [bn, bb] = o.entries[i];
    if (an != bn || ab.dtype != bb.dtype || ab.dims != bb.dims ||
        ab.payload != bb.payload) {
      return false;
    }
  }
  return true;
}

size_t write_container(const NamedTensorMap& map, std::ostream& sink) {
  size_t bytes = 0;
  sink.write(kMagic, 4);
  put_le<uint32_t>(sink, kVersion);
  put_le<uint32_t>(sink, static_cast<uint32_t>(map.entries.size()));
  bytes += 12;
  for (const auto& [name, blob] : map.entries) {
    if (name.empty() || name.size() > kMaxName) {
      throw DataError("rvtc: entry name empty or longer than 256 bytes");
    }
    blob.validate(name);
    put_le<uint16_t>(sink, static_cast<uint16_t>(name.size()));
    sink.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<uint8_t>(sink, static_cast<uint8_t>(blob.dtype));
    put_le<uint8_t>(sink, static_cast<uint8_t>(blob.dims.size()));
    for (uint64_t d : blob.dims) put_le<uint64_t>(sink, d);
    sink.write(reinterpret_cast<const char*>(blob.payload.data()),
               static_cast<std::streamsize>(blob.payload.size()));
    bytes += 2 + name.size() + 2 + 8 * blob.dims.size() + blob.payload.size();
  }
  put_le<uint64_t>(sink, map.meta.size());
  sink.write(map.meta.data(), static_cast<std::streamsize>(map.meta.size()));
  bytes += 8 + map.meta.size();
  if (!sink) throw DataError("rvtc: write failed");
  return bytes;
}

NamedTensorMap read_container(std::istream& source) {
  char magic[4];
  if (!source.read(magic, 4)) throw DataError("rvtc: truncated stream reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("rvtc: bad magic");
  const uint32_t version = get_le<uint32_t>(source, "version");
  if (version != kVersion) {
    throw DataError("rvtc: unsupported version " + std::to_string(version));
  }
  const uint32_t count = get_le<uint32_t>(source, "entry count");
  NamedTensorMap map;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = get_le<uint16_t>(source, "name length");
    if (name_len == 0 || name_len > kMaxName) {
      throw DataError("rvtc: entry name empty or longer than 256 bytes");
    }
    std::string name(name_len, '\0');
    if (!source.read(name.data(), name_len)) {
      throw DataError("rvtc: truncated stream reading entry name");
    }
    TensorBlob blob;
    blob.dtype = dtype_from_u8(get_le<uint8_t>(source, ("dtype of '" + name + "'").c_str()));
    const uint8_t ndim = get_le<uint8_t>(source, ("ndim of '" + name + "'").c_str());
    if (ndim > kMaxNdim) throw DataError("rvtc: entry '" + name + "' has ndim > 8");
    blob.dims.resize(ndim);
    for (uint8_t k = 0; k < ndim; ++k) {
      blob.dims[k] = get_le<uint64_t>(source, ("dims of '" + name + "'").c_str());
    }
    const uint64_t payload_len = blob.numel() * dtype_size(blob.dtype);
    blob.payload.resize(payload_len);
    if (!source.read(reinterpret_cast<char*>(blob.payload.data()),
                     static_cast<std::streamsize>(payload_len))) {
      throw DataError("rvtc: truncated stream in payload of entry '" + name + "'");
    }
    blob.validate(name);
    map.add(name, std::move(blob));
  }
  const uint64_t meta_len = get_le<uint64_t>(source, "meta length");
  map.meta.resize(meta_len);
  if (meta_len &&
      !source.read(map.meta.data(), static_cast<std::streamsize>(meta_len))) {
    throw DataError("rvtc: truncated stream reading meta block");
  }
  return map;
}

void write_container_file(const NamedTensorMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  write_container(map, os);
}

NamedTensorMap read_container_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open for read: " + path);
  return read_container(is);
}

}  // namespace gebc
