#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gebc/tensor.hpp"

namespace gebc {

// .rvtc container: magic "RVTC", u32 version=1, u32 entry count, then per
// entry (u16 name length, name, u8 dtype, u8 ndim, u64 dims..., payload),
// then u64 meta length + meta bytes. All integers little-endian.

enum class Dtype : uint8_t { F32 = 0, I64 = 1, U8 = 2 };

inline size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::I64: return 8;
    case Dtype::U8: return 1;
  }
  throw DataError("unsupported dtype");
}

struct TensorBlob {
  Dtype dtype = Dtype::F32;
  std::vector<uint64_t> dims;
  std::vector<uint8_t> payload;  // row-major little-endian

  uint64_t numel() const;
  void validate(const std::string& name) const;

  static TensorBlob from_f32(const Tensor<float>& t);
  static TensorBlob from_i64(const Tensor<int64_t>& t);
  static TensorBlob from_u8(const Tensor<uint8_t>& t);
  Tensor<float> to_f32() const;
  Tensor<int64_t> to_i64() const;
  Tensor<uint8_t> to_u8() const;
};

struct NamedTensorMap {
  // Order-preserving; names unique.
  std::vector<std::pair<std::string, TensorBlob>> entries;
  std::string meta;  // UTF-8 JSON text block

  void add(const std::string& name, TensorBlob blob);
  const TensorBlob* find(const std::string& name) const;
  const TensorBlob& get(const std::string& name) const;
  bool operator==(const NamedTensorMap& o) const;
};

size_t write_container(const NamedTensorMap& map, std::ostream& sink);
NamedTensorMap read_container(std::istream& source);

void write_container_file(const NamedTensorMap& map, const std::string& path);
NamedTensorMap read_container_file(const std::string& path);

}  // namespace gebc
