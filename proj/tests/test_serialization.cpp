#include <sstream>

#include "doctest.h"
#include "gebc/rng.hpp"
#include "gebc/serialization.hpp"

using namespace gebc;

namespace {

NamedTensorMap sample_map() {
  NamedTensorMap map;
  Rng rng(42);
  Tensor<float> f({3, 5});
  for (auto& v : f.data) v = float(rng.normal());
  map.add("weights", TensorBlob::from_f32(f));
  Tensor<int64_t> m({4, 4});
  for (auto& v : m.data) v = int64_t(rng.below(8));
  map.add("mask", TensorBlob::from_i64(m));
  Tensor<uint8_t> px({3, 2, 2});
  for (auto& v : px.data) v = uint8_t(rng.below(256));
  map.add("pixels", TensorBlob::from_u8(px));
  map.meta = R"({"kind":"fixture"})";
  return map;
}

std::string to_bytes(const NamedTensorMap& map) {
  std::ostringstream os(std::ios::binary);
  write_container(map, os);
  return os.str();
}

}  // namespace

TEST_CASE("empty container is exactly 20 bytes and round-trips") {
  NamedTensorMap empty;
  const std::string bytes = to_bytes(empty);
  CHECK(bytes.size() == 20);
  CHECK(bytes.substr(0, 4) == "RVTC");
  std::istringstream is(bytes, std::ios::binary);
  const NamedTensorMap back = read_container(is);
  CHECK(back == empty);
}

TEST_CASE("mixed-dtype round trip is value- and byte-exact") {
  const NamedTensorMap map = sample_map();
  const std::string bytes = to_bytes(map);
  std::istringstream is(bytes, std::ios::binary);
  const NamedTensorMap back = read_container(is);
  CHECK(back == map);
  CHECK(back.meta == map.meta);
  CHECK(to_bytes(back) == bytes);  // re-serialization is byte-identical

  const Tensor<float> f = back.get("weights").to_f32();
  CHECK(f.dims == std::vector<size_t>{3, 5});
  const Tensor<uint8_t> px = back.get("pixels").to_u8();
  CHECK(px.dims == std::vector<size_t>{3, 2, 2});
}

TEST_CASE("entry order is preserved and duplicate names are rejected") {
  NamedTensorMap map;
  map.add("b", TensorBlob::from_f32(Tensor<float>({1, 1})));
  map.add("a", TensorBlob::from_f32(Tensor<float>({1, 1})));
  CHECK(map.entries[0].first == "b");
  CHECK(map.entries[1].first == "a");
  CHECK_THROWS_AS(map.add("a", TensorBlob::from_f32(Tensor<float>({1, 1}))),
                  DataError);
}

TEST_CASE("dtype mismatch on read-out is rejected") {
  const NamedTensorMap map = sample_map();
  CHECK_THROWS_AS(map.get("weights").to_i64(), DataError);
  CHECK_THROWS_AS(map.get("mask").to_u8(), DataError);
  CHECK(map.find("missing") == nullptr);
  CHECK_THROWS_AS((void)map.get("missing"), DataError);
}

TEST_CASE("bad magic and bad version are rejected") {
  std::string bytes = to_bytes(sample_map());
  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream is(bad, std::ios::binary);
    CHECK_THROWS_AS(read_container(is), DataError);
  }
  {
    std::string bad = bytes;
    bad[4] = 9;  // version
    std::istringstream is(bad, std::ios::binary);
    CHECK_THROWS_AS(read_container(is), DataError);
  }
}

TEST_CASE("truncation at every byte offset errors cleanly") {
  const std::string bytes = to_bytes(sample_map());
  for (size_t len = 0; len < bytes.size(); ++len) {
    std::istringstream is(bytes.substr(0, len), std::ios::binary);
    CHECK_THROWS_AS(read_container(is), DataError);
  }
  // The full stream still parses after the fuzz sweep.
  std::istringstream is(bytes, std::ios::binary);
  CHECK_NOTHROW(read_container(is));
}

TEST_CASE("truncation error names the offending entry") {
  const std::string bytes = to_bytes(sample_map());
  // Cut in the middle of the second entry's payload.
  std::istringstream is(bytes.substr(0, bytes.size() / 2), std::ios::binary);
  try {
    read_container(is);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("mask") != std::string::npos);
  }
}

TEST_CASE("declared sizes that overflow are rejected") {
  TensorBlob blob;
  blob.dtype = Dtype::F32;
  blob.dims = {uint64_t(1) << 33, uint64_t(1) << 33};
  blob.payload = {0, 0, 0, 0};
  CHECK_THROWS_AS(blob.validate("huge"), DataError);
}

TEST_CASE("file round trip") {
  const NamedTensorMap map = sample_map();
  const std::string path = "/tmp/gebc_serialization_test.rvtc";
  write_container_file(map, path);
  CHECK(read_container_file(path) == map);
  CHECK_THROWS_AS(read_container_file("/tmp/gebc_does_not_exist.rvtc"), DataError);
}
