#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hetnet/tensor.hpp"

namespace hetnet::io {

// On-disk container for named double arrays plus a JSON metadata header.
// Layout: "HNTC" magic, u32 format version, length-prefixed JSON, array
// table, trailing CRC-32 of everything before it. All integers little
// endian. Used for checkpoints, noise statistics, and teacher weights.
struct Container {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  bool has(const std::string& name) const;
  const Tensor& array(const std::string& name) const;
  void add(std::string name, Tensor t) { arrays.emplace_back(std::move(name), std::move(t)); }
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

uint32_t crc32(const void* data, size_t n, uint32_t crc = 0);
uint32_t tensor_crc(const Tensor& t);

}  // namespace hetnet::io
