#include "hetnet/container.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace hetnet::io {
namespace {

constexpr char kMagic[4] = {'H', 'N', 'T', 'C'};
constexpr uint32_t kFormatVersion = 1;

uint32_t crc_table_entry(uint32_t i) {
  uint32_t c = i;
  for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
  return c;
}

const uint32_t* crc_table() {
  static const auto table = [] {
    static uint32_t t[256];
    for (uint32_t i = 0; i < 256; ++i) t[i] = crc_table_entry(i);
    return t;
  }();
  return table;
}

struct CrcWriter {
  std::ofstream out;
  uint32_t crc = 0;

  void write(const void* data, size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    crc = crc32(data, n, crc);
  }
  template <typename T>
  void write_int(T v) {
    uint8_t buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
    write(buf, sizeof(T));
  }
};

struct CrcReader {
  std::ifstream in;
  uint32_t crc = 0;
  std::string path;

  void read(void* data, size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    HT_CHECK(static_cast<size_t>(in.gcount()) == n, "truncated container file " + path);
    crc = crc32(data, n, crc);
  }
  template <typename T>
  T read_int() {
    uint8_t buf[sizeof(T)];
    read(buf, sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }
};

}  // namespace

uint32_t crc32(const void* data, size_t n, uint32_t crc) {
  const uint32_t* table = crc_table();
  const auto* p = static_cast<const uint8_t*>(data);
  uint32_t c = crc ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

uint32_t tensor_crc(const Tensor& t) {
  return crc32(t.data(), sizeof(double) * static_cast<size_t>(t.numel()));
}

bool Container::has(const std::string& name) const {
  for (const auto& [n, a] : arrays) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Container::array(const std::string& name) const {
  for (const auto& [n, a] : arrays) {
    if (n == name) return a;
  }
  fail("container has no array named '" + name + "'");
}

void save_container(const std::string& path, const Container& c) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";

  {
    CrcWriter w;
    w.out.open(tmp, std::ios::binary | std::ios::trunc);
    HT_CHECK(w.out.good(), "cannot open " + tmp + " for writing");

    w.write(kMagic, sizeof(kMagic));
    w.write_int<uint32_t>(kFormatVersion);
    const std::string meta = c.meta.dump();
    w.write_int<uint64_t>(meta.size());
    w.write(meta.data(), meta.size());
    w.write_int<uint64_t>(c.arrays.size());
    for (const auto& [name, t] : c.arrays) {
      HT_CHECK(name.size() <= 4096, "array name too long");
      w.write_int<uint32_t>(static_cast<uint32_t>(name.size()));
      w.write(name.data(), name.size());
      w.write_int<uint32_t>(static_cast<uint32_t>(t.ndim()));
      for (int d = 0; d < t.ndim(); ++d) w.write_int<int64_t>(t.dim(d));
      // Doubles are stored as their 64-bit pattern, little endian.
      for (int64_t i = 0; i < t.numel(); ++i) {
        uint64_t bits;
        std::memcpy(&bits, t.data() + i, sizeof(bits));
        w.write_int<uint64_t>(bits);
      }
    }
    const uint32_t digest = w.crc;
    w.write_int<uint32_t>(digest);
    w.out.close();
    HT_CHECK(w.out.good(), "write failed for " + tmp);
  }
  fs::rename(tmp, target);
}

Container load_container(const std::string& path) {
  CrcReader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  HT_CHECK(r.in.good(), "cannot open container file " + path);

  char magic[4];
  r.read(magic, sizeof(magic));
  HT_CHECK(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
           path + " is not a container file (bad magic)");
  const uint32_t version = r.read_int<uint32_t>();
  HT_CHECK(version == kFormatVersion,
           path + " has unsupported container version " + std::to_string(version));

  Container c;
  const uint64_t meta_len = r.read_int<uint64_t>();
  HT_CHECK(meta_len <= (1u << 26), path + " metadata block implausibly large");
  std::string meta(meta_len, '\0');
  r.read(meta.data(), meta_len);
  c.meta = nlohmann::json::parse(meta, nullptr, false);
  HT_CHECK(!c.meta.is_discarded(), path + " metadata is not valid JSON");

  const uint64_t count = r.read_int<uint64_t>();
  HT_CHECK(count <= (1u << 20), path + " array count implausibly large");
  for (uint64_t a = 0; a < count; ++a) {
    const uint32_t name_len = r.read_int<uint32_t>();
    HT_CHECK(name_len <= 4096, path + " array name implausibly long");
    std::string name(name_len, '\0');
    r.read(name.data(), name_len);
    const uint32_t ndim = r.read_int<uint32_t>();
    HT_CHECK(ndim <= 8, path + " array rank implausibly large");
    std::vector<int64_t> shape(ndim);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape[d] = r.read_int<int64_t>();
      HT_CHECK(shape[d] >= 0 && numel <= (int64_t{1} << 33), path + " array implausibly large");
      numel *= shape[d];
    }
    Tensor t(shape);
    for (int64_t i = 0; i < numel; ++i) {
      const uint64_t bits = r.read_int<uint64_t>();
      double v;
      std::memcpy(&v, &bits, sizeof(v));
      t[i] = v;
    }
    c.arrays.emplace_back(std::move(name), std::move(t));
  }

  const uint32_t computed = r.crc;
  const uint32_t stored = r.read_int<uint32_t>();
  HT_CHECK(computed == stored, path + " failed its checksum; file is corrupt");
  return c;
}

}  // namespace hetnet::io
