#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "projlab/errors.hpp"

namespace projlab::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ofstream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw PreconditionError("truncated container file");
  return to_little(v);
}

inline void put_magic(std::ofstream& out) { out.write("PLAB", 4); }

inline void expect_magic(std::ifstream& in, const std::string& path) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PLAB", 4) != 0) {
    throw PreconditionError("not a PLAB container: " + path);
  }
}

inline void write_sidecar(const std::string& path, const std::string& json) {
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write " + path + ".json");
  side << json << '\n';
}

}  // namespace projlab::detail
