#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gar {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure (open, read, write, create directory).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid or corrupt on-disk data (bad magic, CRC mismatch,
/// truncated page, non-monotonic boundaries).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid graph metadata (duplicate names, dangling type references, ...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid user data: bad CSV cell, duplicate edge, out-of-range vertex id.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Label expression syntax error; `column` is 1-based.
class ExprError : public Error {
 public:
  ExprError(const std::string& what, std::size_t column)
      : Error(what), column(column) {}
  std::size_t column;
};

// Little-endian scalar IO. The on-disk format is little-endian throughout.

inline void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_i64(std::vector<uint8_t>& out, int64_t v) {
  put_u64(out, static_cast<uint64_t>(v));
}

inline uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

inline uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

inline int64_t get_i64(const uint8_t* p) {
  return static_cast<int64_t>(get_u64(p));
}

/// CRC32C (Castagnoli), table-driven.
uint32_t crc32c(std::span<const uint8_t> data, uint32_t seed = 0);

}  // namespace gar
