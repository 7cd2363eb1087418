#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gar/common.hpp"

namespace gar {

// Page-based column container. File layout (little-endian throughout):
//   magic "GAR1" (4 bytes)
//   format_version  u16
//   codec           u8
//   physical_type   u8
//   total_rows      u64
//   page_count      u32
//   page directory  (per page: byte_offset u64, row_count u32)
//   page payloads
//   crc32c of everything before it (u32)
//
// Every page except the last holds exactly the page row capacity; page i
// therefore covers rows [i*page_rows, min((i+1)*page_rows, total_rows)).

inline constexpr uint32_t kDefaultPageRows = 1024;
inline constexpr char kColumnMagic[4] = {'G', 'A', 'R', '1'};
inline constexpr uint16_t kColumnFormatVersion = 1;
inline constexpr int kMiniblockSize = 32;

enum class Codec : uint8_t { kPlain = 0, kDelta = 1, kRleBool = 2 };
enum class PhysicalType : uint8_t {
  kInt64 = 0,
  kFloat64 = 1,
  kString = 2,
  kBool = 3
};

const char* codec_name(Codec c);
const char* physical_type_name(PhysicalType t);

struct PageInfo {
  uint64_t byte_offset;  // absolute offset of the page payload in the file
  uint32_t row_count;
};

struct ColumnStats {
  uint64_t encoded_bytes;  // full file size, header and CRC included
  uint64_t payload_bytes;  // sum of page payload sizes
  uint64_t rows;
  uint32_t pages;
};

/// Parsed view of one DELTA page. Deltas sit between consecutive rows of the
/// same page (row_count-1 of them); each page restarts at its own first
/// value. Miniblocks pack 32 deltas at a shared power-of-two bit width; the
/// stored value is raw_delta - min_delta, LSB-first within little-endian
/// bytes.
struct MiniblockView {
  int64_t min_delta;
  uint8_t bit_width;      // one of {0,1,2,4,8,16,32,64}
  const uint8_t* packed;  // 32*bit_width/8 bytes
};

struct DeltaPageView {
  int64_t first_value;
  uint32_t row_count;
  std::vector<MiniblockView> miniblocks;

  uint32_t delta_count() const { return row_count == 0 ? 0 : row_count - 1; }
};

/// Parsed view of one RLE_BOOL page: alternating constant runs delimited by
/// boundary positions, P[0] = 0 and P[last] = row_count.
struct IntervalPageView {
  uint8_t first_value;
  uint32_t row_count;
  std::vector<uint32_t> boundaries;
};

/// Reference decoder for DELTA pages: value[0] = first_value, then a plain
/// prefix sum over the raw deltas. Ground truth for the bitmap fast path.
std::vector<int64_t> decode_delta_scalar(const DeltaPageView& page,
                                         size_t upto);

/// Extract value `index` from an LSB-first bit-packed buffer.
uint64_t unpack_bits(const uint8_t* packed, uint8_t bit_width, size_t index);

class ColumnFile {
 public:
  static ColumnFile open(const std::filesystem::path& path);
  static ColumnFile from_buffer(std::vector<uint8_t> bytes,
                                std::string name = "<buffer>");

  Codec codec() const { return codec_; }
  PhysicalType physical_type() const { return type_; }
  uint64_t total_rows() const { return total_rows_; }
  uint32_t page_count() const { return static_cast<uint32_t>(dir_.size()); }
  const std::vector<PageInfo>& page_directory() const { return dir_; }
  ColumnStats stats() const;

  /// Page row capacity, known only when the file has two or more pages.
  std::optional<uint32_t> page_row_capacity() const;

  /// First row covered by page `p`.
  uint64_t page_start_row(uint32_t p) const { return page_starts_[p]; }
  /// Page containing row `row`.
  uint32_t page_of_row(uint64_t row) const;

  // Typed range reads for rows [begin, end). Only pages intersecting the
  // range are decoded; each decode bumps the page-read counter.
  std::vector<int64_t> read_int64(uint64_t begin, uint64_t end) const;
  std::vector<double> read_float64(uint64_t begin, uint64_t end) const;
  std::vector<uint8_t> read_bool(uint64_t begin, uint64_t end) const;
  std::vector<std::string> read_string(uint64_t begin, uint64_t end) const;

  // Structured page access for the decoders in topology/labels. Counted as
  // one page read each.
  DeltaPageView delta_page(uint32_t page) const;
  IntervalPageView interval_page(uint32_t page) const;

  int64_t pages_read() const { return pages_read_->load(std::memory_order_relaxed); }
  void reset_page_counter() const { pages_read_->store(0, std::memory_order_relaxed); }

  const std::string& name() const { return name_; }

 private:
  ColumnFile() = default;
  void parse_header();
  std::span<const uint8_t> page_payload(uint32_t page) const;
  void count_page_read(uint32_t n = 1) const {
    pages_read_->fetch_add(n, std::memory_order_relaxed);
  }

  template <typename T, typename DecodePage>
  std::vector<T> read_range(uint64_t begin, uint64_t end,
                            DecodePage&& decode) const;

  std::vector<uint8_t> bytes_;
  std::string name_;
  Codec codec_ = Codec::kPlain;
  PhysicalType type_ = PhysicalType::kInt64;
  uint64_t total_rows_ = 0;
  std::vector<PageInfo> dir_;
  std::vector<uint64_t> page_starts_;
  std::shared_ptr<std::atomic<int64_t>> pages_read_ =
      std::make_shared<std::atomic<int64_t>>(0);
};

// Encoders. The buffer variants produce a complete file image; write_column
// additionally persists it. DELTA requires int64 input, RLE_BOOL requires
// bool input; PLAIN accepts any physical type. Bool values are one byte per
// row under PLAIN.
std::vector<uint8_t> encode_column(std::span<const int64_t> values, Codec codec,
                                   uint32_t page_rows = kDefaultPageRows);
std::vector<uint8_t> encode_column(std::span<const double> values, Codec codec,
                                   uint32_t page_rows = kDefaultPageRows);
std::vector<uint8_t> encode_column(std::span<const uint8_t> values, Codec codec,
                                   uint32_t page_rows = kDefaultPageRows);
std::vector<uint8_t> encode_column(std::span<const std::string> values,
                                   Codec codec,
                                   uint32_t page_rows = kDefaultPageRows);

ColumnFile write_column(std::span<const int64_t> values, Codec codec,
                        const std::filesystem::path& path,
                        uint32_t page_rows = kDefaultPageRows);
ColumnFile write_column(std::span<const double> values, Codec codec,
                        const std::filesystem::path& path,
                        uint32_t page_rows = kDefaultPageRows);
ColumnFile write_column(std::span<const uint8_t> values, Codec codec,
                        const std::filesystem::path& path,
                        uint32_t page_rows = kDefaultPageRows);
ColumnFile write_column(std::span<const std::string> values, Codec codec,
                        const std::filesystem::path& path,
                        uint32_t page_rows = kDefaultPageRows);

ColumnStats column_stats(const ColumnFile& column);

}  // namespace gar
