#include "gar/colstore.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace gar {

namespace {

constexpr size_t kHeaderSize = 20;          // magic..page_count
constexpr size_t kDirEntrySize = 12;        // byte_offset u64 + row_count u32
constexpr uint8_t kAllowedWidths[] = {0, 1, 2, 4, 8, 16, 32, 64};

bool width_allowed(uint8_t w) {
  return std::find(std::begin(kAllowedWidths), std::end(kAllowedWidths), w) !=
         std::end(kAllowedWidths);
}

uint8_t width_for(uint64_t max_packed) {
  for (uint8_t w : kAllowedWidths) {
    if (w == 64) break;
    if (max_packed < (uint64_t(1) << w)) return w;
  }
  return 64;
}

// OR `w` bits of `x` into the buffer at bit position `bitpos`, LSB-first
// within little-endian bytes. Destination bits must currently be zero.
void or_bits_le(uint8_t* buf, size_t bitpos, uint64_t x, int w) {
  if (w == 0) return;
  size_t byte = bitpos >> 3;
  int shift = static_cast<int>(bitpos & 7);
  uint64_t lo = x << shift;
  int lo_bits = std::min(w + shift, 64);
  for (int i = 0; i < (lo_bits + 7) / 8; ++i) {
    buf[byte + i] |= static_cast<uint8_t>(lo >> (8 * i));
  }
  if (w + shift > 64) {
    buf[byte + 8] |= static_cast<uint8_t>(x >> (64 - shift));
  }
}

void encode_delta_page(std::vector<uint8_t>& out, const int64_t* vals,
                       uint32_t rows) {
  put_i64(out, vals[0]);
  uint32_t n_deltas = rows - 1;
  uint64_t packed[kMiniblockSize];
  for (uint32_t base = 0; base < n_deltas; base += kMiniblockSize) {
    uint32_t count = std::min<uint32_t>(kMiniblockSize, n_deltas - base);
    int64_t min_delta = std::numeric_limits<int64_t>::max();
    for (uint32_t i = 0; i < count; ++i) {
      // Wrapping difference: exact mod 2^64, so arbitrary int64 inputs
      // survive the roundtrip even when the true gap overflows.
      int64_t d = static_cast<int64_t>(static_cast<uint64_t>(vals[base + i + 1]) -
                                       static_cast<uint64_t>(vals[base + i]));
      min_delta = std::min(min_delta, d);
    }
    uint64_t max_packed = 0;
    for (uint32_t i = 0; i < count; ++i) {
      uint64_t d = static_cast<uint64_t>(vals[base + i + 1]) -
                   static_cast<uint64_t>(vals[base + i]);
      packed[i] = d - static_cast<uint64_t>(min_delta);
      max_packed = std::max(max_packed, packed[i]);
    }
    uint8_t w = width_for(max_packed);
    put_i64(out, min_delta);
    put_u8(out, w);
    // Short final miniblocks are zero-padded to 32 entries.
    size_t nbytes = static_cast<size_t>(kMiniblockSize) * w / 8;
    size_t at = out.size();
    out.resize(at + nbytes, 0);
    for (uint32_t i = 0; i < count; ++i) {
      or_bits_le(out.data() + at, static_cast<size_t>(i) * w, packed[i], w);
    }
  }
}

void encode_rle_bool_page(std::vector<uint8_t>& out, const uint8_t* vals,
                          uint32_t rows) {
  put_u8(out, vals[0] ? 1 : 0);
  std::vector<uint32_t> boundaries;
  boundaries.push_back(0);
  for (uint32_t r = 1; r < rows; ++r) {
    if ((vals[r] != 0) != (vals[r - 1] != 0)) boundaries.push_back(r);
  }
  boundaries.push_back(rows);
  put_u32(out, static_cast<uint32_t>(boundaries.size()));
  for (uint32_t b : boundaries) put_u32(out, b);
}

void encode_plain_string_page(std::vector<uint8_t>& out,
                              const std::string* vals, uint32_t rows) {
  for (uint32_t r = 0; r < rows; ++r) {
    put_u32(out, static_cast<uint32_t>(vals[r].size()));
    out.insert(out.end(), vals[r].begin(), vals[r].end());
  }
}

template <typename EncodePage>
std::vector<uint8_t> assemble(Codec codec, PhysicalType type, uint64_t total,
                              uint32_t page_rows, EncodePage&& encode_page) {
  if (page_rows == 0 || (page_rows & (page_rows - 1)) != 0) {
    throw DataError("page row capacity must be a power of two, got " +
                    std::to_string(page_rows));
  }
  uint32_t pages = static_cast<uint32_t>((total + page_rows - 1) / page_rows);
  std::vector<std::vector<uint8_t>> payloads(pages);
  std::vector<uint32_t> rows(pages);
  for (uint32_t p = 0; p < pages; ++p) {
    uint64_t begin = static_cast<uint64_t>(p) * page_rows;
    rows[p] = static_cast<uint32_t>(std::min<uint64_t>(page_rows, total - begin));
    encode_page(payloads[p], begin, rows[p]);
  }

  std::vector<uint8_t> out;
  out.reserve(kHeaderSize + kDirEntrySize * pages + 64);
  out.insert(out.end(), std::begin(kColumnMagic), std::end(kColumnMagic));
  put_u16(out, kColumnFormatVersion);
  put_u8(out, static_cast<uint8_t>(codec));
  put_u8(out, static_cast<uint8_t>(type));
  put_u64(out, total);
  put_u32(out, pages);
  uint64_t offset = kHeaderSize + kDirEntrySize * static_cast<uint64_t>(pages);
  for (uint32_t p = 0; p < pages; ++p) {
    put_u64(out, offset);
    put_u32(out, rows[p]);
    offset += payloads[p].size();
  }
  for (auto& payload : payloads) {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  put_u32(out, crc32c(out));
  return out;
}

void write_file(const std::filesystem::path& path,
                std::span<const uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

[[noreturn]] void bad_codec(Codec codec, PhysicalType type) {
  throw DataError(std::string("codec ") + codec_name(codec) +
                  " is incompatible with physical type " +
                  physical_type_name(type));
}

}  // namespace

const char* codec_name(Codec c) {
  switch (c) {
    case Codec::kPlain: return "plain";
    case Codec::kDelta: return "delta";
    case Codec::kRleBool: return "rle_bool";
  }
  return "?";
}

const char* physical_type_name(PhysicalType t) {
  switch (t) {
    case PhysicalType::kInt64: return "int64";
    case PhysicalType::kFloat64: return "float64";
    case PhysicalType::kString: return "string";
    case PhysicalType::kBool: return "bool";
  }
  return "?";
}

uint64_t unpack_bits(const uint8_t* packed, uint8_t bit_width, size_t index) {
  if (bit_width == 0) return 0;
  size_t bitpos = index * bit_width;
  size_t byte = bitpos >> 3;
  int shift = static_cast<int>(bitpos & 7);
  int need = bit_width + shift;
  uint64_t v = 0;
  int nbytes = (need + 7) / 8;
  for (int i = 0; i < nbytes && i < 8; ++i) {
    v |= static_cast<uint64_t>(packed[byte + i]) << (8 * i);
  }
  v >>= shift;
  if (need > 64) {
    v |= static_cast<uint64_t>(packed[byte + 8]) << (64 - shift);
  }
  if (bit_width < 64) v &= (uint64_t(1) << bit_width) - 1;
  return v;
}

std::vector<int64_t> decode_delta_scalar(const DeltaPageView& page,
                                         size_t upto) {
  if (upto > page.row_count) {
    throw DataError("decode_delta_scalar: upto exceeds page rows");
  }
  std::vector<int64_t> out;
  out.reserve(upto);
  if (upto == 0) return out;
  uint64_t value = static_cast<uint64_t>(page.first_value);
  out.push_back(page.first_value);
  for (size_t i = 1; i < upto; ++i) {
    size_t delta_index = i - 1;
    const MiniblockView& mb = page.miniblocks[delta_index / kMiniblockSize];
    uint64_t x = unpack_bits(mb.packed, mb.bit_width, delta_index % kMiniblockSize);
    value += static_cast<uint64_t>(mb.min_delta) + x;
    out.push_back(static_cast<int64_t>(value));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoders

std::vector<uint8_t> encode_column(std::span<const int64_t> values, Codec codec,
                                   uint32_t page_rows) {
  if (codec == Codec::kRleBool) bad_codec(codec, PhysicalType::kInt64);
  return assemble(codec, PhysicalType::kInt64, values.size(), page_rows,
                  [&](std::vector<uint8_t>& out, uint64_t begin, uint32_t rows) {
                    if (codec == Codec::kDelta) {
                      encode_delta_page(out, values.data() + begin, rows);
                    } else {
                      for (uint32_t r = 0; r < rows; ++r) {
                        put_i64(out, values[begin + r]);
                      }
                    }
                  });
}

std::vector<uint8_t> encode_column(std::span<const double> values, Codec codec,
                                   uint32_t page_rows) {
  if (codec != Codec::kPlain) bad_codec(codec, PhysicalType::kFloat64);
  return assemble(codec, PhysicalType::kFloat64, values.size(), page_rows,
                  [&](std::vector<uint8_t>& out, uint64_t begin, uint32_t rows) {
                    for (uint32_t r = 0; r < rows; ++r) {
                      put_u64(out, std::bit_cast<uint64_t>(values[begin + r]));
                    }
                  });
}

std::vector<uint8_t> encode_column(std::span<const uint8_t> values, Codec codec,
                                   uint32_t page_rows) {
  if (codec == Codec::kDelta) bad_codec(codec, PhysicalType::kBool);
  return assemble(codec, PhysicalType::kBool, values.size(), page_rows,
                  [&](std::vector<uint8_t>& out, uint64_t begin, uint32_t rows) {
                    if (codec == Codec::kRleBool) {
                      encode_rle_bool_page(out, values.data() + begin, rows);
                    } else {
                      for (uint32_t r = 0; r < rows; ++r) {
                        put_u8(out, values[begin + r] ? 1 : 0);
                      }
                    }
                  });
}

std::vector<uint8_t> encode_column(std::span<const std::string> values,
                                   Codec codec, uint32_t page_rows) {
  if (codec != Codec::kPlain) bad_codec(codec, PhysicalType::kString);
  return assemble(codec, PhysicalType::kString, values.size(), page_rows,
                  [&](std::vector<uint8_t>& out, uint64_t begin, uint32_t rows) {
                    encode_plain_string_page(out, values.data() + begin, rows);
                  });
}

template <typename T>
static ColumnFile write_column_impl(std::span<const T> values, Codec codec,
                                    const std::filesystem::path& path,
                                    uint32_t page_rows) {
  std::vector<uint8_t> bytes = encode_column(values, codec, page_rows);
  write_file(path, bytes);
  return ColumnFile::from_buffer(std::move(bytes), path.string());
}

ColumnFile write_column(std::span<const int64_t> values, Codec codec,
                        const std::filesystem::path& path, uint32_t page_rows) {
  return write_column_impl(values, codec, path, page_rows);
}
ColumnFile write_column(std::span<const double> values, Codec codec,
                        const std::filesystem::path& path, uint32_t page_rows) {
  return write_column_impl(values, codec, path, page_rows);
}
ColumnFile write_column(std::span<const uint8_t> values, Codec codec,
                        const std::filesystem::path& path, uint32_t page_rows) {
  return write_column_impl(values, codec, path, page_rows);
}
ColumnFile write_column(std::span<const std::string> values, Codec codec,
                        const std::filesystem::path& path, uint32_t page_rows) {
  return write_column_impl(values, codec, path, page_rows);
}

// ---------------------------------------------------------------------------
// Reader

ColumnFile ColumnFile::open(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path.string());
  auto size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("read failed: " + path.string());
  return from_buffer(std::move(bytes), path.string());
}

ColumnFile ColumnFile::from_buffer(std::vector<uint8_t> bytes,
                                   std::string name) {
  ColumnFile col;
  col.bytes_ = std::move(bytes);
  col.name_ = std::move(name);
  col.parse_header();
  return col;
}

void ColumnFile::parse_header() {
  auto fail = [&](const std::string& why) {
    throw FormatError(name_ + ": " + why);
  };
  if (bytes_.size() < kHeaderSize + 4) fail("file too small");
  if (std::memcmp(bytes_.data(), kColumnMagic, 4) != 0) fail("bad magic");
  uint32_t stored_crc = get_u32(bytes_.data() + bytes_.size() - 4);
  uint32_t actual =
      crc32c(std::span<const uint8_t>(bytes_.data(), bytes_.size() - 4));
  if (stored_crc != actual) fail("crc32c mismatch");
  if (get_u16(bytes_.data() + 4) != kColumnFormatVersion) {
    fail("unsupported format version");
  }
  uint8_t codec_raw = bytes_[6];
  uint8_t type_raw = bytes_[7];
  if (codec_raw > 2) fail("unknown codec");
  if (type_raw > 3) fail("unknown physical type");
  codec_ = static_cast<Codec>(codec_raw);
  type_ = static_cast<PhysicalType>(type_raw);
  if (codec_ == Codec::kDelta && type_ != PhysicalType::kInt64) {
    fail("delta codec requires int64");
  }
  if (codec_ == Codec::kRleBool && type_ != PhysicalType::kBool) {
    fail("rle_bool codec requires bool");
  }
  total_rows_ = get_u64(bytes_.data() + 8);
  uint32_t pages = get_u32(bytes_.data() + 16);
  uint64_t payload_start = kHeaderSize + kDirEntrySize * uint64_t(pages);
  if (payload_start + 4 > bytes_.size()) fail("truncated page directory");

  dir_.resize(pages);
  page_starts_.resize(pages + 1);
  page_starts_[0] = 0;
  uint64_t expect_offset = payload_start;
  for (uint32_t p = 0; p < pages; ++p) {
    const uint8_t* e = bytes_.data() + kHeaderSize + kDirEntrySize * p;
    dir_[p].byte_offset = get_u64(e);
    dir_[p].row_count = get_u32(e + 8);
    if (dir_[p].byte_offset != expect_offset) fail("page offsets not contiguous");
    if (dir_[p].row_count == 0) fail("empty page");
    if (p > 0 && p + 1 < pages && dir_[p].row_count != dir_[0].row_count) {
      fail("interior page with short row count");
    }
    if (pages > 1 && p == pages - 1 && dir_[p].row_count > dir_[0].row_count) {
      fail("final page larger than page capacity");
    }
    page_starts_[p + 1] = page_starts_[p] + dir_[p].row_count;
    expect_offset = dir_[p].byte_offset;  // recomputed below from payload size
    expect_offset = dir_[p].byte_offset;
    // Payload size of page p is derived from the next offset; defer the
    // bound check until we know it.
    if (p + 1 < pages) {
      const uint8_t* n = bytes_.data() + kHeaderSize + kDirEntrySize * (p + 1);
      expect_offset = get_u64(n);
      if (expect_offset < dir_[p].byte_offset) fail("page offsets decrease");
    } else {
      expect_offset = bytes_.size() - 4;
      if (expect_offset < dir_[p].byte_offset) fail("payload overruns file");
    }
  }
  if (page_starts_[pages] != total_rows_) {
    fail("page row counts do not sum to total_rows");
  }
}

std::span<const uint8_t> ColumnFile::page_payload(uint32_t page) const {
  uint64_t begin = dir_[page].byte_offset;
  uint64_t end = (page + 1 < dir_.size()) ? dir_[page + 1].byte_offset
                                          : bytes_.size() - 4;
  return {bytes_.data() + begin, bytes_.data() + end};
}

std::optional<uint32_t> ColumnFile::page_row_capacity() const {
  if (dir_.size() >= 2) return dir_[0].row_count;
  return std::nullopt;
}

uint32_t ColumnFile::page_of_row(uint64_t row) const {
  if (dir_.size() <= 1) return 0;
  uint32_t cap = dir_[0].row_count;
  return static_cast<uint32_t>(
      std::min<uint64_t>(row / cap, dir_.size() - 1));
}

ColumnStats ColumnFile::stats() const {
  ColumnStats s;
  s.encoded_bytes = bytes_.size();
  s.payload_bytes = bytes_.size() - 4 -
                    (kHeaderSize + kDirEntrySize * uint64_t(dir_.size()));
  s.rows = total_rows_;
  s.pages = page_count();
  return s;
}

ColumnStats column_stats(const ColumnFile& column) { return column.stats(); }

DeltaPageView ColumnFile::delta_page(uint32_t page) const {
  if (codec_ != Codec::kDelta) {
    throw DataError(name_ + ": delta_page on non-delta column");
  }
  if (page >= dir_.size()) throw DataError(name_ + ": page index out of range");
  count_page_read();
  auto payload = page_payload(page);
  auto fail = [&](const std::string& why) {
    throw FormatError(name_ + ": corrupt delta page: " + why);
  };
  if (payload.size() < 8) fail("missing first value");
  DeltaPageView view;
  view.row_count = dir_[page].row_count;
  view.first_value = get_i64(payload.data());
  uint32_t n_deltas = view.delta_count();
  uint32_t n_blocks = (n_deltas + kMiniblockSize - 1) / kMiniblockSize;
  size_t at = 8;
  view.miniblocks.reserve(n_blocks);
  for (uint32_t b = 0; b < n_blocks; ++b) {
    if (at + 9 > payload.size()) fail("truncated miniblock header");
    MiniblockView mb;
    mb.min_delta = get_i64(payload.data() + at);
    mb.bit_width = payload[at + 8];
    if (!width_allowed(mb.bit_width)) fail("illegal bit width");
    at += 9;
    size_t nbytes = static_cast<size_t>(kMiniblockSize) * mb.bit_width / 8;
    if (at + nbytes > payload.size()) fail("truncated miniblock payload");
    mb.packed = payload.data() + at;
    at += nbytes;
    view.miniblocks.push_back(mb);
  }
  if (at != payload.size()) fail("trailing bytes after miniblocks");
  return view;
}

IntervalPageView ColumnFile::interval_page(uint32_t page) const {
  if (codec_ != Codec::kRleBool) {
    throw DataError(name_ + ": interval_page on non-RLE column");
  }
  if (page >= dir_.size()) throw DataError(name_ + ": page index out of range");
  count_page_read();
  auto payload = page_payload(page);
  auto fail = [&](const std::string& why) {
    throw FormatError(name_ + ": corrupt interval page: " + why);
  };
  if (payload.size() < 5) fail("short page");
  IntervalPageView view;
  view.row_count = dir_[page].row_count;
  view.first_value = payload[0];
  if (view.first_value > 1) fail("bad first value");
  uint32_t count = get_u32(payload.data() + 1);
  if (count < 2) fail("boundary list too short");
  if (payload.size() != 5 + size_t(count) * 4) fail("payload size mismatch");
  view.boundaries.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    view.boundaries[i] = get_u32(payload.data() + 5 + size_t(i) * 4);
    if (i > 0 && view.boundaries[i] <= view.boundaries[i - 1]) {
      fail("boundaries not strictly increasing");
    }
  }
  if (view.boundaries.front() != 0) fail("P[0] != 0");
  if (view.boundaries.back() != view.row_count) fail("P[last] != row_count");
  return view;
}

template <typename T, typename DecodePage>
std::vector<T> ColumnFile::read_range(uint64_t begin, uint64_t end,
                                      DecodePage&& decode) const {
  if (begin > end || end > total_rows_) {
    throw DataError(name_ + ": row range [" + std::to_string(begin) + "," +
                    std::to_string(end) + ") out of bounds, total_rows=" +
                    std::to_string(total_rows_));
  }
  std::vector<T> out;
  out.reserve(end - begin);
  if (begin == end) return out;
  uint32_t p0 = page_of_row(begin);
  uint32_t p1 = page_of_row(end - 1);
  for (uint32_t p = p0; p <= p1; ++p) {
    uint64_t ps = page_starts_[p];
    size_t lo = begin > ps ? static_cast<size_t>(begin - ps) : 0;
    size_t hi = static_cast<size_t>(
        std::min<uint64_t>(end - ps, dir_[p].row_count));
    decode(p, lo, hi, out);
  }
  return out;
}

std::vector<int64_t> ColumnFile::read_int64(uint64_t begin,
                                            uint64_t end) const {
  if (type_ != PhysicalType::kInt64) {
    throw DataError(name_ + ": read_int64 on " + physical_type_name(type_));
  }
  return read_range<int64_t>(
      begin, end,
      [&](uint32_t p, size_t lo, size_t hi, std::vector<int64_t>& out) {
        if (codec_ == Codec::kPlain) {
          count_page_read();
          auto payload = page_payload(p);
          if (payload.size() != size_t(dir_[p].row_count) * 8) {
            throw FormatError(name_ + ": corrupt plain int64 page");
          }
          for (size_t r = lo; r < hi; ++r) {
            out.push_back(get_i64(payload.data() + r * 8));
          }
        } else {
          // Decoding always starts at the page head; mid-page entry is a
          // scalar skip.
          DeltaPageView view = delta_page(p);
          std::vector<int64_t> vals = decode_delta_scalar(view, hi);
          out.insert(out.end(), vals.begin() + lo, vals.end());
        }
      });
}

std::vector<double> ColumnFile::read_float64(uint64_t begin,
                                             uint64_t end) const {
  if (type_ != PhysicalType::kFloat64) {
    throw DataError(name_ + ": read_float64 on " + physical_type_name(type_));
  }
  return read_range<double>(
      begin, end,
      [&](uint32_t p, size_t lo, size_t hi, std::vector<double>& out) {
        count_page_read();
        auto payload = page_payload(p);
        if (payload.size() != size_t(dir_[p].row_count) * 8) {
          throw FormatError(name_ + ": corrupt plain float64 page");
        }
        for (size_t r = lo; r < hi; ++r) {
          out.push_back(std::bit_cast<double>(get_u64(payload.data() + r * 8)));
        }
      });
}

std::vector<uint8_t> ColumnFile::read_bool(uint64_t begin, uint64_t end) const {
  if (type_ != PhysicalType::kBool) {
    throw DataError(name_ + ": read_bool on " + physical_type_name(type_));
  }
  return read_range<uint8_t>(
      begin, end,
      [&](uint32_t p, size_t lo, size_t hi, std::vector<uint8_t>& out) {
        if (codec_ == Codec::kPlain) {
          count_page_read();
          auto payload = page_payload(p);
          if (payload.size() != dir_[p].row_count) {
            throw FormatError(name_ + ": corrupt plain bool page");
          }
          for (size_t r = lo; r < hi; ++r) {
            out.push_back(payload[r] ? 1 : 0);
          }
        } else {
          IntervalPageView view = interval_page(p);
          size_t run = 0;
          uint8_t value = view.first_value;
          for (size_t r = lo; r < hi; ++r) {
            while (view.boundaries[run + 1] <= r) {
              ++run;
              value ^= 1;
            }
            // Re-derive parity in case lo skipped whole runs.
            value = static_cast<uint8_t>(view.first_value ^ (run & 1));
            out.push_back(value);
          }
        }
      });
}

std::vector<std::string> ColumnFile::read_string(uint64_t begin,
                                                 uint64_t end) const {
  if (type_ != PhysicalType::kString) {
    throw DataError(name_ + ": read_string on " + physical_type_name(type_));
  }
  return read_range<std::string>(
      begin, end,
      [&](uint32_t p, size_t lo, size_t hi, std::vector<std::string>& out) {
        count_page_read();
        auto payload = page_payload(p);
        size_t at = 0;
        for (size_t r = 0; r < hi; ++r) {
          if (at + 4 > payload.size()) {
            throw FormatError(name_ + ": corrupt string page");
          }
          uint32_t len = get_u32(payload.data() + at);
          at += 4;
          if (at + len > payload.size()) {
            throw FormatError(name_ + ": corrupt string page");
          }
          if (r >= lo) {
            out.emplace_back(reinterpret_cast<const char*>(payload.data() + at),
                             len);
          }
          at += len;
        }
      });
}

}  // namespace gar
