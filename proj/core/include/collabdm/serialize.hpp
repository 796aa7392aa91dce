#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "collabdm/errors.hpp"
#include "collabdm/tensor.hpp"

namespace collabdm {

/// Little-endian byte sink used by all on-disk and wire formats.
class ByteWriter {
public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { put_le(v); }
  void u32(uint32_t v) { put_le(v); }
  void u64(uint64_t v) { put_le(v); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(bits);
  }
  void magic(const char m[4]) {
    buf_.insert(buf_.end(), m, m + 4);
  }
  void raw(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }

  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

private:
  template <typename T>
  void put_le(T v) {
    for (size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
  }
  std::vector<uint8_t> buf_;
};

/// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
public:
  ByteReader(const uint8_t* data, size_t size, std::string context)
      : p_(data), end_(data + size), ctx_(std::move(context)) {}
  explicit ByteReader(const std::vector<uint8_t>& buf,
                      std::string context = "buffer")
      : ByteReader(buf.data(), buf.size(), std::move(context)) {}

  uint8_t u8() { return take_le<uint8_t>(); }
  uint16_t u16() { return take_le<uint16_t>(); }
  uint32_t u32() { return take_le<uint32_t>(); }
  uint64_t u64() { return take_le<uint64_t>(); }
  float f32() {
    const uint32_t bits = take_le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void expect_magic(const char m[4], const char* what) {
    need(4, what);
    if (std::memcmp(p_, m, 4) != 0) {
      throw FormatError(ctx_ + ": bad magic for " + what + ", expected '" +
                        std::string(m, 4) + "'");
    }
    p_ += 4;
  }
  void raw(uint8_t* out, size_t n) {
    need(n, "raw bytes");
    std::memcpy(out, p_, n);
    p_ += n;
  }
  size_t remaining() const { return static_cast<size_t>(end_ - p_); }
  void expect_end(const char* what) {
    if (p_ != end_) {
      throw FormatError(ctx_ + ": " + std::to_string(remaining()) +
                        " trailing bytes after " + what);
    }
  }

private:
  template <typename T>
  T take_le() {
    need(sizeof(T), "integer");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(p_[i]) << (8 * i);
    }
    p_ += sizeof(T);
    return v;
  }
  void need(size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(ctx_ + ": truncated while reading " +
                        std::string(what) + " (" + std::to_string(n) +
                        " bytes needed, " + std::to_string(remaining()) +
                        " left)");
    }
  }
  const uint8_t* p_;
  const uint8_t* end_;
  std::string ctx_;
};

// Raw tensor record ("CDT1"): dtype u8 (0 = f32, 1 = u8 pixels), rank u8,
// dims u32 each, payload. u8 pixels are scaled by 1/255 on load. The same
// record is embedded inside synthetic-set files and payload messages.
void encode_tensor(ByteWriter& w, const Tensor& t);
Tensor decode_tensor(ByteReader& r);

void write_tensor_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor_file(const std::filesystem::path& path);

// Label file ("CDL1"): count u32, labels u16 each.
void write_label_file(const std::filesystem::path& path,
                      const std::vector<int>& labels);
std::vector<int> read_label_file(const std::filesystem::path& path);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<uint8_t>& bytes);

} // namespace collabdm
