// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lurkt/error.hpp"

namespace lurkt {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

void secure_wipe(void* p, std::size_t n);
bool ct_equal(ByteView a, ByteView b);

// Owning byte buffer that is wiped on destruction and on every overwrite.
class SecretBytes {
 public:
  SecretBytes() = default;
  explicit SecretBytes(std::size_t n) : data_(n, 0) {}
  explicit SecretBytes(ByteView v) : data_(v.begin(), v.end()) {}
  SecretBytes(const SecretBytes& o) : data_(o.data_) {}
  SecretBytes(SecretBytes&& o) noexcept : data_(std::move(o.data_)) { o.data_.clear(); }
  SecretBytes& operator=(const SecretBytes& o) {
    if (this != &o) {
      wipe();
      data_ = o.data_;
    }
    return *this;
  }
  SecretBytes& operator=(SecretBytes&& o) noexcept {
    if (this != &o) {
      wipe();
      data_ = std::move(o.data_);
      o.data_.clear();
    }
    return *this;
  }
  ~SecretBytes() { wipe(); }

  void wipe() {
    if (!data_.empty()) secure_wipe(data_.data(), data_.size());
    data_.clear();
  }

  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  ByteView view() const { return data_; }
  std::span<std::uint8_t> mut() { return data_; }
  // Explicit copy-out for serialization into protocol payloads.
  Bytes expose() const { return data_; }

  friend bool operator==(const SecretBytes& a, const SecretBytes& b) {
    return ct_equal(a.view(), b.view());
  }

 private:
  Bytes data_;
};

std::string to_hex(ByteView v);
// Accepts whitespace between digits.
Result<Bytes> from_hex(std::string_view hex);
// Test/constant helper; aborts on malformed input.
Bytes hex(std::string_view h);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline void append(Bytes& out, ByteView v) { out.insert(out.end(), v.begin(), v.end()); }

// Locates `needle` inside `haystack`; npos semantics as std::string.
std::size_t find_bytes(ByteView haystack, ByteView needle);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u24(std::uint32_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void raw(ByteView v) { append(buf_, v); }

  // Length-prefixed vectors. Fail with OversizeBody when the content does
  // not fit the prefix width.
  Status vec8(ByteView v);
  Status vec16(ByteView v);
  Status vec24(ByteView v);
  Status vec32(ByteView v);

  // Opens a length prefix of `width` bytes, closed by end_prefix().
  std::size_t begin_prefix(int width);
  Status end_prefix(std::size_t mark, int width);

  const Bytes& bytes() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  Bytes buf_;
};

// Bounds-checked cursor. Every read failure reports Truncated at the
// absolute offset (base + position) where the read was attempted.
class ByteReader {
 public:
  explicit ByteReader(ByteView v, std::size_t base = 0) : v_(v), base_(base) {}

  Result<std::uint8_t> u8();
  Result<std::uint16_t> u16();
  Result<std::uint32_t> u24();
  Result<std::uint32_t> u32();
  Result<std::uint64_t> u64();
  Result<ByteView> raw(std::size_t n);
  Result<ByteView> vec8();
  Result<ByteView> vec16();
  Result<ByteView> vec24();
  Result<ByteView> vec32();

  std::size_t remaining() const { return v_.size() - pos_; }
  bool empty() const { return remaining() == 0; }
  std::size_t pos() const { return pos_; }
  std::size_t offset() const { return base_ + pos_; }
  ByteView rest() const { return v_.subspan(pos_); }

 private:
  Error truncated(std::size_t want) const;

  ByteView v_;
  std::size_t pos_ = 0;
  std::size_t base_;
};

}  // namespace lurkt
