// SPDX-License-Identifier: Apache-2.0
#include "lurkt/bytes.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>

namespace lurkt {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::Truncated: return "Truncated";
    case Errc::UnknownType: return "UnknownType";
    case Errc::MalformedExtension: return "MalformedExtension";
    case Errc::MalformedPayload: return "MalformedPayload";
    case Errc::OversizeBody: return "OversizeBody";
    case Errc::BadVersion: return "BadVersion";
    case Errc::MissingMessage: return "MissingMessage";
    case Errc::LengthOverflow: return "LengthOverflow";
    case Errc::EmptyTranscript: return "EmptyTranscript";
    case Errc::OutOfOrder: return "OutOfOrder";
    case Errc::ReusedSchedule: return "ReusedSchedule";
    case Errc::PskOnlyUnsupported: return "PskOnlyUnsupported";
    case Errc::SeqExhausted: return "SeqExhausted";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::BadContentType: return "BadContentType";
    case Errc::BadLength: return "BadLength";
    case Errc::ChannelAuthFailure: return "ChannelAuthFailure";
    case Errc::SequenceViolation: return "SequenceViolation";
    case Errc::UnsupportedGroup: return "UnsupportedGroup";
    case Errc::UnsupportedScheme: return "UnsupportedScheme";
    case Errc::ConfigViolation: return "ConfigViolation";
    case Errc::FreshnessViolation: return "FreshnessViolation";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::MissingKeyShare: return "MissingKeyShare";
    case Errc::TranscriptMismatch: return "TranscriptMismatch";
    case Errc::BadClientFinished: return "BadClientFinished";
    case Errc::StoreFull: return "StoreFull";
    case Errc::UnknownPskId: return "UnknownPskId";
    case Errc::CacheExpired: return "CacheExpired";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NegotiationFailure: return "NegotiationFailure";
    case Errc::CsUnavailable: return "CsUnavailable";
    case Errc::CsRejected: return "CsRejected";
    case Errc::BadBinder: return "BadBinder";
    case Errc::StateViolation: return "StateViolation";
    case Errc::BadServerSignature: return "BadServerSignature";
    case Errc::BadServerFinished: return "BadServerFinished";
    case Errc::BadCertificate: return "BadCertificate";
    case Errc::ServerRejectedPsk: return "ServerRejectedPsk";
    case Errc::TargetUnavailable: return "TargetUnavailable";
    case Errc::SuiteMismatch: return "SuiteMismatch";
    case Errc::Io: return "Io";
    case Errc::CryptoFailure: return "CryptoFailure";
  }
  return "Unknown";
}

std::string Error::message() const {
  std::string s(errc_name(code));
  if (offset) s += " at offset " + std::to_string(*offset);
  if (!detail.empty()) s += ": " + detail;
  return s;
}

void secure_wipe(void* p, std::size_t n) { OPENSSL_cleanse(p, n); }

bool ct_equal(ByteView a, ByteView b) {
  if (a.size() != b.size()) return false;
  if (a.empty()) return true;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string to_hex(ByteView v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(v.size() * 2);
  for (auto b : v) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Result<Bytes> from_hex(std::string_view hex) {
  Bytes out;
  int hi = -1;
  for (std::size_t i = 0; i < hex.size(); ++i) {
    char c = hex[i];
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == ':') continue;
    int n = nibble(c);
    if (n < 0) return make_error(Errc::MalformedPayload, "bad hex digit", i);
    if (hi < 0) {
      hi = n;
    } else {
      out.push_back(static_cast<std::uint8_t>((hi << 4) | n));
      hi = -1;
    }
  }
  if (hi >= 0) return make_error(Errc::MalformedPayload, "odd hex length");
  return out;
}

Bytes hex(std::string_view h) {
  auto r = from_hex(h);
  if (!r) {
    std::fprintf(stderr, "bad hex constant: %s\n", r.error().message().c_str());
    std::abort();
  }
  return std::move(r).value();
}

std::size_t find_bytes(ByteView haystack, ByteView needle) {
  if (needle.empty() || needle.size() > haystack.size()) return std::string::npos;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end());
  if (it == haystack.end()) return std::string::npos;
  return static_cast<std::size_t>(it - haystack.begin());
}

void ByteWriter::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u24(std::uint32_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v >> 16));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  u16(static_cast<std::uint16_t>(v >> 16));
  u16(static_cast<std::uint16_t>(v));
}

void ByteWriter::u64(std::uint64_t v) {
  u32(static_cast<std::uint32_t>(v >> 32));
  u32(static_cast<std::uint32_t>(v));
}

namespace {
std::uint64_t max_for_width(int width) {
  return width >= 8 ? ~0ULL : ((1ULL << (8 * width)) - 1);
}
}  // namespace

Status ByteWriter::vec8(ByteView v) {
  if (v.size() > 0xff) return make_error(Errc::OversizeBody, "vector exceeds 8-bit length");
  u8(static_cast<std::uint8_t>(v.size()));
  raw(v);
  return {};
}

Status ByteWriter::vec16(ByteView v) {
  if (v.size() > 0xffff) return make_error(Errc::OversizeBody, "vector exceeds 16-bit length");
  u16(static_cast<std::uint16_t>(v.size()));
  raw(v);
  return {};
}

Status ByteWriter::vec24(ByteView v) {
  if (v.size() > 0xffffff) return make_error(Errc::OversizeBody, "vector exceeds 24-bit length");
  u24(static_cast<std::uint32_t>(v.size()));
  raw(v);
  return {};
}

Status ByteWriter::vec32(ByteView v) {
  if (v.size() > 0xffffffffULL) return make_error(Errc::OversizeBody, "vector exceeds 32-bit length");
  u32(static_cast<std::uint32_t>(v.size()));
  raw(v);
  return {};
}

std::size_t ByteWriter::begin_prefix(int width) {
  std::size_t mark = buf_.size();
  buf_.insert(buf_.end(), static_cast<std::size_t>(width), 0);
  return mark;
}

Status ByteWriter::end_prefix(std::size_t mark, int width) {
  std::uint64_t len = buf_.size() - mark - static_cast<std::size_t>(width);
  if (len > max_for_width(width)) return make_error(Errc::OversizeBody, "prefixed body too long");
  for (int i = 0; i < width; ++i) {
    buf_[mark + static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(len >> (8 * (width - 1 - i)));
  }
  return {};
}

Error ByteReader::truncated(std::size_t want) const {
  return make_error(Errc::Truncated,
                    "need " + std::to_string(want) + " bytes, have " + std::to_string(remaining()),
                    offset());
}

Result<ByteView> ByteReader::raw(std::size_t n) {
  if (remaining() < n) return truncated(n);
  auto out = v_.subspan(pos_, n);
  pos_ += n;
  return out;
}

Result<std::uint8_t> ByteReader::u8() {
  LURKT_ASSIGN(auto b, raw(1));
  return b[0];
}

Result<std::uint16_t> ByteReader::u16() {
  LURKT_ASSIGN(auto b, raw(2));
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

Result<std::uint32_t> ByteReader::u24() {
  LURKT_ASSIGN(auto b, raw(3));
  return (std::uint32_t{b[0]} << 16) | (std::uint32_t{b[1]} << 8) | b[2];
}

Result<std::uint32_t> ByteReader::u32() {
  LURKT_ASSIGN(auto b, raw(4));
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

Result<std::uint64_t> ByteReader::u64() {
  LURKT_ASSIGN(auto hi, u32());
  LURKT_ASSIGN(auto lo, u32());
  return (std::uint64_t{hi} << 32) | lo;
}

Result<ByteView> ByteReader::vec8() {
  LURKT_ASSIGN(auto n, u8());
  return raw(n);
}

Result<ByteView> ByteReader::vec16() {
  LURKT_ASSIGN(auto n, u16());
  return raw(n);
}

Result<ByteView> ByteReader::vec24() {
  LURKT_ASSIGN(auto n, u24());
  return raw(n);
}

Result<ByteView> ByteReader::vec32() {
  LURKT_ASSIGN(auto n, u32());
  return raw(n);
}

}  // namespace lurkt
