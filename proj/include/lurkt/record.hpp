// SPDX-License-Identifier: Apache-2.0
//
// TLS 1.3 record layer: traffic keys, AEAD sealing/opening and a
// stream reassembler for TLSCiphertext/TLSPlaintext records.
#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"
#include "lurkt/key_schedule.hpp"

namespace lurkt::record {

enum class ContentType : std::uint8_t {
  ChangeCipherSpec = 20,
  Alert = 21,
  Handshake = 22,
  ApplicationData = 23,
};

constexpr std::size_t kHeaderLen = 5;
constexpr std::size_t kMaxPlaintext = 1 << 14;
constexpr std::size_t kMaxCiphertext = kMaxPlaintext + 256;

struct TrafficKeys {
  const ks::CipherSuite* suite = nullptr;
  SecretBytes key;
  SecretBytes iv;
  std::uint64_t seq = 0;
};

// key/iv via Expand-Label(secret, "key"/"iv"); seq starts at 0.
TrafficKeys derive_traffic_keys(const ks::CipherSuite& suite, ByteView traffic_secret);

// One TLSCiphertext record. Fails with SeqExhausted at 2^64-1.
Result<Bytes> seal(TrafficKeys& tk, ByteView plaintext, ContentType type);

struct Opened {
  Bytes plaintext;
  ContentType type;
};

// seq advances only on success.
Result<Opened> open(TrafficKeys& tk, ByteView record);

// Unprotected record with the given type; fragments above 2^14 bytes.
Bytes plaintext_records(ContentType type, ByteView payload, std::uint16_t legacy_version = 0x0303);
// Protected records, fragmenting above 2^14 bytes.
Result<Bytes> seal_fragmented(TrafficKeys& tk, ByteView plaintext, ContentType type);

struct RawRecord {
  ContentType type;
  Bytes bytes;  // header and fragment
  ByteView fragment() const { return ByteView(bytes).subspan(kHeaderLen); }
};

// Splits a byte stream into whole records.
class RecordReader {
 public:
  void feed(ByteView data) { append(buf_, data); }
  // nullopt when no complete record is buffered.
  Result<std::optional<RawRecord>> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

// Accumulates handshake message bytes that may span records.
class HandshakeReassembler {
 public:
  void feed(ByteView data) { append(buf_, data); }
  // Next complete encoded handshake message, if any.
  Result<std::optional<Bytes>> next();
  bool empty() const { return buf_.empty(); }

 private:
  Bytes buf_;
};

}  // namespace lurkt::record
