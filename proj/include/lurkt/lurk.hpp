// SPDX-License-Identifier: Apache-2.0
//
// Engine <-> crypto service request protocol.
//
// Frame: [version:1][type:1][session_id:8][length:4 BE][payload]. Payload
// fields are 2-byte length-prefixed vectors, except transcripts which use a
// 4-byte prefix.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"

namespace lurkt::lurk {

constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderLen = 14;
constexpr std::size_t kMaxFrame = std::size_t{1} << 24;

enum class MsgType : std::uint8_t {
  GetEcdhe = 1,
  GetHandshakeSecrets = 2,
  GetSigAndApp = 3,
  NewTicket = 4,
  EarlySecret = 5,
  GetAppSecret = 6,
  GetResSecret = 7,
  Attest = 8,
  Error = 0xFF,
};

constexpr std::uint8_t kResponseBit = 0x80;

std::string_view msg_type_name(MsgType t);
bool is_request_type(std::uint8_t raw);

struct SessionId {
  std::array<std::uint8_t, 8> bytes{};

  static SessionId random();
  static SessionId from(ByteView v);
  bool is_zero() const;
  std::string hex() const;
  ByteView view() const { return bytes; }
  auto operator<=>(const SessionId&) const = default;
};

struct LurkMessage {
  std::uint8_t version = kVersion;
  std::uint8_t type = 0;  // request type, RESPONSE bit, or 0xFF
  SessionId session_id;
  Bytes payload;

  bool is_response() const { return type != 0xFF && (type & kResponseBit) != 0; }
  bool is_error() const { return type == 0xFF; }
  MsgType request_type() const { return static_cast<MsgType>(type & 0x7F); }
  bool operator==(const LurkMessage&) const = default;
};

Result<Bytes> encode_lurk(const LurkMessage& m);
// Total over arbitrary bytes: Truncated, BadVersion, UnknownType, OversizeBody.
Result<LurkMessage> decode_lurk(ByteView frame);
// Bytes needed to complete the frame starting at `buffer`, 0 when complete.
Result<std::size_t> frame_bytes_missing(ByteView buffer);

LurkMessage make_request(MsgType t, SessionId sid, Bytes payload);
LurkMessage make_response(MsgType t, SessionId sid, Bytes payload);
LurkMessage make_error_message(SessionId sid, const Error& e);
// Wire errors carry the Errc ordinal and a detail string.
Error decode_error_payload(ByteView payload);

// Sequential field access over a payload.
class PayloadWriter {
 public:
  void field(ByteView v);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  Status transcript(ByteView v);
  Bytes take() && { return std::move(w_).take(); }

 private:
  ByteWriter w_;
};

class PayloadReader {
 public:
  explicit PayloadReader(ByteView payload) : r_(payload, kHeaderLen) {}
  Result<ByteView> field();
  Result<ByteView> field(std::size_t exact_len);
  Result<std::uint8_t> u8();
  Result<std::uint16_t> u16();
  Result<ByteView> transcript();
  Status finish() const;

 private:
  ByteReader r_;
};

// Typed payloads. Secrets are carried as SecretBytes so they are wiped on
// drop at both ends.
struct EcdheRequest {
  std::uint8_t row = 0;
  std::uint16_t group = 0;
  Bytes encode() const;
  static Result<EcdheRequest> decode(ByteView p);
};
struct EcdheResponse {
  Bytes key_share;
  Bytes encode() const;
  static Result<EcdheResponse> decode(ByteView p);
};

struct HandshakeSecretsRequest {
  std::uint8_t row = 0;
  std::uint16_t suite = 0;
  SecretBytes n_e;
  Bytes transcript;  // ClientHello..ServerHello
  SecretBytes ke_shared;  // empty when the service holds the ephemeral
  Result<Bytes> encode() const;
  static Result<HandshakeSecretsRequest> decode(ByteView p);
};
struct HandshakeSecretsResponse {
  SecretBytes client_hs;
  SecretBytes server_hs;
  Bytes encode() const;
  static Result<HandshakeSecretsResponse> decode(ByteView p);
};

struct SigAndAppRequest {
  std::uint8_t row = 0;
  std::uint16_t suite = 0;
  std::uint16_t scheme = 0;
  SecretBytes n_e;
  Bytes transcript;  // ClientHello..Certificate
  Result<Bytes> encode() const;
  static Result<SigAndAppRequest> decode(ByteView p);
};
struct SigAndAppResponse {
  Bytes psign;
  Bytes certificate_verify;  // encoded handshake message, empty for keyless
  Bytes server_finished;     // encoded handshake message, empty for keyless
  SecretBytes client_app;
  SecretBytes server_app;
  Bytes encode() const;
  static Result<SigAndAppResponse> decode(ByteView p);
};

struct TicketRequest {
  SecretBytes n_e;
  Bytes transcript;  // ClientHello..client Finished
  Bytes ticket_nonce;
  Result<Bytes> encode() const;
  static Result<TicketRequest> decode(ByteView p);
};
struct TicketResponse {
  Bytes psk_id;
  Bytes encode() const;
  static Result<TicketResponse> decode(ByteView p);
};

struct EarlySecretRequest {
  std::uint8_t row = 0;
  std::uint16_t suite = 0;
  Bytes psk_id;
  Bytes truncated_client_hello;
  Result<Bytes> encode() const;
  static Result<EarlySecretRequest> decode(ByteView p);
};
struct EarlySecretResponse {
  SecretBytes binder_key;
  Bytes binder_mac;
  Bytes encode() const;
  static Result<EarlySecretResponse> decode(ByteView p);
};

struct AppSecretRequest {
  SecretBytes n_e;
  Bytes transcript;  // ClientHello..server Finished
  Result<Bytes> encode() const;
  static Result<AppSecretRequest> decode(ByteView p);
};
struct AppSecretResponse {
  SecretBytes client_app;
  SecretBytes server_app;
  Bytes encode() const;
  static Result<AppSecretResponse> decode(ByteView p);
};

struct Quote {
  Bytes measurement;
  Bytes h_ctx_hash;
  Bytes signature;
  Bytes encode() const;
  static Result<Quote> decode(ByteView p);
  // measurement || h_ctx_hash
  Bytes signed_message() const;
};

}  // namespace lurkt::lurk
