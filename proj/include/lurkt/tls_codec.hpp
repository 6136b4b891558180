// SPDX-License-Identifier: Apache-2.0
//
// Handshake message codec for the TLS 1.3 subset the server and client
// speak, and the append-only transcript of full message bytes.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/error.hpp"

namespace lurkt::tls {

enum class HandshakeType : std::uint8_t {
  ClientHello = 1,
  ServerHello = 2,
  NewSessionTicket = 4,
  EncryptedExtensions = 8,
  Certificate = 11,
  CertificateVerify = 15,
  Finished = 20,
};

std::string_view handshake_type_name(HandshakeType t);

namespace ext {
constexpr std::uint16_t kServerName = 0;
constexpr std::uint16_t kSupportedGroups = 10;
constexpr std::uint16_t kSignatureAlgorithms = 13;
constexpr std::uint16_t kPreSharedKey = 41;
constexpr std::uint16_t kSupportedVersions = 43;
constexpr std::uint16_t kPskKeyExchangeModes = 45;
constexpr std::uint16_t kKeyShare = 51;
}  // namespace ext

constexpr std::uint16_t kTls13 = 0x0304;
constexpr std::uint16_t kLegacyVersion = 0x0303;
constexpr std::uint8_t kPskDheKe = 1;
constexpr std::size_t kMaxHandshakeBody = 0xffffff;

using Random = std::array<std::uint8_t, 32>;

// Extension payloads are kept as raw bytes so re-encoding is byte-exact.
struct Extension {
  std::uint16_t type = 0;
  Bytes data;
  bool operator==(const Extension&) const = default;
};

using Extensions = std::vector<Extension>;

const Extension* find_extension(const Extensions& list, std::uint16_t type);

struct ClientHello {
  std::uint16_t legacy_version = kLegacyVersion;
  Random random{};
  Bytes legacy_session_id;
  std::vector<std::uint16_t> cipher_suites;
  Bytes legacy_compression_methods{0};
  Extensions extensions;
  bool operator==(const ClientHello&) const = default;
};

struct ServerHello {
  std::uint16_t legacy_version = kLegacyVersion;
  Random random{};
  Bytes legacy_session_id_echo;
  std::uint16_t cipher_suite = 0;
  std::uint8_t legacy_compression_method = 0;
  Extensions extensions;
  bool operator==(const ServerHello&) const = default;
};

struct EncryptedExtensions {
  Extensions extensions;
  bool operator==(const EncryptedExtensions&) const = default;
};

struct CertificateEntry {
  Bytes cert_data;
  Bytes extensions;  // raw extension block
  bool operator==(const CertificateEntry&) const = default;
};

struct Certificate {
  Bytes request_context;
  std::vector<CertificateEntry> entries;
  bool operator==(const Certificate&) const = default;
};

struct CertificateVerify {
  std::uint16_t scheme = 0;
  Bytes signature;
  bool operator==(const CertificateVerify&) const = default;
};

struct Finished {
  Bytes verify_data;
  bool operator==(const Finished&) const = default;
};

struct NewSessionTicket {
  std::uint32_t lifetime = 0;
  std::uint32_t age_add = 0;
  Bytes nonce;
  Bytes ticket;
  Extensions extensions;
  bool operator==(const NewSessionTicket&) const = default;
};

using HandshakeBody = std::variant<ClientHello, ServerHello, EncryptedExtensions, Certificate,
                                   CertificateVerify, Finished, NewSessionTicket>;

struct HandshakeMessage {
  HandshakeBody body;

  HandshakeType type() const;
  template <class T>
  const T* as() const {
    return std::get_if<T>(&body);
  }
  bool operator==(const HandshakeMessage&) const = default;
};

// 1-byte type, 3-byte length, body.
Result<Bytes> encode_message(const HandshakeMessage& msg);
// Exactly one message; trailing bytes are MalformedPayload.
Result<HandshakeMessage> decode_message(ByteView bytes);
// Splits concatenated handshake messages without interpreting bodies.
Result<std::vector<ByteView>> split_messages(ByteView bytes);

// Typed views over extension payloads.
struct KeyShareEntry {
  std::uint16_t group = 0;
  Bytes key_exchange;
  bool operator==(const KeyShareEntry&) const = default;
};

struct PskIdentity {
  Bytes identity;
  std::uint32_t obfuscated_ticket_age = 0;
  bool operator==(const PskIdentity&) const = default;
};

struct OfferedPsks {
  std::vector<PskIdentity> identities;
  std::vector<Bytes> binders;
};

Result<std::vector<std::uint16_t>> parse_client_versions(ByteView data);
Result<std::vector<KeyShareEntry>> parse_client_key_shares(ByteView data);
Result<KeyShareEntry> parse_server_key_share(ByteView data);
Result<std::vector<std::uint16_t>> parse_u16_list(ByteView data);
Result<Bytes> parse_psk_modes(ByteView data);
Result<OfferedPsks> parse_offered_psks(ByteView data);
Result<std::string> parse_server_name(ByteView data);

Extension make_client_versions(const std::vector<std::uint16_t>& versions);
Extension make_server_version();
Extension make_client_key_shares(const std::vector<KeyShareEntry>& shares);
Extension make_server_key_share(const KeyShareEntry& share);
Extension make_u16_list(std::uint16_t type, const std::vector<std::uint16_t>& values);
Extension make_psk_modes(ByteView modes);
Extension make_offered_psks(const OfferedPsks& psks);
Extension make_selected_psk(std::uint16_t index);
Extension make_server_name(const std::string& host);

// ClientHello bytes up to, not including, the binders list.
Result<Bytes> truncate_for_binders(ByteView encoded_client_hello);

// 64 spaces, the server context string, a zero byte, then the transcript hash.
Bytes certificate_verify_input(ByteView transcript_hash);

// Append-only record of full handshake message bytes in arrival order.
class HandshakeTranscript {
 public:
  struct Entry {
    HandshakeType type;
    Bytes bytes;
  };

  HandshakeTranscript() = default;
  // Splits and appends every message in `concatenated`.
  static Result<HandshakeTranscript> parse(ByteView concatenated);

  Status append(ByteView encoded_message);
  Status append(const HandshakeMessage& msg);

  // Bytes from the first message through the first `upto`, inclusive.
  Result<Bytes> prefix_bytes(HandshakeType upto) const;
  Result<Bytes> prefix_hash(crypto::HashAlg alg, HandshakeType upto) const;
  Bytes bytes() const;
  Bytes hash(crypto::HashAlg alg) const;

  bool contains(HandshakeType t) const;
  Result<ByteView> message(HandshakeType t) const;
  Result<HandshakeMessage> decoded(HandshakeType t) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

}  // namespace lurkt::tls
