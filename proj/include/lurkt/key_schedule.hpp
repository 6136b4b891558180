// SPDX-License-Identifier: Apache-2.0
//
// TLS 1.3 key schedule: HKDF primitives, the staged secret derivation for
// one handshake, resumption PSKs, binders and Finished MACs.
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "lurkt/bytes.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/error.hpp"

namespace lurkt::ks {

struct CipherSuite {
  std::uint16_t code;
  crypto::HashAlg hash;
  crypto::AeadAlg aead;
  std::size_t key_len;
  std::size_t iv_len;
  std::string_view name;
};

constexpr std::uint16_t kAes128GcmSha256 = 0x1301;
constexpr std::uint16_t kAes256GcmSha384 = 0x1302;
constexpr std::uint16_t kChacha20Poly1305Sha256 = 0x1303;

// nullptr for unsupported code points.
const CipherSuite* find_suite(std::uint16_t code);
const CipherSuite* find_suite(std::string_view name);

SecretBytes hkdf_extract(crypto::HashAlg alg, ByteView salt, ByteView ikm);
// Fails with LengthOverflow above 255 * hash length.
Result<SecretBytes> hkdf_expand(crypto::HashAlg alg, ByteView prk, ByteView info, std::size_t length);
// HkdfLabel construction with the "tls13 " prefix.
Result<SecretBytes> hkdf_expand_label(crypto::HashAlg alg, ByteView secret, std::string_view label,
                                      ByteView context, std::size_t length);
SecretBytes derive_secret_from_hash(crypto::HashAlg alg, ByteView secret, std::string_view label,
                                    ByteView transcript_hash);

struct SharedKeyMaterial {
  SecretBytes ke;
  std::optional<SecretBytes> psk;
};

struct HandshakeSecrets {
  SecretBytes client;
  SecretBytes server;
};

struct ApplicationSecrets {
  SecretBytes client;
  SecretBytes server;
};

struct SecretBundle {
  SecretBytes client_handshake;
  SecretBytes server_handshake;
  SecretBytes client_application;
  SecretBytes server_application;
  std::optional<SecretBytes> resumption;
};

// One handshake's worth of derivations. Each stage runs once, in order.
class KeySchedule {
 public:
  enum class Stage { Fresh, Handshake, Application, Resumption };

  explicit KeySchedule(crypto::HashAlg alg) : alg_(alg) {}

  Result<HandshakeSecrets> derive_handshake_secrets(const SharedKeyMaterial& km, ByteView transcript_ch_sh);
  Result<HandshakeSecrets> derive_handshake_secrets_from_hash(const SharedKeyMaterial& km, ByteView hash_ch_sh);
  Result<ApplicationSecrets> derive_application_secrets(ByteView transcript_ch_server_fin);
  Result<ApplicationSecrets> derive_application_secrets_from_hash(ByteView hash_ch_server_fin);
  Result<SecretBytes> derive_resumption_secret(ByteView transcript_ch_client_fin);
  Result<SecretBytes> derive_resumption_secret_from_hash(ByteView hash_ch_client_fin);

  crypto::HashAlg hash() const { return alg_; }
  Stage stage() const { return stage_; }
  // Exposed for trace conformance checks only.
  ByteView early_secret() const { return early_.view(); }
  ByteView handshake_secret() const { return handshake_.view(); }
  ByteView master_secret() const { return master_.view(); }

 private:
  crypto::HashAlg alg_;
  Stage stage_ = Stage::Fresh;
  SecretBytes early_;
  SecretBytes handshake_;
  SecretBytes master_;
};

SecretBytes early_secret(crypto::HashAlg alg, const std::optional<SecretBytes>& psk);

// PSK = Expand-Label(r, "resumption", nonce, Hash.length).
SecretBytes psk_from_resumption(crypto::HashAlg alg, ByteView resumption_secret, ByteView ticket_nonce);

struct BinderValues {
  SecretBytes binder_key;
  Bytes binder_mac;
};

// Resumption binder ("res binder") over Hash(truncated ClientHello).
BinderValues binder_key_and_mac(crypto::HashAlg alg, ByteView psk, ByteView truncated_client_hello);
Bytes binder_mac_from_key(crypto::HashAlg alg, ByteView binder_key, ByteView truncated_client_hello);

SecretBytes finished_key(crypto::HashAlg alg, ByteView traffic_secret);
Bytes finished_mac(crypto::HashAlg alg, ByteView traffic_secret, ByteView transcript);
Bytes finished_mac_from_hash(crypto::HashAlg alg, ByteView traffic_secret, ByteView transcript_hash);

}  // namespace lurkt::ks
