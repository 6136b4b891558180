// SPDX-License-Identifier: Apache-2.0
//
// Thin RAII wrappers over the OpenSSL primitives the protocol needs:
// digests, HMAC, AEAD, (EC)DHE over named groups, EdDSA signatures and
// X.509 handling. Nothing here knows about TLS framing.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace lurkt::crypto {

enum class HashAlg { Sha256, Sha384 };

std::size_t hash_len(HashAlg alg);
Bytes digest(HashAlg alg, ByteView data);
SecretBytes hmac(HashAlg alg, ByteView key, ByteView data);

void random_bytes(std::span<std::uint8_t> out);
Bytes random_bytes(std::size_t n);

enum class AeadAlg { Aes128Gcm, Aes256Gcm, Chacha20Poly1305 };

std::size_t aead_key_len(AeadAlg alg);
constexpr std::size_t kAeadNonceLen = 12;
constexpr std::size_t kAeadTagLen = 16;

// Returns ciphertext || tag.
Result<Bytes> aead_seal(AeadAlg alg, ByteView key, ByteView nonce, ByteView aad, ByteView plaintext);
// Fails with AuthFailure on any tag mismatch.
Result<Bytes> aead_open(AeadAlg alg, ByteView key, ByteView nonce, ByteView aad, ByteView ciphertext);

// TLS NamedGroup code points.
enum class Group : std::uint16_t {
  Secp256r1 = 0x0017,
  X25519 = 0x001d,
  X448 = 0x001e,
};

bool group_supported(std::uint16_t code);
std::size_t group_public_len(Group g);
std::string group_name(Group g);

struct KeyPair {
  Group group;
  SecretBytes priv;  // raw scalar / private key bytes
  Bytes pub;         // wire encoding used in key_share
};

KeyPair generate_keypair(Group g);
// Fails with MissingKeyShare when the peer share is malformed for the group.
Result<SecretBytes> ecdh(const KeyPair& own, ByteView peer_pub);

// TLS SignatureScheme code points (deterministic schemes only).
enum class SigScheme : std::uint16_t {
  Ed25519 = 0x0807,
  Ed448 = 0x0808,
};

std::string scheme_name(SigScheme s);

class PublicKey {
 public:
  PublicKey() = default;
  explicit PublicKey(EVP_PKEY* k);
  static Result<PublicKey> from_raw(SigScheme s, ByteView raw);
  static Result<PublicKey> from_certificate(ByteView der);
  static Result<PublicKey> from_pem(const std::string& pem);

  bool verify(ByteView msg, ByteView sig) const;
  Bytes raw() const;
  std::string to_pem() const;
  bool valid() const { return key_ != nullptr; }
  EVP_PKEY* get() const { return key_.get(); }
  Result<SigScheme> scheme() const;

 private:
  std::shared_ptr<EVP_PKEY> key_;
};

// EdDSA signing key. The private key never leaves this object except via
// to_pem(), which is used only for key provisioning files.
class SigningKey {
 public:
  SigningKey() = default;
  static SigningKey generate(SigScheme s);
  static Result<SigningKey> from_raw(SigScheme s, ByteView raw_private);
  static Result<SigningKey> from_pem(const std::string& pem);

  SigScheme scheme() const { return scheme_; }
  Bytes sign(ByteView msg) const;
  PublicKey public_key() const;
  // Test hook for confinement scanning; never serialized by the service.
  SecretBytes raw_private() const;
  std::string to_pem() const;
  bool valid() const { return key_ != nullptr; }
  EVP_PKEY* get() const { return key_.get(); }

 private:
  SigScheme scheme_ = SigScheme::Ed25519;
  std::shared_ptr<EVP_PKEY> key_;
};

// Self-signed X.509 certificate for `key` with the given common name. DER.
Result<Bytes> self_signed_certificate(const SigningKey& key, const std::string& common_name);
Result<std::vector<Bytes>> certificates_from_pem(const std::string& pem);
std::string certificate_to_pem(ByteView der);
// True iff `cert` is byte-identical to `anchor` or carries a valid
// signature by the anchor's key.
bool certificate_chains_to(ByteView cert, ByteView anchor);

Result<std::string> read_file(const std::string& path);
Status write_file(const std::string& path, ByteView data);

}  // namespace lurkt::crypto
