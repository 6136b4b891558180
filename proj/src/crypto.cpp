// SPDX-License-Identifier: Apache-2.0
#include "lurkt/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/param_build.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lurkt::crypto {

namespace {

struct CtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
  void operator()(BIO* p) const { BIO_free(p); }
  void operator()(X509* p) const { X509_free(p); }
  void operator()(BIGNUM* p) const { BN_clear_free(p); }
  void operator()(OSSL_PARAM_BLD* p) const { OSSL_PARAM_BLD_free(p); }
  void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};

template <class T>
using Owned = std::unique_ptr<T, CtxDeleter>;

std::shared_ptr<EVP_PKEY> share(EVP_PKEY* k) {
  return std::shared_ptr<EVP_PKEY>(k, EVP_PKEY_free);
}

const EVP_MD* md_for(HashAlg alg) {
  return alg == HashAlg::Sha256 ? EVP_sha256() : EVP_sha384();
}

Error openssl_error(const char* what) {
  unsigned long e = ERR_get_error();
  char buf[256] = {0};
  if (e != 0) ERR_error_string_n(e, buf, sizeof(buf));
  ERR_clear_error();
  return make_error(Errc::CryptoFailure, std::string(what) + (e ? std::string(": ") + buf : ""));
}

const EVP_CIPHER* cipher_for(AeadAlg alg) {
  switch (alg) {
    case AeadAlg::Aes128Gcm: return EVP_aes_128_gcm();
    case AeadAlg::Aes256Gcm: return EVP_aes_256_gcm();
    case AeadAlg::Chacha20Poly1305: return EVP_chacha20_poly1305();
  }
  return nullptr;
}

int raw_type_for_group(Group g) {
  return g == Group::X25519 ? EVP_PKEY_X25519 : EVP_PKEY_X448;
}

int raw_type_for_scheme(SigScheme s) {
  return s == SigScheme::Ed25519 ? EVP_PKEY_ED25519 : EVP_PKEY_ED448;
}

Result<std::shared_ptr<EVP_PKEY>> p256_key(ByteView priv, ByteView pub) {
  Owned<OSSL_PARAM_BLD> bld(OSSL_PARAM_BLD_new());
  Owned<BIGNUM> bn;
  OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
  if (!pub.empty()) {
    OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY, pub.data(), pub.size());
  }
  int selection = EVP_PKEY_PUBLIC_KEY;
  if (!priv.empty()) {
    bn.reset(BN_bin2bn(priv.data(), static_cast<int>(priv.size()), nullptr));
    OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY, bn.get());
    selection = EVP_PKEY_KEYPAIR;
  }
  Owned<OSSL_PARAM> params(OSSL_PARAM_BLD_to_param(bld.get()));
  Owned<EVP_PKEY_CTX> ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* out = nullptr;
  if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
      EVP_PKEY_fromdata(ctx.get(), &out, selection, params.get()) <= 0) {
    return openssl_error("P-256 key import");
  }
  return share(out);
}

}  // namespace

std::size_t hash_len(HashAlg alg) { return alg == HashAlg::Sha256 ? 32 : 48; }

Bytes digest(HashAlg alg, ByteView data) {
  Bytes out(hash_len(alg));
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, md_for(alg), nullptr);
  return out;
}

SecretBytes hmac(HashAlg alg, ByteView key, ByteView data) {
  SecretBytes out(hash_len(alg));
  unsigned int len = 0;
  static const std::uint8_t kEmpty = 0;
  HMAC(md_for(alg), key.empty() ? &kEmpty : key.data(), static_cast<int>(key.size()),
       data.empty() ? &kEmpty : data.data(), data.size(), out.data(), &len);
  return out;
}

void random_bytes(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    std::fprintf(stderr, "RAND_bytes failed\n");
    std::abort();
  }
}

Bytes random_bytes(std::size_t n) {
  Bytes b(n);
  random_bytes(std::span<std::uint8_t>(b));
  return b;
}

std::size_t aead_key_len(AeadAlg alg) { return alg == AeadAlg::Aes128Gcm ? 16 : 32; }

Result<Bytes> aead_seal(AeadAlg alg, ByteView key, ByteView nonce, ByteView aad, ByteView plaintext) {
  if (key.size() != aead_key_len(alg) || nonce.size() != kAeadNonceLen) {
    return make_error(Errc::BadLength, "AEAD key/nonce length");
  }
  Owned<EVP_CIPHER_CTX> ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  Bytes out(plaintext.size() + kAeadTagLen);
  if (EVP_EncryptInit_ex(ctx.get(), cipher_for(alg), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN, static_cast<int>(kAeadNonceLen), nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
    return openssl_error("AEAD init");
  }
  if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    return openssl_error("AEAD aad");
  }
  int total = 0;
  if (!plaintext.empty()) {
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1) {
      return openssl_error("AEAD update");
    }
    total = len;
  }
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) return openssl_error("AEAD final");
  total += len;
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, static_cast<int>(kAeadTagLen), out.data() + total) != 1) {
    return openssl_error("AEAD tag");
  }
  return out;
}

Result<Bytes> aead_open(AeadAlg alg, ByteView key, ByteView nonce, ByteView aad, ByteView ciphertext) {
  if (key.size() != aead_key_len(alg) || nonce.size() != kAeadNonceLen) {
    return make_error(Errc::BadLength, "AEAD key/nonce length");
  }
  if (ciphertext.size() < kAeadTagLen) return make_error(Errc::AuthFailure, "ciphertext shorter than tag");
  std::size_t body = ciphertext.size() - kAeadTagLen;
  Owned<EVP_CIPHER_CTX> ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  Bytes out(body);
  if (EVP_DecryptInit_ex(ctx.get(), cipher_for(alg), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN, static_cast<int>(kAeadNonceLen), nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) != 1) {
    return openssl_error("AEAD init");
  }
  if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    return openssl_error("AEAD aad");
  }
  int total = 0;
  if (body > 0) {
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(body)) != 1) {
      return make_error(Errc::AuthFailure, "AEAD update");
    }
    total = len;
  }
  Bytes tag(ciphertext.begin() + static_cast<std::ptrdiff_t>(body), ciphertext.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, static_cast<int>(kAeadTagLen), tag.data()) != 1) {
    return openssl_error("AEAD set tag");
  }
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) != 1) {
    ERR_clear_error();
    secure_wipe(out.data(), out.size());
    return make_error(Errc::AuthFailure, "AEAD tag mismatch");
  }
  return out;
}

bool group_supported(std::uint16_t code) {
  return code == static_cast<std::uint16_t>(Group::X25519) || code == static_cast<std::uint16_t>(Group::X448) ||
         code == static_cast<std::uint16_t>(Group::Secp256r1);
}

std::size_t group_public_len(Group g) {
  switch (g) {
    case Group::X25519: return 32;
    case Group::X448: return 56;
    case Group::Secp256r1: return 65;
  }
  return 0;
}

std::string group_name(Group g) {
  switch (g) {
    case Group::X25519: return "x25519";
    case Group::X448: return "x448";
    case Group::Secp256r1: return "secp256r1";
  }
  return "unknown";
}

KeyPair generate_keypair(Group g) {
  KeyPair kp{g, {}, {}};
  if (g == Group::Secp256r1) {
    EVP_PKEY* raw = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
    auto key = share(raw);
    BIGNUM* bn = nullptr;
    EVP_PKEY_get_bn_param(raw, OSSL_PKEY_PARAM_PRIV_KEY, &bn);
    Owned<BIGNUM> owned(bn);
    kp.priv = SecretBytes(32);
    BN_bn2binpad(bn, kp.priv.data(), 32);
    std::size_t len = 0;
    EVP_PKEY_get_octet_string_param(raw, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, nullptr, 0, &len);
    kp.pub.resize(len);
    EVP_PKEY_get_octet_string_param(raw, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, kp.pub.data(), len, &len);
    return kp;
  }
  std::size_t n = g == Group::X25519 ? 32 : 56;
  kp.priv = SecretBytes(n);
  random_bytes(kp.priv.mut());
  auto key = share(EVP_PKEY_new_raw_private_key(raw_type_for_group(g), nullptr, kp.priv.data(), n));
  kp.pub.resize(n);
  EVP_PKEY_get_raw_public_key(key.get(), kp.pub.data(), &n);
  return kp;
}

Result<SecretBytes> ecdh(const KeyPair& own, ByteView peer_pub) {
  if (peer_pub.size() != group_public_len(own.group)) {
    return make_error(Errc::MissingKeyShare, "peer key share has wrong length for " + group_name(own.group));
  }
  std::shared_ptr<EVP_PKEY> mine;
  std::shared_ptr<EVP_PKEY> peer;
  if (own.group == Group::Secp256r1) {
    LURKT_ASSIGN(mine, p256_key(own.priv.view(), own.pub));
    auto p = p256_key({}, peer_pub);
    if (!p) return make_error(Errc::MissingKeyShare, "invalid P-256 point");
    peer = std::move(p).value();
  } else {
    int type = raw_type_for_group(own.group);
    mine = share(EVP_PKEY_new_raw_private_key(type, nullptr, own.priv.data(), own.priv.size()));
    peer = share(EVP_PKEY_new_raw_public_key(type, nullptr, peer_pub.data(), peer_pub.size()));
    if (!mine || !peer) return openssl_error("raw key import");
  }
  Owned<EVP_PKEY_CTX> ctx(EVP_PKEY_CTX_new(mine.get(), nullptr));
  std::size_t len = 0;
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 || EVP_PKEY_derive_set_peer_ex(ctx.get(), peer.get(), 1) <= 0 ||
      EVP_PKEY_derive(ctx.get(), nullptr, &len) <= 0) {
    ERR_clear_error();
    return make_error(Errc::MissingKeyShare, "peer key share rejected");
  }
  SecretBytes out(len);
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) {
    ERR_clear_error();
    return make_error(Errc::MissingKeyShare, "shared secret derivation failed");
  }
  return out;
}

std::string scheme_name(SigScheme s) { return s == SigScheme::Ed25519 ? "ed25519" : "ed448"; }

PublicKey::PublicKey(EVP_PKEY* k) : key_(share(k)) {}

Result<PublicKey> PublicKey::from_raw(SigScheme s, ByteView raw) {
  EVP_PKEY* k = EVP_PKEY_new_raw_public_key(raw_type_for_scheme(s), nullptr, raw.data(), raw.size());
  if (!k) return openssl_error("public key import");
  return PublicKey(k);
}

Result<PublicKey> PublicKey::from_certificate(ByteView der) {
  const unsigned char* p = der.data();
  Owned<X509> cert(d2i_X509(nullptr, &p, static_cast<long>(der.size())));
  if (!cert) {
    ERR_clear_error();
    return make_error(Errc::BadCertificate, "certificate does not parse");
  }
  EVP_PKEY* k = X509_get_pubkey(cert.get());
  if (!k) return make_error(Errc::BadCertificate, "certificate has no public key");
  return PublicKey(k);
}

Result<PublicKey> PublicKey::from_pem(const std::string& pem) {
  Owned<BIO> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!k) return openssl_error("PEM public key");
  return PublicKey(k);
}

Result<SigScheme> PublicKey::scheme() const {
  if (!key_) return make_error(Errc::UnsupportedScheme, "empty key");
  switch (EVP_PKEY_get_base_id(key_.get())) {
    case EVP_PKEY_ED25519: return SigScheme::Ed25519;
    case EVP_PKEY_ED448: return SigScheme::Ed448;
    default: return make_error(Errc::UnsupportedScheme, "certificate key is not EdDSA");
  }
}

bool PublicKey::verify(ByteView msg, ByteView sig) const {
  if (!key_) return false;
  Owned<EVP_MD_CTX> ctx(EVP_MD_CTX_new());
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()) != 1) {
    ERR_clear_error();
    return false;
  }
  int rc = EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), msg.data(), msg.size());
  ERR_clear_error();
  return rc == 1;
}

Bytes PublicKey::raw() const {
  std::size_t len = 0;
  EVP_PKEY_get_raw_public_key(key_.get(), nullptr, &len);
  Bytes out(len);
  EVP_PKEY_get_raw_public_key(key_.get(), out.data(), &len);
  return out;
}

std::string PublicKey::to_pem() const {
  Owned<BIO> bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_PUBKEY(bio.get(), key_.get());
  char* data = nullptr;
  long n = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(n));
}

SigningKey SigningKey::generate(SigScheme s) {
  SecretBytes raw(s == SigScheme::Ed25519 ? 32 : 57);
  random_bytes(raw.mut());
  return std::move(from_raw(s, raw.view())).value();
}

Result<SigningKey> SigningKey::from_raw(SigScheme s, ByteView raw_private) {
  EVP_PKEY* k = EVP_PKEY_new_raw_private_key(raw_type_for_scheme(s), nullptr, raw_private.data(), raw_private.size());
  if (!k) return openssl_error("private key import");
  SigningKey out;
  out.scheme_ = s;
  out.key_ = share(k);
  return out;
}

Result<SigningKey> SigningKey::from_pem(const std::string& pem) {
  Owned<BIO> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (!k) return openssl_error("PEM private key");
  SigningKey out;
  out.key_ = share(k);
  switch (EVP_PKEY_get_base_id(k)) {
    case EVP_PKEY_ED25519: out.scheme_ = SigScheme::Ed25519; break;
    case EVP_PKEY_ED448: out.scheme_ = SigScheme::Ed448; break;
    default: return make_error(Errc::UnsupportedScheme, "only Ed25519/Ed448 keys are supported");
  }
  return out;
}

Bytes SigningKey::sign(ByteView msg) const {
  Owned<EVP_MD_CTX> ctx(EVP_MD_CTX_new());
  EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key_.get());
  std::size_t len = 0;
  EVP_DigestSign(ctx.get(), nullptr, &len, msg.data(), msg.size());
  Bytes sig(len);
  EVP_DigestSign(ctx.get(), sig.data(), &len, msg.data(), msg.size());
  sig.resize(len);
  return sig;
}

SecretBytes SigningKey::raw_private() const {
  std::size_t len = 0;
  EVP_PKEY_get_raw_private_key(key_.get(), nullptr, &len);
  SecretBytes raw(len);
  EVP_PKEY_get_raw_private_key(key_.get(), raw.data(), &len);
  return raw;
}

PublicKey SigningKey::public_key() const {
  std::size_t len = 0;
  EVP_PKEY_get_raw_public_key(key_.get(), nullptr, &len);
  Bytes raw(len);
  EVP_PKEY_get_raw_public_key(key_.get(), raw.data(), &len);
  return std::move(PublicKey::from_raw(scheme_, raw)).value();
}

std::string SigningKey::to_pem() const {
  Owned<BIO> bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_PrivateKey(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr, nullptr);
  char* data = nullptr;
  long n = BIO_get_mem_data(bio.get(), &data);
  std::string out(data, static_cast<std::size_t>(n));
  return out;
}

Result<Bytes> self_signed_certificate(const SigningKey& key, const std::string& common_name) {
  Owned<X509> cert(X509_new());
  X509_set_version(cert.get(), 2);
  ASN1_INTEGER_set(X509_get_serialNumber(cert.get()), 1);
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), 0);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 60L * 60 * 24 * 365 * 5);
  X509_set_pubkey(cert.get(), key.get());
  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>(common_name.c_str()), -1, -1, 0);
  X509_set_issuer_name(cert.get(), name);
  if (X509_sign(cert.get(), key.get(), nullptr) <= 0) return openssl_error("certificate signing");
  int len = i2d_X509(cert.get(), nullptr);
  Bytes der(static_cast<std::size_t>(len));
  unsigned char* p = der.data();
  i2d_X509(cert.get(), &p);
  return der;
}

Result<std::vector<Bytes>> certificates_from_pem(const std::string& pem) {
  Owned<BIO> bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  std::vector<Bytes> out;
  while (true) {
    X509* raw = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr);
    if (!raw) break;
    Owned<X509> cert(raw);
    int len = i2d_X509(cert.get(), nullptr);
    Bytes der(static_cast<std::size_t>(len));
    unsigned char* p = der.data();
    i2d_X509(cert.get(), &p);
    out.push_back(std::move(der));
  }
  ERR_clear_error();
  if (out.empty()) return make_error(Errc::BadCertificate, "no certificate in PEM input");
  return out;
}

std::string certificate_to_pem(ByteView der) {
  const unsigned char* p = der.data();
  Owned<X509> cert(d2i_X509(nullptr, &p, static_cast<long>(der.size())));
  if (!cert) return {};
  Owned<BIO> bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_X509(bio.get(), cert.get());
  char* data = nullptr;
  long n = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(n));
}

bool certificate_chains_to(ByteView cert, ByteView anchor) {
  if (ct_equal(cert, anchor)) return true;
  const unsigned char* p = cert.data();
  Owned<X509> leaf(d2i_X509(nullptr, &p, static_cast<long>(cert.size())));
  auto anchor_key = PublicKey::from_certificate(anchor);
  if (!leaf || !anchor_key) {
    ERR_clear_error();
    return false;
  }
  int rc = X509_verify(leaf.get(), anchor_key->get());
  ERR_clear_error();
  return rc == 1;
}

Result<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Status write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return make_error(Errc::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  return {};
}

}  // namespace lurkt::crypto
