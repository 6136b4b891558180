// SPDX-License-Identifier: Apache-2.0
//
// Independent TLS 1.3 key-schedule oracle built on the OpenSSL TLS13-KDF and
// HKDF providers. Shares no code with lurkt::ks.
#pragma once

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>

#include <optional>
#include <stdexcept>
#include <string>

#include "lurkt/bytes.hpp"
#include "lurkt/crypto.hpp"

namespace oracle {

using lurkt::Bytes;
using lurkt::ByteView;

inline const char* md_name(lurkt::crypto::HashAlg alg) {
  return alg == lurkt::crypto::HashAlg::Sha256 ? "SHA256" : "SHA384";
}

inline std::size_t md_len(lurkt::crypto::HashAlg alg) { return alg == lurkt::crypto::HashAlg::Sha256 ? 32 : 48; }

inline Bytes hash(lurkt::crypto::HashAlg alg, ByteView data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int n = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &n, EVP_get_digestbyname(md_name(alg)), nullptr);
  out.resize(n);
  return out;
}

inline Bytes run_kdf(const char* kdf_name, OSSL_PARAM* params, std::size_t out_len) {
  EVP_KDF* kdf = EVP_KDF_fetch(nullptr, kdf_name, nullptr);
  EVP_KDF_CTX* ctx = EVP_KDF_CTX_new(kdf);
  Bytes out(out_len);
  const int ok = EVP_KDF_derive(ctx, out.data(), out.size(), params);
  EVP_KDF_CTX_free(ctx);
  EVP_KDF_free(kdf);
  if (ok != 1) throw std::runtime_error(std::string(kdf_name) + " derive failed");
  return out;
}

inline Bytes extract(lurkt::crypto::HashAlg alg, ByteView salt, ByteView ikm) {
  int mode = EVP_KDF_HKDF_MODE_EXTRACT_ONLY;
  Bytes zero_salt(md_len(alg), 0);
  if (salt.empty()) salt = zero_salt;
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_int(OSSL_KDF_PARAM_MODE, &mode),
      OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, const_cast<char*>(md_name(alg)), 0),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, const_cast<std::uint8_t*>(ikm.data()), ikm.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_SALT, const_cast<std::uint8_t*>(salt.data()), salt.size()),
      OSSL_PARAM_construct_end()};
  return run_kdf("HKDF", params, md_len(alg));
}

inline Bytes expand_label(lurkt::crypto::HashAlg alg, ByteView secret, const std::string& label, ByteView context,
                          std::size_t len) {
  int mode = EVP_KDF_HKDF_MODE_EXPAND_ONLY;
  static const char prefix[] = "tls13 ";
  std::uint8_t dummy = 0;
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_int(OSSL_KDF_PARAM_MODE, &mode),
      OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, const_cast<char*>(md_name(alg)), 0),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, const_cast<std::uint8_t*>(secret.data()), secret.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_PREFIX, const_cast<char*>(prefix), sizeof(prefix) - 1),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_LABEL, const_cast<char*>(label.data()), label.size()),
      OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_DATA,
                                        context.empty() ? &dummy : const_cast<std::uint8_t*>(context.data()),
                                        context.size()),
      OSSL_PARAM_construct_end()};
  return run_kdf("TLS13-KDF", params, len);
}

inline Bytes derive_secret_hash(lurkt::crypto::HashAlg alg, ByteView secret, const std::string& label,
                                ByteView transcript_hash) {
  return expand_label(alg, secret, label, transcript_hash, md_len(alg));
}

inline Bytes hmac(lurkt::crypto::HashAlg alg, ByteView key, ByteView data) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int n = 0;
  HMAC(EVP_get_digestbyname(md_name(alg)), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
       out.data(), &n);
  out.resize(n);
  return out;
}

struct Schedule {
  Bytes early;
  Bytes handshake;
  Bytes master;
  Bytes client_hs;
  Bytes server_hs;
  Bytes client_app;
  Bytes server_app;
  Bytes resumption;
};

// Full schedule from transcript hashes; empty hashes skip later stages.
inline Schedule schedule(lurkt::crypto::HashAlg alg, ByteView ke, std::optional<Bytes> psk, ByteView th_sh,
                         ByteView th_server_fin = {}, ByteView th_client_fin = {}) {
  Schedule s;
  const Bytes zeros(md_len(alg), 0);
  const Bytes empty_hash = hash(alg, {});
  s.early = extract(alg, {}, psk ? ByteView(*psk) : ByteView(zeros));
  s.handshake = extract(alg, derive_secret_hash(alg, s.early, "derived", empty_hash), ke);
  s.client_hs = derive_secret_hash(alg, s.handshake, "c hs traffic", th_sh);
  s.server_hs = derive_secret_hash(alg, s.handshake, "s hs traffic", th_sh);
  s.master = extract(alg, derive_secret_hash(alg, s.handshake, "derived", empty_hash), zeros);
  if (!th_server_fin.empty()) {
    s.client_app = derive_secret_hash(alg, s.master, "c ap traffic", th_server_fin);
    s.server_app = derive_secret_hash(alg, s.master, "s ap traffic", th_server_fin);
  }
  if (!th_client_fin.empty()) s.resumption = derive_secret_hash(alg, s.master, "res master", th_client_fin);
  return s;
}

inline Bytes finished(lurkt::crypto::HashAlg alg, ByteView traffic_secret, ByteView transcript_hash) {
  return oracle::hmac(alg, oracle::expand_label(alg, traffic_secret, "finished", {}, md_len(alg)), transcript_hash);
}

}  // namespace oracle
