// SPDX-License-Identifier: Apache-2.0
#include "lurkt/key_schedule.hpp"

#include <algorithm>
#include <array>

namespace lurkt::ks {

using crypto::HashAlg;

namespace {

constexpr std::array<CipherSuite, 3> kSuites = {{
    {kAes128GcmSha256, HashAlg::Sha256, crypto::AeadAlg::Aes128Gcm, 16, 12, "TLS_AES_128_GCM_SHA256"},
    {kAes256GcmSha384, HashAlg::Sha384, crypto::AeadAlg::Aes256Gcm, 32, 12, "TLS_AES_256_GCM_SHA384"},
    {kChacha20Poly1305Sha256, HashAlg::Sha256, crypto::AeadAlg::Chacha20Poly1305, 32, 12,
     "TLS_CHACHA20_POLY1305_SHA256"},
}};

Bytes empty_hash(HashAlg alg) { return crypto::digest(alg, {}); }

SecretBytes derived_salt(HashAlg alg, ByteView secret) {
  return derive_secret_from_hash(alg, secret, "derived", empty_hash(alg));
}

}  // namespace

const CipherSuite* find_suite(std::uint16_t code) {
  for (const auto& s : kSuites) {
    if (s.code == code) return &s;
  }
  return nullptr;
}

const CipherSuite* find_suite(std::string_view name) {
  for (const auto& s : kSuites) {
    if (s.name == name) return &s;
  }
  if (name == "aes128gcm") return &kSuites[0];
  if (name == "aes256gcm") return &kSuites[1];
  if (name == "chacha20") return &kSuites[2];
  return nullptr;
}

SecretBytes hkdf_extract(HashAlg alg, ByteView salt, ByteView ikm) {
  Bytes zeros;
  if (salt.empty()) {
    zeros.assign(crypto::hash_len(alg), 0);
    salt = zeros;
  }
  return crypto::hmac(alg, salt, ikm);
}

Result<SecretBytes> hkdf_expand(HashAlg alg, ByteView prk, ByteView info, std::size_t length) {
  const std::size_t hl = crypto::hash_len(alg);
  if (length > 255 * hl) return make_error(Errc::LengthOverflow, "expand length exceeds 255 * hash length");
  SecretBytes out(length);
  Bytes block;
  std::size_t filled = 0;
  for (std::uint8_t counter = 1; filled < length; ++counter) {
    Bytes input = block;
    append(input, info);
    input.push_back(counter);
    auto t = crypto::hmac(alg, prk, input);
    secure_wipe(input.data(), input.size());
    block.assign(t.view().begin(), t.view().end());
    std::size_t take = std::min(hl, length - filled);
    std::copy_n(block.begin(), take, out.data() + filled);
    filled += take;
  }
  secure_wipe(block.data(), block.size());
  return out;
}

Result<SecretBytes> hkdf_expand_label(HashAlg alg, ByteView secret, std::string_view label, ByteView context,
                                      std::size_t length) {
  if (length > 0xffff) return make_error(Errc::LengthOverflow, "label length field is 16 bits");
  std::string full_label = "tls13 ";
  full_label += label;
  if (full_label.size() > 255 || context.size() > 255) {
    return make_error(Errc::LengthOverflow, "label or context too long");
  }
  ByteWriter info;
  info.u16(static_cast<std::uint16_t>(length));
  (void)info.vec8(as_bytes(full_label));
  (void)info.vec8(context);
  return hkdf_expand(alg, secret, info.bytes(), length);
}

SecretBytes derive_secret_from_hash(HashAlg alg, ByteView secret, std::string_view label, ByteView transcript_hash) {
  return std::move(hkdf_expand_label(alg, secret, label, transcript_hash, crypto::hash_len(alg))).value();
}

SecretBytes early_secret(HashAlg alg, const std::optional<SecretBytes>& psk) {
  Bytes zeros(crypto::hash_len(alg), 0);
  return hkdf_extract(alg, zeros, psk ? psk->view() : ByteView(zeros));
}

Result<HandshakeSecrets> KeySchedule::derive_handshake_secrets(const SharedKeyMaterial& km, ByteView transcript_ch_sh) {
  if (transcript_ch_sh.empty()) return make_error(Errc::EmptyTranscript, "CH..SH transcript is empty");
  return derive_handshake_secrets_from_hash(km, crypto::digest(alg_, transcript_ch_sh));
}

Result<HandshakeSecrets> KeySchedule::derive_handshake_secrets_from_hash(const SharedKeyMaterial& km,
                                                                         ByteView hash_ch_sh) {
  if (stage_ != Stage::Fresh) return make_error(Errc::ReusedSchedule, "handshake secrets already derived");
  if (km.ke.empty()) {
    if (km.psk) return make_error(Errc::PskOnlyUnsupported, "PSK without (EC)DHE is not supported");
    return make_error(Errc::MissingKeyShare, "no shared key material");
  }
  if (hash_ch_sh.size() != crypto::hash_len(alg_)) return make_error(Errc::EmptyTranscript, "bad transcript hash");
  early_ = ks::early_secret(alg_, km.psk);
  auto salt = derived_salt(alg_, early_.view());
  handshake_ = hkdf_extract(alg_, salt.view(), km.ke.view());
  HandshakeSecrets out{derive_secret_from_hash(alg_, handshake_.view(), "c hs traffic", hash_ch_sh),
                       derive_secret_from_hash(alg_, handshake_.view(), "s hs traffic", hash_ch_sh)};
  stage_ = Stage::Handshake;
  return out;
}

Result<ApplicationSecrets> KeySchedule::derive_application_secrets(ByteView transcript_ch_server_fin) {
  if (stage_ != Stage::Handshake) {
    return make_error(stage_ == Stage::Fresh ? Errc::OutOfOrder : Errc::ReusedSchedule, "application stage");
  }
  if (transcript_ch_server_fin.empty()) return make_error(Errc::EmptyTranscript, "CH..SF transcript is empty");
  return derive_application_secrets_from_hash(crypto::digest(alg_, transcript_ch_server_fin));
}

Result<ApplicationSecrets> KeySchedule::derive_application_secrets_from_hash(ByteView hash_ch_server_fin) {
  if (stage_ != Stage::Handshake) {
    return make_error(stage_ == Stage::Fresh ? Errc::OutOfOrder : Errc::ReusedSchedule, "application stage");
  }
  auto salt = derived_salt(alg_, handshake_.view());
  Bytes zeros(crypto::hash_len(alg_), 0);
  master_ = hkdf_extract(alg_, salt.view(), zeros);
  ApplicationSecrets out{derive_secret_from_hash(alg_, master_.view(), "c ap traffic", hash_ch_server_fin),
                         derive_secret_from_hash(alg_, master_.view(), "s ap traffic", hash_ch_server_fin)};
  handshake_.wipe();
  early_.wipe();
  stage_ = Stage::Application;
  return out;
}

Result<SecretBytes> KeySchedule::derive_resumption_secret(ByteView transcript_ch_client_fin) {
  if (stage_ != Stage::Application) {
    return make_error(stage_ == Stage::Resumption ? Errc::ReusedSchedule : Errc::OutOfOrder, "resumption stage");
  }
  if (transcript_ch_client_fin.empty()) return make_error(Errc::EmptyTranscript, "CH..CF transcript is empty");
  return derive_resumption_secret_from_hash(crypto::digest(alg_, transcript_ch_client_fin));
}

Result<SecretBytes> KeySchedule::derive_resumption_secret_from_hash(ByteView hash_ch_client_fin) {
  if (stage_ != Stage::Application) {
    return make_error(stage_ == Stage::Resumption ? Errc::ReusedSchedule : Errc::OutOfOrder, "resumption stage");
  }
  auto r = derive_secret_from_hash(alg_, master_.view(), "res master", hash_ch_client_fin);
  master_.wipe();
  stage_ = Stage::Resumption;
  return r;
}

SecretBytes psk_from_resumption(HashAlg alg, ByteView resumption_secret, ByteView ticket_nonce) {
  return std::move(hkdf_expand_label(alg, resumption_secret, "resumption", ticket_nonce, crypto::hash_len(alg)))
      .value();
}

BinderValues binder_key_and_mac(HashAlg alg, ByteView psk, ByteView truncated_client_hello) {
  auto early = early_secret(alg, SecretBytes(psk));
  auto key = derive_secret_from_hash(alg, early.view(), "res binder", empty_hash(alg));
  auto mac = binder_mac_from_key(alg, key.view(), truncated_client_hello);
  return BinderValues{std::move(key), std::move(mac)};
}

Bytes binder_mac_from_key(HashAlg alg, ByteView binder_key, ByteView truncated_client_hello) {
  return finished_mac(alg, binder_key, truncated_client_hello);
}

SecretBytes finished_key(HashAlg alg, ByteView traffic_secret) {
  return std::move(hkdf_expand_label(alg, traffic_secret, "finished", {}, crypto::hash_len(alg))).value();
}

Bytes finished_mac(HashAlg alg, ByteView traffic_secret, ByteView transcript) {
  return finished_mac_from_hash(alg, traffic_secret, crypto::digest(alg, transcript));
}

Bytes finished_mac_from_hash(HashAlg alg, ByteView traffic_secret, ByteView transcript_hash) {
  auto key = finished_key(alg, traffic_secret);
  return crypto::hmac(alg, key.view(), transcript_hash).expose();
}

}  // namespace lurkt::ks
