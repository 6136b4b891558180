// SPDX-License-Identifier: Apache-2.0
#include "lurkt/record.hpp"

#include <algorithm>
#include <limits>

namespace lurkt::record {

namespace {

Bytes nonce_for(const TrafficKeys& tk) {
  Bytes nonce(tk.iv.view().begin(), tk.iv.view().end());
  for (int i = 0; i < 8; ++i) {
    nonce[nonce.size() - 1 - static_cast<std::size_t>(i)] ^= static_cast<std::uint8_t>(tk.seq >> (8 * i));
  }
  return nonce;
}

Bytes header(ContentType type, std::uint16_t version, std::size_t len) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(type));
  w.u16(version);
  w.u16(static_cast<std::uint16_t>(len));
  return std::move(w).take();
}

}  // namespace

TrafficKeys derive_traffic_keys(const ks::CipherSuite& suite, ByteView traffic_secret) {
  TrafficKeys tk;
  tk.suite = &suite;
  tk.key = std::move(ks::hkdf_expand_label(suite.hash, traffic_secret, "key", {}, suite.key_len)).value();
  tk.iv = std::move(ks::hkdf_expand_label(suite.hash, traffic_secret, "iv", {}, suite.iv_len)).value();
  return tk;
}

Result<Bytes> seal(TrafficKeys& tk, ByteView plaintext, ContentType type) {
  if (tk.seq == std::numeric_limits<std::uint64_t>::max()) {
    return make_error(Errc::SeqExhausted, "record sequence number exhausted");
  }
  if (plaintext.size() > kMaxPlaintext) return make_error(Errc::BadLength, "record plaintext above 2^14");
  Bytes inner(plaintext.begin(), plaintext.end());
  inner.push_back(static_cast<std::uint8_t>(type));
  Bytes hdr = header(ContentType::ApplicationData, 0x0303, inner.size() + crypto::kAeadTagLen);
  auto nonce = nonce_for(tk);
  auto ct = crypto::aead_seal(tk.suite->aead, tk.key.view(), nonce, hdr, inner);
  secure_wipe(inner.data(), inner.size());
  if (!ct) return ct.error();
  ++tk.seq;
  Bytes out = std::move(hdr);
  append(out, *ct);
  return out;
}

Result<Opened> open(TrafficKeys& tk, ByteView rec) {
  if (rec.size() < kHeaderLen) return make_error(Errc::Truncated, "record header", 0);
  if (rec[0] != static_cast<std::uint8_t>(ContentType::ApplicationData)) {
    return make_error(Errc::BadContentType, "protected record must have outer type 23", 0);
  }
  std::size_t len = (std::size_t{rec[3]} << 8) | rec[4];
  if (len + kHeaderLen != rec.size()) return make_error(Errc::BadLength, "record length mismatch", 3);
  if (len > kMaxCiphertext || len < crypto::kAeadTagLen + 1) {
    return make_error(Errc::BadLength, "ciphertext length out of range", 3);
  }
  if (tk.seq == std::numeric_limits<std::uint64_t>::max()) {
    return make_error(Errc::SeqExhausted, "record sequence number exhausted");
  }
  auto nonce = nonce_for(tk);
  LURKT_ASSIGN(auto inner, crypto::aead_open(tk.suite->aead, tk.key.view(), nonce, rec.first(kHeaderLen),
                                             rec.subspan(kHeaderLen)));
  std::size_t end = inner.size();
  while (end > 0 && inner[end - 1] == 0) --end;
  if (end == 0) {
    secure_wipe(inner.data(), inner.size());
    return make_error(Errc::BadContentType, "inner plaintext has no content type");
  }
  auto type = inner[end - 1];
  if (type != static_cast<std::uint8_t>(ContentType::Handshake) &&
      type != static_cast<std::uint8_t>(ContentType::ApplicationData) &&
      type != static_cast<std::uint8_t>(ContentType::Alert)) {
    secure_wipe(inner.data(), inner.size());
    return make_error(Errc::BadContentType, "inner content type " + std::to_string(type));
  }
  ++tk.seq;
  inner.resize(end - 1);
  return Opened{std::move(inner), static_cast<ContentType>(type)};
}

Bytes plaintext_records(ContentType type, ByteView payload, std::uint16_t legacy_version) {
  Bytes out;
  std::size_t off = 0;
  do {
    std::size_t n = std::min(kMaxPlaintext, payload.size() - off);
    append(out, header(type, legacy_version, n));
    append(out, payload.subspan(off, n));
    off += n;
  } while (off < payload.size());
  return out;
}

Result<Bytes> seal_fragmented(TrafficKeys& tk, ByteView plaintext, ContentType type) {
  Bytes out;
  std::size_t off = 0;
  do {
    std::size_t n = std::min(kMaxPlaintext, plaintext.size() - off);
    LURKT_ASSIGN(auto rec, seal(tk, plaintext.subspan(off, n), type));
    append(out, rec);
    off += n;
  } while (off < plaintext.size());
  return out;
}

Result<std::optional<RawRecord>> RecordReader::next() {
  ByteView avail = ByteView(buf_).subspan(pos_);
  if (avail.size() < kHeaderLen) return std::optional<RawRecord>{};
  std::size_t len = (std::size_t{avail[3]} << 8) | avail[4];
  if (len > kMaxCiphertext) return make_error(Errc::BadLength, "record length above limit", pos_ + 3);
  auto type = avail[0];
  if (type < 20 || type > 23) return make_error(Errc::BadContentType, "record type " + std::to_string(type), pos_);
  if (avail.size() < kHeaderLen + len) return std::optional<RawRecord>{};
  RawRecord rec{static_cast<ContentType>(type), Bytes(avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(kHeaderLen + len))};
  pos_ += kHeaderLen + len;
  if (pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  return std::optional<RawRecord>{std::move(rec)};
}

Result<std::optional<Bytes>> HandshakeReassembler::next() {
  if (buf_.size() < 4) return std::optional<Bytes>{};
  std::size_t len = (std::size_t{buf_[1]} << 16) | (std::size_t{buf_[2]} << 8) | buf_[3];
  if (buf_.size() < 4 + len) return std::optional<Bytes>{};
  Bytes msg(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(4 + len));
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(4 + len));
  return std::optional<Bytes>{std::move(msg)};
}

}  // namespace lurkt::record
