// SPDX-License-Identifier: Apache-2.0
#include "lurkt/lurk.hpp"

#include "lurkt/crypto.hpp"

namespace lurkt::lurk {

std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::GetEcdhe: return "GET_ECDHE";
    case MsgType::GetHandshakeSecrets: return "GET_HANDSHAKE_SECRETS";
    case MsgType::GetSigAndApp: return "GET_SIG_AND_APP";
    case MsgType::NewTicket: return "NEW_TICKET";
    case MsgType::EarlySecret: return "EARLY_SECRET";
    case MsgType::GetAppSecret: return "GET_APP_SECRET";
    case MsgType::GetResSecret: return "GET_RES_SECRET";
    case MsgType::Attest: return "ATTEST";
    case MsgType::Error: return "ERROR";
  }
  return "UNKNOWN";
}

bool is_request_type(std::uint8_t raw) { return raw >= 1 && raw <= 8; }

namespace {
bool valid_type(std::uint8_t raw) {
  return is_request_type(raw) || raw == 0xFF || ((raw & kResponseBit) != 0 && is_request_type(raw & 0x7F));
}
}  // namespace

SessionId SessionId::random() {
  SessionId s;
  do {
    crypto::random_bytes(std::span<std::uint8_t>(s.bytes));
  } while (s.is_zero());
  return s;
}

SessionId SessionId::from(ByteView v) {
  SessionId s;
  std::copy_n(v.begin(), std::min(v.size(), s.bytes.size()), s.bytes.begin());
  return s;
}

bool SessionId::is_zero() const {
  for (auto b : bytes) {
    if (b != 0) return false;
  }
  return true;
}

std::string SessionId::hex() const { return to_hex(bytes); }

Result<Bytes> encode_lurk(const LurkMessage& m) {
  if (kHeaderLen + m.payload.size() > kMaxFrame) return make_error(Errc::OversizeBody, "LURK frame above 2^24");
  ByteWriter w;
  w.u8(m.version);
  w.u8(m.type);
  w.raw(m.session_id.bytes);
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.raw(m.payload);
  return std::move(w).take();
}

Result<LurkMessage> decode_lurk(ByteView frame) {
  ByteReader r(frame);
  LurkMessage m;
  LURKT_ASSIGN(m.version, r.u8());
  if (m.version != kVersion) return make_error(Errc::BadVersion, "LURK version " + std::to_string(m.version), 0);
  LURKT_ASSIGN(m.type, r.u8());
  if (!valid_type(m.type)) return make_error(Errc::UnknownType, "LURK type " + std::to_string(m.type), 1);
  LURKT_ASSIGN(auto sid, r.raw(8));
  m.session_id = SessionId::from(sid);
  LURKT_ASSIGN(auto len, r.u32());
  if (kHeaderLen + std::size_t{len} > kMaxFrame) return make_error(Errc::OversizeBody, "LURK frame above 2^24", 10);
  LURKT_ASSIGN(auto payload, r.raw(len));
  if (!r.empty()) return make_error(Errc::MalformedPayload, "bytes after LURK frame", r.offset());
  m.payload.assign(payload.begin(), payload.end());
  return m;
}

Result<std::size_t> frame_bytes_missing(ByteView buffer) {
  if (buffer.size() < kHeaderLen) return kHeaderLen - buffer.size();
  std::size_t len = (std::size_t{buffer[10]} << 24) | (std::size_t{buffer[11]} << 16) |
                    (std::size_t{buffer[12]} << 8) | buffer[13];
  if (kHeaderLen + len > kMaxFrame) return make_error(Errc::OversizeBody, "LURK frame above 2^24", 10);
  std::size_t total = kHeaderLen + len;
  return buffer.size() >= total ? 0 : total - buffer.size();
}

LurkMessage make_request(MsgType t, SessionId sid, Bytes payload) {
  return LurkMessage{kVersion, static_cast<std::uint8_t>(t), sid, std::move(payload)};
}

LurkMessage make_response(MsgType t, SessionId sid, Bytes payload) {
  return LurkMessage{kVersion, static_cast<std::uint8_t>(kResponseBit | static_cast<std::uint8_t>(t)), sid,
                     std::move(payload)};
}

LurkMessage make_error_message(SessionId sid, const Error& e) {
  PayloadWriter w;
  w.u16(static_cast<std::uint16_t>(e.code));
  w.field(as_bytes(e.detail.substr(0, 1024)));
  return LurkMessage{kVersion, 0xFF, sid, std::move(w).take()};
}

Error decode_error_payload(ByteView payload) {
  PayloadReader r(payload);
  auto code = r.u16();
  auto detail = r.field();
  if (!code || !detail || static_cast<Errc>(*code) > Errc::CryptoFailure) {
    return make_error(Errc::CsRejected, "malformed error payload");
  }
  return make_error(static_cast<Errc>(*code), std::string(detail->begin(), detail->end()));
}

void PayloadWriter::field(ByteView v) { (void)w_.vec16(v); }

void PayloadWriter::u8(std::uint8_t v) {
  std::uint8_t b[1] = {v};
  field(b);
}

void PayloadWriter::u16(std::uint16_t v) {
  std::uint8_t b[2] = {static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  field(b);
}

Status PayloadWriter::transcript(ByteView v) { return w_.vec32(v); }

Result<ByteView> PayloadReader::field() {
  auto r = r_.vec16();
  if (!r) return make_error(Errc::MalformedPayload, r.error().detail, r.error().offset);
  return r;
}

Result<ByteView> PayloadReader::field(std::size_t exact_len) {
  std::size_t at = r_.offset();
  LURKT_ASSIGN(auto v, field());
  if (v.size() != exact_len) {
    return make_error(Errc::MalformedPayload, "field must be " + std::to_string(exact_len) + " bytes", at);
  }
  return v;
}

Result<std::uint8_t> PayloadReader::u8() {
  LURKT_ASSIGN(auto v, field(1));
  return v[0];
}

Result<std::uint16_t> PayloadReader::u16() {
  LURKT_ASSIGN(auto v, field(2));
  return static_cast<std::uint16_t>((v[0] << 8) | v[1]);
}

Result<ByteView> PayloadReader::transcript() {
  auto r = r_.vec32();
  if (!r) return make_error(Errc::MalformedPayload, r.error().detail, r.error().offset);
  return r;
}

Status PayloadReader::finish() const {
  if (!r_.empty()) return make_error(Errc::MalformedPayload, "trailing payload bytes", r_.offset());
  return {};
}

namespace {
Bytes copy(ByteView v) { return Bytes(v.begin(), v.end()); }
}  // namespace

Bytes EcdheRequest::encode() const {
  PayloadWriter w;
  w.u8(row);
  w.u16(group);
  return std::move(w).take();
}

Result<EcdheRequest> EcdheRequest::decode(ByteView p) {
  PayloadReader r(p);
  EcdheRequest out;
  LURKT_ASSIGN(out.row, r.u8());
  LURKT_ASSIGN(out.group, r.u16());
  LURKT_TRY(r.finish());
  return out;
}

Bytes EcdheResponse::encode() const {
  PayloadWriter w;
  w.field(key_share);
  return std::move(w).take();
}

Result<EcdheResponse> EcdheResponse::decode(ByteView p) {
  PayloadReader r(p);
  EcdheResponse out;
  LURKT_ASSIGN(auto ks, r.field());
  out.key_share = copy(ks);
  LURKT_TRY(r.finish());
  return out;
}

Result<Bytes> HandshakeSecretsRequest::encode() const {
  PayloadWriter w;
  w.u8(row);
  w.u16(suite);
  w.field(n_e.view());
  LURKT_TRY(w.transcript(transcript));
  w.field(ke_shared.view());
  return std::move(w).take();
}

Result<HandshakeSecretsRequest> HandshakeSecretsRequest::decode(ByteView p) {
  PayloadReader r(p);
  HandshakeSecretsRequest out;
  LURKT_ASSIGN(out.row, r.u8());
  LURKT_ASSIGN(out.suite, r.u16());
  LURKT_ASSIGN(auto ne, r.field());
  out.n_e = SecretBytes(ne);
  LURKT_ASSIGN(auto t, r.transcript());
  out.transcript = copy(t);
  LURKT_ASSIGN(auto ke, r.field());
  out.ke_shared = SecretBytes(ke);
  LURKT_TRY(r.finish());
  return out;
}

Bytes HandshakeSecretsResponse::encode() const {
  PayloadWriter w;
  w.field(client_hs.view());
  w.field(server_hs.view());
  return std::move(w).take();
}

Result<HandshakeSecretsResponse> HandshakeSecretsResponse::decode(ByteView p) {
  PayloadReader r(p);
  HandshakeSecretsResponse out;
  LURKT_ASSIGN(auto c, r.field());
  out.client_hs = SecretBytes(c);
  LURKT_ASSIGN(auto s, r.field());
  out.server_hs = SecretBytes(s);
  LURKT_TRY(r.finish());
  return out;
}

Result<Bytes> SigAndAppRequest::encode() const {
  PayloadWriter w;
  w.u8(row);
  w.u16(suite);
  w.u16(scheme);
  w.field(n_e.view());
  LURKT_TRY(w.transcript(transcript));
  return std::move(w).take();
}

Result<SigAndAppRequest> SigAndAppRequest::decode(ByteView p) {
  PayloadReader r(p);
  SigAndAppRequest out;
  LURKT_ASSIGN(out.row, r.u8());
  LURKT_ASSIGN(out.suite, r.u16());
  LURKT_ASSIGN(out.scheme, r.u16());
  LURKT_ASSIGN(auto ne, r.field());
  out.n_e = SecretBytes(ne);
  LURKT_ASSIGN(auto t, r.transcript());
  out.transcript = copy(t);
  LURKT_TRY(r.finish());
  return out;
}

Bytes SigAndAppResponse::encode() const {
  PayloadWriter w;
  w.field(psign);
  w.field(certificate_verify);
  w.field(server_finished);
  w.field(client_app.view());
  w.field(server_app.view());
  return std::move(w).take();
}

Result<SigAndAppResponse> SigAndAppResponse::decode(ByteView p) {
  PayloadReader r(p);
  SigAndAppResponse out;
  LURKT_ASSIGN(auto sig, r.field());
  out.psign = copy(sig);
  LURKT_ASSIGN(auto cv, r.field());
  out.certificate_verify = copy(cv);
  LURKT_ASSIGN(auto fin, r.field());
  out.server_finished = copy(fin);
  LURKT_ASSIGN(auto ac, r.field());
  out.client_app = SecretBytes(ac);
  LURKT_ASSIGN(auto as, r.field());
  out.server_app = SecretBytes(as);
  LURKT_TRY(r.finish());
  return out;
}

Result<Bytes> TicketRequest::encode() const {
  PayloadWriter w;
  w.field(n_e.view());
  LURKT_TRY(w.transcript(transcript));
  w.field(ticket_nonce);
  return std::move(w).take();
}

Result<TicketRequest> TicketRequest::decode(ByteView p) {
  PayloadReader r(p);
  TicketRequest out;
  LURKT_ASSIGN(auto ne, r.field());
  out.n_e = SecretBytes(ne);
  LURKT_ASSIGN(auto t, r.transcript());
  out.transcript = copy(t);
  LURKT_ASSIGN(auto nonce, r.field());
  out.ticket_nonce = copy(nonce);
  LURKT_TRY(r.finish());
  return out;
}

Bytes TicketResponse::encode() const {
  PayloadWriter w;
  w.field(psk_id);
  return std::move(w).take();
}

Result<TicketResponse> TicketResponse::decode(ByteView p) {
  PayloadReader r(p);
  TicketResponse out;
  LURKT_ASSIGN(auto id, r.field());
  out.psk_id = copy(id);
  LURKT_TRY(r.finish());
  return out;
}

Result<Bytes> EarlySecretRequest::encode() const {
  PayloadWriter w;
  w.u8(row);
  w.u16(suite);
  w.field(psk_id);
  LURKT_TRY(w.transcript(truncated_client_hello));
  return std::move(w).take();
}

Result<EarlySecretRequest> EarlySecretRequest::decode(ByteView p) {
  PayloadReader r(p);
  EarlySecretRequest out;
  LURKT_ASSIGN(out.row, r.u8());
  LURKT_ASSIGN(out.suite, r.u16());
  LURKT_ASSIGN(auto id, r.field());
  out.psk_id = copy(id);
  LURKT_ASSIGN(auto ch, r.transcript());
  out.truncated_client_hello = copy(ch);
  LURKT_TRY(r.finish());
  return out;
}

Bytes EarlySecretResponse::encode() const {
  PayloadWriter w;
  w.field(binder_key.view());
  w.field(binder_mac);
  return std::move(w).take();
}

Result<EarlySecretResponse> EarlySecretResponse::decode(ByteView p) {
  PayloadReader r(p);
  EarlySecretResponse out;
  LURKT_ASSIGN(auto key, r.field());
  out.binder_key = SecretBytes(key);
  LURKT_ASSIGN(auto mac, r.field());
  out.binder_mac = copy(mac);
  LURKT_TRY(r.finish());
  return out;
}

Result<Bytes> AppSecretRequest::encode() const {
  PayloadWriter w;
  w.field(n_e.view());
  LURKT_TRY(w.transcript(transcript));
  return std::move(w).take();
}

Result<AppSecretRequest> AppSecretRequest::decode(ByteView p) {
  PayloadReader r(p);
  AppSecretRequest out;
  LURKT_ASSIGN(auto ne, r.field());
  out.n_e = SecretBytes(ne);
  LURKT_ASSIGN(auto t, r.transcript());
  out.transcript = copy(t);
  LURKT_TRY(r.finish());
  return out;
}

Bytes AppSecretResponse::encode() const {
  PayloadWriter w;
  w.field(client_app.view());
  w.field(server_app.view());
  return std::move(w).take();
}

Result<AppSecretResponse> AppSecretResponse::decode(ByteView p) {
  PayloadReader r(p);
  AppSecretResponse out;
  LURKT_ASSIGN(auto c, r.field());
  out.client_app = SecretBytes(c);
  LURKT_ASSIGN(auto s, r.field());
  out.server_app = SecretBytes(s);
  LURKT_TRY(r.finish());
  return out;
}

Bytes Quote::encode() const {
  PayloadWriter w;
  w.field(measurement);
  w.field(h_ctx_hash);
  w.field(signature);
  return std::move(w).take();
}

Result<Quote> Quote::decode(ByteView p) {
  PayloadReader r(p);
  Quote out;
  LURKT_ASSIGN(auto m, r.field(32));
  out.measurement = copy(m);
  LURKT_ASSIGN(auto h, r.field(32));
  out.h_ctx_hash = copy(h);
  LURKT_ASSIGN(auto s, r.field());
  out.signature = copy(s);
  LURKT_TRY(r.finish());
  return out;
}

Bytes Quote::signed_message() const {
  Bytes out = measurement;
  append(out, h_ctx_hash);
  return out;
}

}  // namespace lurkt::lurk
