// SPDX-License-Identifier: Apache-2.0
#include "lurkt/tls_codec.hpp"

#include <set>

namespace lurkt::tls {

namespace {

bool known_type(std::uint8_t t) {
  switch (static_cast<HandshakeType>(t)) {
    case HandshakeType::ClientHello:
    case HandshakeType::ServerHello:
    case HandshakeType::NewSessionTicket:
    case HandshakeType::EncryptedExtensions:
    case HandshakeType::Certificate:
    case HandshakeType::CertificateVerify:
    case HandshakeType::Finished:
      return true;
  }
  return false;
}

Status expect_end(const ByteReader& r, const char* what) {
  if (!r.empty()) return make_error(Errc::MalformedPayload, std::string("trailing bytes in ") + what, r.offset());
  return {};
}

Result<std::vector<std::uint16_t>> u16_list(ByteReader& r, ByteView body, bool allow_empty) {
  if (body.size() % 2 != 0) return make_error(Errc::MalformedPayload, "odd-length u16 list", r.offset());
  if (body.empty() && !allow_empty) return make_error(Errc::MalformedPayload, "empty list", r.offset());
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < body.size(); i += 2) {
    out.push_back(static_cast<std::uint16_t>((body[i] << 8) | body[i + 1]));
  }
  return out;
}

enum class Context { ClientHello, ServerHello, Other };

// Validates the payload of a known extension for the given message context.
Status validate_extension(Context ctx, std::uint16_t type, ByteView data) {
  switch (ctx) {
    case Context::ClientHello:
      switch (type) {
        case ext::kSupportedVersions: {
          auto r = parse_client_versions(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kKeyShare: {
          auto r = parse_client_key_shares(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kSupportedGroups:
        case ext::kSignatureAlgorithms: {
          auto r = parse_u16_list(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kPskKeyExchangeModes: {
          auto r = parse_psk_modes(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kPreSharedKey: {
          auto r = parse_offered_psks(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kServerName: {
          auto r = parse_server_name(data);
          if (!r) return r.error();
          return {};
        }
        default: return {};
      }
    case Context::ServerHello:
      switch (type) {
        case ext::kSupportedVersions:
          if (data.size() != 2) return make_error(Errc::MalformedPayload, "selected version must be 2 bytes");
          return {};
        case ext::kKeyShare: {
          auto r = parse_server_key_share(data);
          if (!r) return r.error();
          return {};
        }
        case ext::kPreSharedKey:
          if (data.size() != 2) return make_error(Errc::MalformedPayload, "selected identity must be 2 bytes");
          return {};
        default: return {};
      }
    case Context::Other: return {};
  }
  return {};
}

Result<Extensions> read_extensions(ByteReader& r, Context ctx) {
  std::size_t list_start = r.offset() + 2;
  LURKT_ASSIGN(auto list, r.vec16());
  ByteReader lr(list, list_start);
  Extensions out;
  std::set<std::uint16_t> seen;
  while (!lr.empty()) {
    std::size_t ext_start = lr.offset();
    auto type = lr.u16();
    if (!type) return make_error(Errc::MalformedExtension, "truncated extension header", ext_start);
    auto data = lr.vec16();
    if (!data) return make_error(Errc::MalformedExtension, "extension body overruns list", ext_start);
    if (!seen.insert(*type).second) {
      return make_error(Errc::MalformedExtension, "duplicate extension " + std::to_string(*type), ext_start);
    }
    if (ctx == Context::ClientHello && !out.empty() && out.back().type == ext::kPreSharedKey) {
      return make_error(Errc::MalformedExtension, "pre_shared_key is not the last extension", ext_start);
    }
    auto valid = validate_extension(ctx, *type, *data);
    if (!valid) {
      return make_error(Errc::MalformedExtension,
                        "extension " + std::to_string(*type) + ": " + valid.error().message(), ext_start);
    }
    out.push_back(Extension{*type, Bytes(data->begin(), data->end())});
  }
  return out;
}

Status write_extensions(ByteWriter& w, const Extensions& list) {
  auto mark = w.begin_prefix(2);
  for (const auto& e : list) {
    w.u16(e.type);
    LURKT_TRY(w.vec16(e.data));
  }
  return w.end_prefix(mark, 2);
}

Result<ClientHello> parse_client_hello(ByteReader& r) {
  ClientHello ch;
  LURKT_ASSIGN(ch.legacy_version, r.u16());
  LURKT_ASSIGN(auto random, r.raw(32));
  std::copy(random.begin(), random.end(), ch.random.begin());
  std::size_t sid_at = r.offset();
  LURKT_ASSIGN(auto sid, r.vec8());
  if (sid.size() > 32) return make_error(Errc::MalformedPayload, "legacy_session_id longer than 32", sid_at);
  ch.legacy_session_id.assign(sid.begin(), sid.end());
  LURKT_ASSIGN(auto suites, r.vec16());
  LURKT_ASSIGN(ch.cipher_suites, u16_list(r, suites, false));
  LURKT_ASSIGN(auto comp, r.vec8());
  ch.legacy_compression_methods.assign(comp.begin(), comp.end());
  LURKT_ASSIGN(ch.extensions, read_extensions(r, Context::ClientHello));
  LURKT_TRY(expect_end(r, "ClientHello"));
  return ch;
}

Result<ServerHello> parse_server_hello(ByteReader& r) {
  ServerHello sh;
  LURKT_ASSIGN(sh.legacy_version, r.u16());
  LURKT_ASSIGN(auto random, r.raw(32));
  std::copy(random.begin(), random.end(), sh.random.begin());
  std::size_t sid_at = r.offset();
  LURKT_ASSIGN(auto sid, r.vec8());
  if (sid.size() > 32) return make_error(Errc::MalformedPayload, "legacy_session_id_echo longer than 32", sid_at);
  sh.legacy_session_id_echo.assign(sid.begin(), sid.end());
  LURKT_ASSIGN(sh.cipher_suite, r.u16());
  LURKT_ASSIGN(sh.legacy_compression_method, r.u8());
  LURKT_ASSIGN(sh.extensions, read_extensions(r, Context::ServerHello));
  LURKT_TRY(expect_end(r, "ServerHello"));
  return sh;
}

Result<Certificate> parse_certificate(ByteReader& r) {
  Certificate c;
  LURKT_ASSIGN(auto ctx, r.vec8());
  c.request_context.assign(ctx.begin(), ctx.end());
  std::size_t list_at = r.offset() + 3;
  LURKT_ASSIGN(auto list, r.vec24());
  ByteReader lr(list, list_at);
  while (!lr.empty()) {
    std::size_t at = lr.offset();
    LURKT_ASSIGN(auto data, lr.vec24());
    if (data.empty()) return make_error(Errc::MalformedPayload, "empty certificate entry", at);
    LURKT_ASSIGN(auto exts, lr.vec16());
    c.entries.push_back(CertificateEntry{Bytes(data.begin(), data.end()), Bytes(exts.begin(), exts.end())});
  }
  LURKT_TRY(expect_end(r, "Certificate"));
  return c;
}

Result<HandshakeBody> parse_body(HandshakeType type, ByteReader& r) {
  switch (type) {
    case HandshakeType::ClientHello: {
      LURKT_ASSIGN(auto ch, parse_client_hello(r));
      return HandshakeBody{std::move(ch)};
    }
    case HandshakeType::ServerHello: {
      LURKT_ASSIGN(auto sh, parse_server_hello(r));
      return HandshakeBody{std::move(sh)};
    }
    case HandshakeType::EncryptedExtensions: {
      EncryptedExtensions ee;
      LURKT_ASSIGN(ee.extensions, read_extensions(r, Context::Other));
      LURKT_TRY(expect_end(r, "EncryptedExtensions"));
      return HandshakeBody{std::move(ee)};
    }
    case HandshakeType::Certificate: {
      LURKT_ASSIGN(auto c, parse_certificate(r));
      return HandshakeBody{std::move(c)};
    }
    case HandshakeType::CertificateVerify: {
      CertificateVerify cv;
      LURKT_ASSIGN(cv.scheme, r.u16());
      LURKT_ASSIGN(auto sig, r.vec16());
      cv.signature.assign(sig.begin(), sig.end());
      LURKT_TRY(expect_end(r, "CertificateVerify"));
      return HandshakeBody{std::move(cv)};
    }
    case HandshakeType::Finished: {
      auto rest = r.rest();
      return HandshakeBody{Finished{Bytes(rest.begin(), rest.end())}};
    }
    case HandshakeType::NewSessionTicket: {
      NewSessionTicket t;
      LURKT_ASSIGN(t.lifetime, r.u32());
      LURKT_ASSIGN(t.age_add, r.u32());
      LURKT_ASSIGN(auto nonce, r.vec8());
      t.nonce.assign(nonce.begin(), nonce.end());
      std::size_t ticket_at = r.offset();
      LURKT_ASSIGN(auto ticket, r.vec16());
      if (ticket.empty()) return make_error(Errc::MalformedPayload, "empty ticket", ticket_at);
      t.ticket.assign(ticket.begin(), ticket.end());
      LURKT_ASSIGN(t.extensions, read_extensions(r, Context::Other));
      LURKT_TRY(expect_end(r, "NewSessionTicket"));
      return HandshakeBody{std::move(t)};
    }
  }
  return make_error(Errc::UnknownType, "unsupported handshake type");
}

struct BodyWriter {
  ByteWriter& w;

  Status operator()(const ClientHello& ch) {
    w.u16(ch.legacy_version);
    w.raw(ch.random);
    LURKT_TRY(w.vec8(ch.legacy_session_id));
    auto mark = w.begin_prefix(2);
    for (auto s : ch.cipher_suites) w.u16(s);
    LURKT_TRY(w.end_prefix(mark, 2));
    LURKT_TRY(w.vec8(ch.legacy_compression_methods));
    return write_extensions(w, ch.extensions);
  }
  Status operator()(const ServerHello& sh) {
    w.u16(sh.legacy_version);
    w.raw(sh.random);
    LURKT_TRY(w.vec8(sh.legacy_session_id_echo));
    w.u16(sh.cipher_suite);
    w.u8(sh.legacy_compression_method);
    return write_extensions(w, sh.extensions);
  }
  Status operator()(const EncryptedExtensions& ee) { return write_extensions(w, ee.extensions); }
  Status operator()(const Certificate& c) {
    LURKT_TRY(w.vec8(c.request_context));
    auto mark = w.begin_prefix(3);
    for (const auto& e : c.entries) {
      LURKT_TRY(w.vec24(e.cert_data));
      LURKT_TRY(w.vec16(e.extensions));
    }
    return w.end_prefix(mark, 3);
  }
  Status operator()(const CertificateVerify& cv) {
    w.u16(cv.scheme);
    return w.vec16(cv.signature);
  }
  Status operator()(const Finished& f) {
    w.raw(f.verify_data);
    return {};
  }
  Status operator()(const NewSessionTicket& t) {
    w.u32(t.lifetime);
    w.u32(t.age_add);
    LURKT_TRY(w.vec8(t.nonce));
    LURKT_TRY(w.vec16(t.ticket));
    return write_extensions(w, t.extensions);
  }
};

}  // namespace

std::string_view handshake_type_name(HandshakeType t) {
  switch (t) {
    case HandshakeType::ClientHello: return "ClientHello";
    case HandshakeType::ServerHello: return "ServerHello";
    case HandshakeType::NewSessionTicket: return "NewSessionTicket";
    case HandshakeType::EncryptedExtensions: return "EncryptedExtensions";
    case HandshakeType::Certificate: return "Certificate";
    case HandshakeType::CertificateVerify: return "CertificateVerify";
    case HandshakeType::Finished: return "Finished";
  }
  return "Unknown";
}

const Extension* find_extension(const Extensions& list, std::uint16_t type) {
  for (const auto& e : list) {
    if (e.type == type) return &e;
  }
  return nullptr;
}

HandshakeType HandshakeMessage::type() const {
  static constexpr HandshakeType kTypes[] = {
      HandshakeType::ClientHello,       HandshakeType::ServerHello, HandshakeType::EncryptedExtensions,
      HandshakeType::Certificate,       HandshakeType::CertificateVerify, HandshakeType::Finished,
      HandshakeType::NewSessionTicket,
  };
  return kTypes[body.index()];
}

Result<Bytes> encode_message(const HandshakeMessage& msg) {
  ByteWriter body;
  LURKT_TRY(std::visit(BodyWriter{body}, msg.body));
  if (body.size() > kMaxHandshakeBody) return make_error(Errc::OversizeBody, "handshake body exceeds 2^24-1");
  ByteWriter out;
  out.u8(static_cast<std::uint8_t>(msg.type()));
  LURKT_TRY(out.vec24(body.bytes()));
  return std::move(out).take();
}

Result<HandshakeMessage> decode_message(ByteView bytes) {
  ByteReader r(bytes);
  LURKT_ASSIGN(auto type, r.u8());
  if (!known_type(type)) return make_error(Errc::UnknownType, "handshake type " + std::to_string(type), 0);
  LURKT_ASSIGN(auto body, r.vec24());
  if (!r.empty()) return make_error(Errc::MalformedPayload, "bytes after handshake message", r.offset());
  ByteReader br(body, 4);
  LURKT_ASSIGN(auto parsed, parse_body(static_cast<HandshakeType>(type), br));
  return HandshakeMessage{std::move(parsed)};
}

Result<std::vector<ByteView>> split_messages(ByteView bytes) {
  std::vector<ByteView> out;
  ByteReader r(bytes);
  while (!r.empty()) {
    std::size_t start = r.pos();
    LURKT_ASSIGN(auto type, r.u8());
    if (!known_type(type)) return make_error(Errc::UnknownType, "handshake type " + std::to_string(type), start);
    LURKT_ASSIGN(auto body, r.vec24());
    out.push_back(bytes.subspan(start, 4 + body.size()));
  }
  return out;
}

Result<std::vector<std::uint16_t>> parse_client_versions(ByteView data) {
  ByteReader r(data);
  LURKT_ASSIGN(auto list, r.vec8());
  LURKT_TRY(expect_end(r, "supported_versions"));
  return u16_list(r, list, false);
}

Result<std::vector<KeyShareEntry>> parse_client_key_shares(ByteView data) {
  ByteReader r(data);
  LURKT_ASSIGN(auto list, r.vec16());
  LURKT_TRY(expect_end(r, "key_share"));
  ByteReader lr(list, 2);
  std::vector<KeyShareEntry> out;
  while (!lr.empty()) {
    KeyShareEntry e;
    LURKT_ASSIGN(e.group, lr.u16());
    LURKT_ASSIGN(auto key, lr.vec16());
    if (key.empty()) return make_error(Errc::MalformedPayload, "empty key_exchange", lr.offset());
    e.key_exchange.assign(key.begin(), key.end());
    out.push_back(std::move(e));
  }
  return out;
}

Result<KeyShareEntry> parse_server_key_share(ByteView data) {
  ByteReader r(data);
  KeyShareEntry e;
  LURKT_ASSIGN(e.group, r.u16());
  LURKT_ASSIGN(auto key, r.vec16());
  if (key.empty()) return make_error(Errc::MalformedPayload, "empty key_exchange", 2);
  e.key_exchange.assign(key.begin(), key.end());
  LURKT_TRY(expect_end(r, "key_share"));
  return e;
}

Result<std::vector<std::uint16_t>> parse_u16_list(ByteView data) {
  ByteReader r(data);
  LURKT_ASSIGN(auto list, r.vec16());
  LURKT_TRY(expect_end(r, "u16 list"));
  return u16_list(r, list, false);
}

Result<Bytes> parse_psk_modes(ByteView data) {
  ByteReader r(data);
  LURKT_ASSIGN(auto list, r.vec8());
  LURKT_TRY(expect_end(r, "psk_key_exchange_modes"));
  if (list.empty()) return make_error(Errc::MalformedPayload, "empty psk_key_exchange_modes", 0);
  return Bytes(list.begin(), list.end());
}

Result<OfferedPsks> parse_offered_psks(ByteView data) {
  ByteReader r(data);
  OfferedPsks out;
  LURKT_ASSIGN(auto ids, r.vec16());
  ByteReader ir(ids, 2);
  while (!ir.empty()) {
    PskIdentity id;
    std::size_t at = ir.offset();
    LURKT_ASSIGN(auto identity, ir.vec16());
    if (identity.empty()) return make_error(Errc::MalformedPayload, "empty PSK identity", at);
    id.identity.assign(identity.begin(), identity.end());
    LURKT_ASSIGN(id.obfuscated_ticket_age, ir.u32());
    out.identities.push_back(std::move(id));
  }
  std::size_t binders_at = r.offset() + 2;
  LURKT_ASSIGN(auto binders, r.vec16());
  LURKT_TRY(expect_end(r, "pre_shared_key"));
  ByteReader br(binders, binders_at);
  while (!br.empty()) {
    std::size_t at = br.offset();
    LURKT_ASSIGN(auto b, br.vec8());
    if (b.size() < 32) return make_error(Errc::MalformedPayload, "binder shorter than 32 bytes", at);
    out.binders.emplace_back(b.begin(), b.end());
  }
  if (out.identities.empty() || out.identities.size() != out.binders.size()) {
    return make_error(Errc::MalformedPayload, "identity/binder count mismatch", 0);
  }
  return out;
}

Result<std::string> parse_server_name(ByteView data) {
  ByteReader r(data);
  LURKT_ASSIGN(auto list, r.vec16());
  LURKT_TRY(expect_end(r, "server_name"));
  ByteReader lr(list, 2);
  std::string host;
  while (!lr.empty()) {
    LURKT_ASSIGN(auto type, lr.u8());
    LURKT_ASSIGN(auto name, lr.vec16());
    if (type == 0 && host.empty()) host.assign(name.begin(), name.end());
  }
  return host;
}

Extension make_client_versions(const std::vector<std::uint16_t>& versions) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(versions.size() * 2));
  for (auto v : versions) w.u16(v);
  return {ext::kSupportedVersions, std::move(w).take()};
}

Extension make_server_version() {
  ByteWriter w;
  w.u16(kTls13);
  return {ext::kSupportedVersions, std::move(w).take()};
}

Extension make_client_key_shares(const std::vector<KeyShareEntry>& shares) {
  ByteWriter w;
  auto mark = w.begin_prefix(2);
  for (const auto& s : shares) {
    w.u16(s.group);
    (void)w.vec16(s.key_exchange);
  }
  (void)w.end_prefix(mark, 2);
  return {ext::kKeyShare, std::move(w).take()};
}

Extension make_server_key_share(const KeyShareEntry& share) {
  ByteWriter w;
  w.u16(share.group);
  (void)w.vec16(share.key_exchange);
  return {ext::kKeyShare, std::move(w).take()};
}

Extension make_u16_list(std::uint16_t type, const std::vector<std::uint16_t>& values) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(values.size() * 2));
  for (auto v : values) w.u16(v);
  return {type, std::move(w).take()};
}

Extension make_psk_modes(ByteView modes) {
  ByteWriter w;
  (void)w.vec8(modes);
  return {ext::kPskKeyExchangeModes, std::move(w).take()};
}

Extension make_offered_psks(const OfferedPsks& psks) {
  ByteWriter w;
  auto ids = w.begin_prefix(2);
  for (const auto& id : psks.identities) {
    (void)w.vec16(id.identity);
    w.u32(id.obfuscated_ticket_age);
  }
  (void)w.end_prefix(ids, 2);
  auto binders = w.begin_prefix(2);
  for (const auto& b : psks.binders) (void)w.vec8(b);
  (void)w.end_prefix(binders, 2);
  return {ext::kPreSharedKey, std::move(w).take()};
}

Extension make_selected_psk(std::uint16_t index) {
  ByteWriter w;
  w.u16(index);
  return {ext::kPreSharedKey, std::move(w).take()};
}

Extension make_server_name(const std::string& host) {
  ByteWriter w;
  auto list = w.begin_prefix(2);
  w.u8(0);
  (void)w.vec16(as_bytes(host));
  (void)w.end_prefix(list, 2);
  return {ext::kServerName, std::move(w).take()};
}

Result<Bytes> truncate_for_binders(ByteView encoded_client_hello) {
  LURKT_ASSIGN(auto msg, decode_message(encoded_client_hello));
  const auto* ch = msg.as<ClientHello>();
  if (ch == nullptr) return make_error(Errc::UnknownType, "not a ClientHello");
  if (ch->extensions.empty() || ch->extensions.back().type != ext::kPreSharedKey) {
    return make_error(Errc::MalformedExtension, "ClientHello carries no pre_shared_key");
  }
  LURKT_ASSIGN(auto offered, parse_offered_psks(ch->extensions.back().data));
  std::size_t binders_len = 2;
  for (const auto& b : offered.binders) binders_len += 1 + b.size();
  return Bytes(encoded_client_hello.begin(),
               encoded_client_hello.end() - static_cast<std::ptrdiff_t>(binders_len));
}

Result<HandshakeTranscript> HandshakeTranscript::parse(ByteView concatenated) {
  HandshakeTranscript t;
  LURKT_ASSIGN(auto parts, split_messages(concatenated));
  for (auto p : parts) LURKT_TRY(t.append(p));
  return t;
}

Status HandshakeTranscript::append(ByteView encoded_message) {
  if (encoded_message.size() < 4) return make_error(Errc::Truncated, "handshake header", 0);
  if (!known_type(encoded_message[0])) return make_error(Errc::UnknownType, "handshake type", 0);
  std::size_t len = (std::size_t{encoded_message[1]} << 16) | (std::size_t{encoded_message[2]} << 8) | encoded_message[3];
  if (len + 4 != encoded_message.size()) return make_error(Errc::MalformedPayload, "handshake length mismatch", 1);
  entries_.push_back(Entry{static_cast<HandshakeType>(encoded_message[0]),
                           Bytes(encoded_message.begin(), encoded_message.end())});
  return {};
}

Status HandshakeTranscript::append(const HandshakeMessage& msg) {
  LURKT_ASSIGN(auto bytes, encode_message(msg));
  entries_.push_back(Entry{msg.type(), std::move(bytes)});
  return {};
}

Result<Bytes> HandshakeTranscript::prefix_bytes(HandshakeType upto) const {
  Bytes out;
  for (const auto& e : entries_) {
    out.insert(out.end(), e.bytes.begin(), e.bytes.end());
    if (e.type == upto) return out;
  }
  return make_error(Errc::MissingMessage, std::string(handshake_type_name(upto)) + " not in transcript");
}

Result<Bytes> HandshakeTranscript::prefix_hash(crypto::HashAlg alg, HandshakeType upto) const {
  LURKT_ASSIGN(auto bytes, prefix_bytes(upto));
  return crypto::digest(alg, bytes);
}

Bytes HandshakeTranscript::bytes() const {
  Bytes out;
  for (const auto& e : entries_) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  return out;
}

Bytes HandshakeTranscript::hash(crypto::HashAlg alg) const { return crypto::digest(alg, bytes()); }

bool HandshakeTranscript::contains(HandshakeType t) const {
  for (const auto& e : entries_) {
    if (e.type == t) return true;
  }
  return false;
}

Result<ByteView> HandshakeTranscript::message(HandshakeType t) const {
  for (const auto& e : entries_) {
    if (e.type == t) return ByteView(e.bytes);
  }
  return make_error(Errc::MissingMessage, std::string(handshake_type_name(t)) + " not in transcript");
}

Result<HandshakeMessage> HandshakeTranscript::decoded(HandshakeType t) const {
  LURKT_ASSIGN(auto bytes, message(t));
  return decode_message(bytes);
}

Bytes certificate_verify_input(ByteView transcript_hash) {
  constexpr std::string_view kContext = "TLS 1.3, server CertificateVerify";
  Bytes out(64, 0x20);
  append(out, as_bytes(kContext));
  out.push_back(0);
  append(out, transcript_hash);
  return out;
}

}  // namespace lurkt::tls
