// SPDX-License-Identifier: Apache-2.0
#include "lurkt/client.hpp"

#include <algorithm>
#include <sstream>

namespace lurkt::client {

using tls::HandshakeType;

namespace {

constexpr std::uint16_t kEd25519 = static_cast<std::uint16_t>(crypto::SigScheme::Ed25519);
constexpr std::uint16_t kEd448 = static_cast<std::uint16_t>(crypto::SigScheme::Ed448);

Bytes encode_handshake(tls::HandshakeBody body) {
  return std::move(tls::encode_message(tls::HandshakeMessage{std::move(body)})).value();
}

bool contains(const std::vector<std::uint16_t>& v, std::uint16_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

std::string serialize_ticket(const Ticket& t) {
  std::ostringstream out;
  out << std::hex << t.suite << ' ' << to_hex(t.identity) << ' ' << to_hex(t.psk.view()) << '\n';
  return out.str();
}

Result<Ticket> parse_ticket(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string suite, id, psk;
  if (!(in >> suite >> id >> psk)) return make_error(Errc::MalformedPayload, "ticket file needs: suite identity psk");
  Ticket t;
  try {
    t.suite = static_cast<std::uint16_t>(std::stoul(suite, nullptr, 16));
  } catch (const std::exception&) {
    return make_error(Errc::MalformedPayload, "ticket suite is not hex");
  }
  const auto* s = ks::find_suite(t.suite);
  if (!s) return make_error(Errc::MalformedPayload, "ticket suite is unknown");
  LURKT_ASSIGN(t.identity, from_hex(id));
  LURKT_ASSIGN(auto raw, from_hex(psk));
  if (raw.size() != crypto::hash_len(s->hash) || t.identity.empty()) {
    return make_error(Errc::MalformedPayload, "ticket identity or PSK has the wrong length");
  }
  t.psk = SecretBytes(raw);
  secure_wipe(raw.data(), raw.size());
  return t;
}

std::string_view state_name(TlsClient::State s) {
  switch (s) {
    case TlsClient::State::Start: return "Start";
    case TlsClient::State::WaitServerFlight: return "WaitServerFlight";
    case TlsClient::State::Connected: return "Connected";
    case TlsClient::State::Failed: return "Failed";
  }
  return "?";
}

TlsClient::TlsClient(ClientOptions opts) : opts_(std::move(opts)) {}

TlsClient::~TlsClient() {
  if (eph_) eph_->priv.wipe();
}

void TlsClient::fail(const Error& e) {
  state_ = State::Failed;
  failure_ = e;
  if (eph_) eph_->priv.wipe();
  schedule_.reset();
  client_hs_.wipe();
  server_hs_.wipe();
  resumption_.wipe();
}

Result<Bytes> TlsClient::start() {
  if (state_ != State::Start) return make_error(Errc::StateViolation, "client already started");
  if (opts_.suites.empty() || opts_.groups.empty()) return make_error(Errc::InvalidConfig, "no suites or groups");
  if (!crypto::group_supported(opts_.groups.front())) {
    return make_error(Errc::UnsupportedGroup, "group " + std::to_string(opts_.groups.front()));
  }
  crypto::random_bytes(random_);
  eph_ = crypto::generate_keypair(static_cast<crypto::Group>(opts_.groups.front()));

  tls::ClientHello ch;
  ch.random = random_;
  ch.legacy_session_id = crypto::random_bytes(32);
  ch.cipher_suites = opts_.suites;
  ch.extensions.push_back(tls::make_client_versions({tls::kTls13}));
  ch.extensions.push_back(tls::make_u16_list(tls::ext::kSupportedGroups, opts_.groups));
  ch.extensions.push_back(tls::make_u16_list(tls::ext::kSignatureAlgorithms, {kEd25519, kEd448}));
  ch.extensions.push_back(tls::make_client_key_shares({tls::KeyShareEntry{opts_.groups.front(), eph_->pub}}));
  if (!opts_.server_name.empty()) ch.extensions.push_back(tls::make_server_name(opts_.server_name));

  Bytes ch_bytes;
  if (opts_.ticket) {
    const auto* s = ks::find_suite(opts_.ticket->suite);
    if (!s || !contains(opts_.suites, s->code)) {
      return make_error(Errc::InvalidConfig, "ticket suite is not offered");
    }
    const std::uint8_t modes[] = {tls::kPskDheKe};
    ch.extensions.push_back(tls::make_psk_modes(modes));
    tls::OfferedPsks offer;
    offer.identities.push_back(tls::PskIdentity{opts_.ticket->identity, opts_.ticket->age_add});
    offer.binders.push_back(Bytes(crypto::hash_len(s->hash), 0));
    ch.extensions.push_back(tls::make_offered_psks(offer));
    LURKT_ASSIGN(auto draft, tls::encode_message(tls::HandshakeMessage{ch}));
    LURKT_ASSIGN(auto truncated, tls::truncate_for_binders(draft));
    auto b = ks::binder_key_and_mac(s->hash, opts_.ticket->psk.view(), truncated);
    offer.binders.front() = std::move(b.binder_mac);
    ch.extensions.back() = tls::make_offered_psks(offer);
  }
  LURKT_ASSIGN(ch_bytes, tls::encode_message(tls::HandshakeMessage{std::move(ch)}));
  LURKT_TRY(transcript_.append(ch_bytes));
  state_ = State::WaitServerFlight;
  return record::plaintext_records(record::ContentType::Handshake, ch_bytes, 0x0301);
}

Result<Bytes> TlsClient::on_receive(ByteView data) {
  if (state_ == State::Failed) return make_error(Errc::StateViolation, "client already failed");
  if (state_ == State::Start) return make_error(Errc::StateViolation, "client not started");
  auto r = receive(data);
  if (!r) fail(r.error());
  return r;
}

Result<Bytes> TlsClient::receive(ByteView data) {
  records_.feed(data);
  Bytes out;
  for (;;) {
    LURKT_ASSIGN(auto rec, records_.next());
    if (!rec) break;
    if (rec->type == record::ContentType::ChangeCipherSpec && state_ == State::WaitServerFlight) continue;
    if (state_ == State::WaitServerFlight && !server_read_) {
      if (rec->type == record::ContentType::Alert) return make_error(Errc::NegotiationFailure, "server sent an alert");
      if (rec->type != record::ContentType::Handshake) {
        return make_error(Errc::StateViolation, "expected a plaintext ServerHello record");
      }
      handshake_.feed(rec->fragment());
      LURKT_ASSIGN(auto msg, handshake_.next());
      if (!msg) continue;
      if (!handshake_.empty()) return make_error(Errc::StateViolation, "data after ServerHello in the same record");
      LURKT_TRY(on_server_hello(*msg));
      continue;
    }
    if (rec->type != record::ContentType::ApplicationData) {
      return make_error(Errc::StateViolation, "unprotected record after ServerHello");
    }
    if (state_ == State::WaitServerFlight) {
      LURKT_ASSIGN(auto opened, record::open(*server_read_, rec->bytes));
      if (opened.type != record::ContentType::Handshake) {
        return make_error(Errc::StateViolation, "expected handshake messages in the server flight");
      }
      handshake_.feed(opened.plaintext);
      for (;;) {
        LURKT_ASSIGN(auto msg, handshake_.next());
        if (!msg) break;
        LURKT_ASSIGN(auto fin, on_flight_message(*msg));
        append(out, fin);
        if (state_ == State::Connected && !handshake_.empty()) {
          return make_error(Errc::StateViolation, "data after server Finished under handshake keys");
        }
      }
      continue;
    }
    LURKT_ASSIGN(auto opened, record::open(server_app_keys_, rec->bytes));
    if (opened.type == record::ContentType::ApplicationData) {
      append(received_, opened.plaintext);
    } else if (opened.type == record::ContentType::Handshake) {
      handshake_.feed(opened.plaintext);
      for (;;) {
        LURKT_ASSIGN(auto msg, handshake_.next());
        if (!msg) break;
        LURKT_TRY(on_post_handshake(*msg));
      }
    } else if (opened.type == record::ContentType::Alert) {
      return make_error(Errc::StateViolation, "server sent an alert");
    }
  }
  return out;
}

Status TlsClient::on_server_hello(ByteView sh_bytes) {
  LURKT_ASSIGN(auto msg, tls::decode_message(sh_bytes));
  const auto* sh = msg.as<tls::ServerHello>();
  if (!sh) return make_error(Errc::StateViolation, "expected ServerHello");
  suite_ = contains(opts_.suites, sh->cipher_suite) ? ks::find_suite(sh->cipher_suite) : nullptr;
  if (!suite_) return make_error(Errc::NegotiationFailure, "server selected an unoffered suite");
  const auto* ver = tls::find_extension(sh->extensions, tls::ext::kSupportedVersions);
  if (!ver || ver->data != Bytes{0x03, 0x04}) return make_error(Errc::NegotiationFailure, "server did not select TLS 1.3");
  const auto* ks_ext = tls::find_extension(sh->extensions, tls::ext::kKeyShare);
  if (!ks_ext) return make_error(Errc::NegotiationFailure, "ServerHello has no key_share");
  LURKT_ASSIGN(auto share, tls::parse_server_key_share(ks_ext->data));
  if (share.group != opts_.groups.front()) return make_error(Errc::NegotiationFailure, "server share on an unrequested group");

  std::optional<SecretBytes> psk;
  const auto* sel = tls::find_extension(sh->extensions, tls::ext::kPreSharedKey);
  if (sel) {
    if (!opts_.ticket || sel->data != Bytes{0, 0}) return make_error(Errc::NegotiationFailure, "server selected an unoffered PSK");
    if (sh->cipher_suite != opts_.ticket->suite) return make_error(Errc::NegotiationFailure, "resumed under another suite");
    resumed_ = true;
    psk = opts_.ticket->psk;
  } else if (opts_.ticket) {
    psk_rejected_ = true;
    if (opts_.require_resumption) return make_error(Errc::ServerRejectedPsk, "server ran a full handshake");
  }

  auto ke = crypto::ecdh(*eph_, share.key_exchange);
  if (!ke) return make_error(Errc::NegotiationFailure, "server key share: " + ke.error().detail);
  eph_->priv.wipe();
  server_random_ = sh->random;
  server_share_ = share.key_exchange;
  group_ = share.group;
  LURKT_TRY(transcript_.append(sh_bytes));

  schedule_.emplace(suite_->hash);
  ks::SharedKeyMaterial km{std::move(ke).value(), std::move(psk)};
  LURKT_ASSIGN(auto hs, schedule_->derive_handshake_secrets(km, transcript_.bytes()));
  client_hs_ = std::move(hs.client);
  server_hs_ = std::move(hs.server);
  server_read_ = record::derive_traffic_keys(*suite_, server_hs_.view());
  client_hs_keys_ = record::derive_traffic_keys(*suite_, client_hs_.view());
  return {};
}

Result<Bytes> TlsClient::on_flight_message(ByteView msg_bytes) {
  LURKT_ASSIGN(auto msg, tls::decode_message(msg_bytes));
  const HandshakeType last = transcript_.entries().back().type;
  switch (msg.type()) {
    case HandshakeType::EncryptedExtensions:
      if (last != HandshakeType::ServerHello) break;
      LURKT_TRY(transcript_.append(msg_bytes));
      return Bytes{};
    case HandshakeType::Certificate: {
      if (resumed_ || last != HandshakeType::EncryptedExtensions) break;
      saw_certificate_ = true;
      const auto* cert = msg.as<tls::Certificate>();
      if (cert->entries.empty()) return make_error(Errc::BadCertificate, "empty certificate chain");
      const Bytes& leaf = cert->entries.front().cert_data;
      if (opts_.trust_anchor.empty() || !crypto::certificate_chains_to(leaf, opts_.trust_anchor)) {
        return make_error(Errc::BadCertificate, "certificate does not chain to the trust anchor");
      }
      auto key = crypto::PublicKey::from_certificate(leaf);
      if (!key) return make_error(Errc::BadCertificate, key.error().detail);
      server_key_ = std::move(key).value();
      LURKT_TRY(transcript_.append(msg_bytes));
      return Bytes{};
    }
    case HandshakeType::CertificateVerify: {
      if (last != HandshakeType::Certificate) break;
      const auto* cv = msg.as<tls::CertificateVerify>();
      auto scheme = server_key_->scheme();
      if (!scheme || static_cast<std::uint16_t>(*scheme) != cv->scheme) {
        return make_error(Errc::BadServerSignature, "signature scheme does not match the certificate");
      }
      const Bytes input = tls::certificate_verify_input(transcript_.hash(suite_->hash));
      if (!server_key_->verify(input, cv->signature)) {
        return make_error(Errc::BadServerSignature, "CertificateVerify does not verify");
      }
      LURKT_TRY(transcript_.append(msg_bytes));
      return Bytes{};
    }
    case HandshakeType::Finished: {
      const bool ready = resumed_ ? last == HandshakeType::EncryptedExtensions : last == HandshakeType::CertificateVerify;
      if (!ready) break;
      const Bytes pre_fin = transcript_.bytes();
      const auto expected = ks::finished_mac(suite_->hash, server_hs_.view(), pre_fin);
      if (!ct_equal(expected, msg.as<tls::Finished>()->verify_data)) {
        return make_error(Errc::BadServerFinished, "server Finished does not verify");
      }
      LURKT_TRY(transcript_.append(msg_bytes));
      LURKT_ASSIGN(auto app, schedule_->derive_application_secrets(transcript_.bytes()));
      client_app_ = std::move(app.client);
      server_app_ = std::move(app.server);
      Bytes verify_data = ks::finished_mac(suite_->hash, client_hs_.view(), transcript_.bytes());
      if (opts_.corrupt_finished) verify_data[0] ^= 0x01;
      Bytes fin = encode_handshake(tls::Finished{std::move(verify_data)});
      LURKT_TRY(transcript_.append(fin));
      LURKT_ASSIGN(resumption_, schedule_->derive_resumption_secret(transcript_.bytes()));
      LURKT_ASSIGN(auto out, record::seal(client_hs_keys_, fin, record::ContentType::Handshake));
      client_app_keys_ = record::derive_traffic_keys(*suite_, client_app_.view());
      server_app_keys_ = record::derive_traffic_keys(*suite_, server_app_.view());
      client_hs_.wipe();
      server_hs_.wipe();
      schedule_.reset();
      if (opts_.events) {
        auto th_sh = transcript_.prefix_bytes(HandshakeType::ServerHello);
        opts_.events->append(Event{EventKind::CClientFinished, opts_.tag, Bytes(random_.begin(), random_.end()),
                                   Bytes(server_random_.begin(), server_random_.end()),
                                   event_hash(th_sh ? *th_sh : Bytes{}), event_hash(pre_fin), resumed_, 0});
      }
      state_ = State::Connected;
      return out;
    }
    default:
      break;
  }
  return make_error(Errc::StateViolation,
                    "unexpected " + std::string(tls::handshake_type_name(msg.type())) + " in the server flight");
}

Status TlsClient::on_post_handshake(ByteView msg_bytes) {
  LURKT_ASSIGN(auto msg, tls::decode_message(msg_bytes));
  const auto* nst = msg.as<tls::NewSessionTicket>();
  if (!nst) return make_error(Errc::StateViolation, "unexpected post-handshake message");
  if (nst->ticket.empty()) return make_error(Errc::MalformedPayload, "empty ticket");
  Ticket t;
  t.identity = nst->ticket;
  t.psk = ks::psk_from_resumption(suite_->hash, resumption_.view(), nst->nonce);
  t.suite = suite_->code;
  t.age_add = nst->age_add;
  t.lifetime = nst->lifetime;
  tickets_.push_back(std::move(t));
  return {};
}

Result<Bytes> TlsClient::send(ByteView plaintext) {
  if (state_ != State::Connected) return make_error(Errc::StateViolation, "handshake not complete");
  return record::seal_fragmented(client_app_keys_, plaintext, record::ContentType::ApplicationData);
}

Bytes TlsClient::take_received() { return std::exchange(received_, Bytes{}); }

Result<LoopbackResult> run_loopback(TlsClient& c, engine::EngineSession& e, const WireTap& tap, ByteView request) {
  LoopbackResult res;
  auto deliver = [&](Direction d, Bytes data) {
    std::vector<Bytes> parts;
    if (tap) {
      parts = tap(d, std::move(data));
    } else if (!data.empty()) {
      parts.push_back(std::move(data));
    }
    return parts;
  };
  LURKT_ASSIGN(Bytes pending, c.start());
  bool sent_request = false;
  for (int round = 0; round < 16; ++round) {
    Bytes back;
    for (auto& part : deliver(Direction::ToServer, std::move(pending))) {
      res.to_server.push_back(part);
      LURKT_ASSIGN(auto out, e.on_receive(part));
      append(back, out);
    }
    pending.clear();
    for (auto& part : deliver(Direction::ToClient, std::move(back))) {
      res.to_client.push_back(part);
      LURKT_ASSIGN(auto out, c.on_receive(part));
      append(pending, out);
    }
    if (c.state() == TlsClient::State::Connected && !request.empty() && !sent_request &&
        e.state() == engine::EngineSession::State::Done) {
      LURKT_ASSIGN(auto req, c.send(request));
      append(pending, req);
      sent_request = true;
    }
    const bool engine_done = e.state() == engine::EngineSession::State::Done;
    if (c.state() == TlsClient::State::Connected && engine_done && pending.empty()) {
      if (request.empty() || sent_request) return res;
    }
    if (pending.empty() && !engine_done) {
      return make_error(Errc::TargetUnavailable, "handshake stalled in engine state " +
                                                     std::string(engine::state_name(e.state())));
    }
  }
  return make_error(Errc::TargetUnavailable, "loopback did not converge");
}

Result<SessionReport> connect_tcp(const net::Endpoint& ep, ClientOptions opts, ByteView request,
                                  std::size_t expect_bytes) {
  auto sock = net::connect(ep);
  if (!sock) return make_error(Errc::TargetUnavailable, sock.error().message());
  TlsClient c(std::move(opts));
  LURKT_ASSIGN(auto ch, c.start());
  LURKT_TRY(sock->write_all(ch));
  SessionReport rep;
  bool sent = false;
  for (;;) {
    if (c.state() == TlsClient::State::Connected && !sent) {
      if (request.empty()) break;
      LURKT_ASSIGN(auto req, c.send(request));
      LURKT_TRY(sock->write_all(req));
      sent = true;
    }
    if (sent) {
      const std::size_t want = expect_bytes ? expect_bytes : 1;
      if (rep.response.size() >= want) break;
    }
    LURKT_ASSIGN(auto data, sock->read_some(1 << 16));
    if (data.empty()) {
      return make_error(Errc::TargetUnavailable,
                        "connection closed in client state " + std::string(state_name(c.state())));
    }
    LURKT_ASSIGN(auto out, c.on_receive(data));
    if (!out.empty()) LURKT_TRY(sock->write_all(out));
    append(rep.response, c.take_received());
  }
  rep.resumed = c.resumed();
  rep.psk_rejected = c.psk_rejected();
  rep.saw_certificate = c.saw_certificate();
  rep.suite = c.suite();
  rep.group = c.group();
  rep.tickets = c.tickets();
  rep.client_app = c.client_app_secret();
  rep.server_app = c.server_app_secret();
  return rep;
}

}  // namespace lurkt::client
