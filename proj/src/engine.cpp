// SPDX-License-Identifier: Apache-2.0
#include "lurkt/engine.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <charconv>
#include <thread>

namespace lurkt::engine {

using lurk::MsgType;
using tls::HandshakeType;

namespace {

constexpr std::size_t kMaxAppResponse = std::size_t{1} << 28;

Bytes encode_handshake(tls::HandshakeBody body) {
  return std::move(tls::encode_message(tls::HandshakeMessage{std::move(body)})).value();
}

bool contains(const std::vector<std::uint16_t>& v, std::uint16_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

Error cs_error(const Error& e) {
  if (e.code == Errc::CsUnavailable || e.code == Errc::CsRejected) return e;
  return make_error(Errc::CsRejected, std::string(errc_name(e.code)) + ": " + e.detail);
}

Bytes prefix_or_empty(const tls::HandshakeTranscript& t, HandshakeType upto) {
  auto p = t.prefix_bytes(upto);
  return p ? std::move(p).value() : Bytes{};
}

}  // namespace

Bytes default_app(ByteView request) {
  std::string_view text(reinterpret_cast<const char*>(request.data()), request.size());
  if (text.rfind("GET ", 0) == 0) {
    std::string_view num = text.substr(4);
    while (!num.empty() && (num.back() == '\n' || num.back() == '\r' || num.back() == ' ')) num.remove_suffix(1);
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
    if (ec == std::errc() && p == num.data() + num.size() && n <= kMaxAppResponse) {
      Bytes out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>('a' + i % 26);
      return out;
    }
  }
  return Bytes(request.begin(), request.end());
}

MonolithicBackend::MonolithicBackend(crypto::SigningKey sk, std::vector<Bytes> cert_chain, std::size_t psk_capacity)
    : sk_(std::move(sk)), chain_(std::move(cert_chain)), store_(psk_capacity, true) {}

Status MonolithicBackend::store(const lurk::SessionId& id, ByteView psk, crypto::HashAlg hash) {
  std::lock_guard lock(mu_);
  return store_.put(id, psk, hash, 0);
}

std::optional<cs::PskStore::Found> MonolithicBackend::lookup(ByteView id) const {
  std::lock_guard lock(mu_);
  return store_.get(id);
}

Status validate(const EngineOptions& opts) {
  if (config_for(opts.cert_row).mode != AuthMode::Cert) {
    return make_error(Errc::InvalidConfig, std::string(row_name(opts.cert_row)) + " is not a certificate row");
  }
  if (opts.psk_row && config_for(*opts.psk_row).mode != AuthMode::Psk) {
    return make_error(Errc::InvalidConfig, std::string(row_name(*opts.psk_row)) + " is not a PSK row");
  }
  if (opts.cert_chain.empty()) return make_error(Errc::InvalidConfig, "engine needs the public certificate chain");
  if (opts.suites.empty() || opts.groups.empty()) return make_error(Errc::InvalidConfig, "no suites or groups");
  return {};
}

std::string_view state_name(EngineSession::State s) {
  switch (s) {
    case EngineSession::State::AwaitClientHello: return "AwaitCH";
    case EngineSession::State::SentFlight: return "SentFlight";
    case EngineSession::State::AwaitFinished: return "AwaitFin";
    case EngineSession::State::Done: return "Done";
    case EngineSession::State::Failed: return "Failed";
  }
  return "?";
}

EngineSession::EngineSession(const EngineOptions& opts, channel::CsClient& cs)
    : opts_(opts), cs_(&cs), row_(opts.cert_row) {}

EngineSession::EngineSession(const EngineOptions& opts, MonolithicBackend& mono)
    : opts_(opts), mono_(&mono), row_(opts.cert_row) {
  opts_.cert_chain = mono.cert_chain();
  opts_.scheme = mono.signing_key().scheme();
}

EngineSession::~EngineSession() { erase_secrets(); }

void EngineSession::erase_secrets() {
  n_e_.erase();
  if (eph_) eph_->priv.wipe();
  ke_.wipe();
  if (psk_) psk_->wipe();
  binder_key_.wipe();
  schedule_.reset();
  client_hs_.wipe();
  server_hs_.wipe();
  client_hs_keys_.key.wipe();
  client_hs_keys_.iv.wipe();
}

void EngineSession::fail(const Error& e) {
  state_ = State::Failed;
  failure_ = e;
  erase_secrets();
  client_app_.wipe();
  server_app_.wipe();
  client_app_keys_.key.wipe();
  client_app_keys_.iv.wipe();
  server_app_keys_.key.wipe();
  server_app_keys_.iv.wipe();
}

Bytes EngineSession::memory_snapshot() const {
  Bytes out = transcript_.bytes();
  append(out, n_e_.view());
  append(out, server_random_);
  append(out, server_share_);
  append(out, cs_sid_.view());
  if (eph_) append(out, eph_->priv.view());
  append(out, ke_.view());
  if (psk_) append(out, psk_->view());
  append(out, binder_key_.view());
  if (schedule_) {
    append(out, schedule_->early_secret());
    append(out, schedule_->handshake_secret());
    append(out, schedule_->master_secret());
  }
  for (const auto* s : {&client_hs_, &server_hs_, &client_app_, &server_app_}) append(out, s->view());
  for (const auto* k : {&client_hs_keys_, &client_app_keys_, &server_app_keys_}) {
    append(out, k->key.view());
    append(out, k->iv.view());
  }
  append(out, ch_random_);
  return out;
}

Result<Bytes> EngineSession::on_receive(ByteView data) {
  if (state_ == State::Failed) return make_error(Errc::StateViolation, "session already failed");
  auto r = receive(data);
  if (!r) fail(r.error());
  return r;
}

Result<Bytes> EngineSession::receive(ByteView data) {
  records_.feed(data);
  Bytes out;
  for (;;) {
    LURKT_ASSIGN(auto rec, records_.next());
    if (!rec) break;
    if (rec->type == record::ContentType::ChangeCipherSpec && state_ != State::Done) continue;
    switch (state_) {
      case State::AwaitClientHello: {
        if (rec->type != record::ContentType::Handshake) {
          return make_error(Errc::StateViolation, "expected a plaintext ClientHello record");
        }
        handshake_.feed(rec->fragment());
        LURKT_ASSIGN(auto msg, handshake_.next());
        if (!msg) continue;
        if (!handshake_.empty()) return make_error(Errc::StateViolation, "data after ClientHello");
        LURKT_ASSIGN(auto flight, on_client_hello(*msg));
        append(out, flight);
        break;
      }
      case State::AwaitFinished: {
        if (rec->type != record::ContentType::ApplicationData) {
          return make_error(Errc::StateViolation, "expected a protected record");
        }
        LURKT_ASSIGN(auto opened, record::open(client_hs_keys_, rec->bytes));
        if (opened.type != record::ContentType::Handshake) {
          return make_error(Errc::StateViolation, "expected client Finished");
        }
        handshake_.feed(opened.plaintext);
        LURKT_ASSIGN(auto msg, handshake_.next());
        if (!msg) continue;
        if (!handshake_.empty()) return make_error(Errc::StateViolation, "data after client Finished");
        LURKT_ASSIGN(auto tail, on_client_finished(*msg));
        append(out, tail);
        break;
      }
      case State::Done: {
        if (rec->type != record::ContentType::ApplicationData) {
          return make_error(Errc::StateViolation, "unprotected record after handshake");
        }
        LURKT_ASSIGN(auto opened, record::open(client_app_keys_, rec->bytes));
        if (opened.type == record::ContentType::Alert) continue;
        if (opened.type != record::ContentType::ApplicationData) {
          return make_error(Errc::StateViolation, "post-handshake messages are not supported");
        }
        LURKT_ASSIGN(auto reply, on_app_data(opened.plaintext));
        append(out, reply);
        break;
      }
      default:
        return make_error(Errc::StateViolation, "record in state " + std::string(state_name(state_)));
    }
  }
  return out;
}

Result<lurk::LurkMessage> EngineSession::call(MsgType t, Bytes payload) {
  exchanges_.push_back(t);
  auto r = cs_->call(t, cs_sid_, std::move(payload));
  if (!r) return cs_error(r.error());
  cs_sid_ = r->session_id;
  return r;
}

void EngineSession::emit(EventKind k, ByteView through) const {
  if (!opts_.events) return;
  Event e{k, opts_.tag, ch_random_, Bytes(server_random_.begin(), server_random_.end()),
          event_hash(prefix_or_empty(transcript_, HandshakeType::ServerHello)),
          k == EventKind::ESentCrSrToCs ? Bytes{} : event_hash(through), resumed_, 0};
  opts_.events->append(std::move(e));
}

Status EngineSession::try_resumption(const tls::ClientHello& ch, ByteView ch_bytes) {
  const auto* psk_ext = tls::find_extension(ch.extensions, tls::ext::kPreSharedKey);
  const auto* modes_ext = tls::find_extension(ch.extensions, tls::ext::kPskKeyExchangeModes);
  if (!opts_.psk_row || !psk_ext || !modes_ext) return {};
  LURKT_ASSIGN(auto modes, tls::parse_psk_modes(modes_ext->data));
  if (std::find(modes.begin(), modes.end(), tls::kPskDheKe) == modes.end()) return {};
  LURKT_ASSIGN(auto offered, tls::parse_offered_psks(psk_ext->data));
  if (offered.identities.empty() || offered.binders.empty()) {
    return make_error(Errc::MalformedExtension, "empty pre_shared_key offer");
  }
  LURKT_ASSIGN(auto truncated, tls::truncate_for_binders(ch_bytes));
  const Bytes& id = offered.identities.front().identity;
  Bytes binder_mac;
  if (mono_) {
    auto found = mono_->lookup(id);
    if (!found || found->hash != suite_->hash) {
      fell_back_ = true;
      return {};
    }
    auto b = ks::binder_key_and_mac(suite_->hash, found->psk.view(), truncated);
    binder_key_ = std::move(b.binder_key);
    binder_mac = std::move(b.binder_mac);
    psk_ = std::move(found->psk);
  } else {
    lurk::EarlySecretRequest req{static_cast<std::uint8_t>(*opts_.psk_row), suite_->code, id, truncated};
    LURKT_ASSIGN(auto payload, req.encode());
    exchanges_.push_back(MsgType::EarlySecret);
    auto resp = cs_->call(MsgType::EarlySecret, lurk::SessionId{}, std::move(payload));
    if (!resp) {
      if (resp.code() == Errc::UnknownPskId) {
        exchanges_.pop_back();
        fell_back_ = true;
        return {};
      }
      return cs_error(resp.error());
    }
    cs_sid_ = resp->session_id;
    LURKT_ASSIGN(auto early, lurk::EarlySecretResponse::decode(resp->payload));
    binder_key_ = std::move(early.binder_key);
    binder_mac = std::move(early.binder_mac);
  }
  if (!ct_equal(binder_mac, offered.binders.front())) {
    return make_error(Errc::BadBinder, "PSK binder does not verify");
  }
  resumed_ = true;
  row_ = *opts_.psk_row;
  return {};
}

Result<Bytes> EngineSession::on_client_hello(ByteView ch_bytes) {
  LURKT_ASSIGN(auto msg, tls::decode_message(ch_bytes));
  const auto* ch = msg.as<tls::ClientHello>();
  if (!ch) return make_error(Errc::StateViolation, "first handshake message is not ClientHello");
  ch_random_.assign(ch->random.begin(), ch->random.end());

  const auto* versions_ext = tls::find_extension(ch->extensions, tls::ext::kSupportedVersions);
  if (!versions_ext) return make_error(Errc::NegotiationFailure, "ClientHello does not offer TLS 1.3");
  LURKT_ASSIGN(auto versions, tls::parse_client_versions(versions_ext->data));
  if (std::find(versions.begin(), versions.end(), tls::kTls13) == versions.end()) {
    return make_error(Errc::NegotiationFailure, "ClientHello does not offer TLS 1.3");
  }
  for (auto code : ch->cipher_suites) {
    if (contains(opts_.suites, code) && ks::find_suite(code)) {
      suite_ = ks::find_suite(code);
      break;
    }
  }
  if (!suite_) return make_error(Errc::NegotiationFailure, "no common cipher suite");
  const auto* ks_ext = tls::find_extension(ch->extensions, tls::ext::kKeyShare);
  if (!ks_ext) return make_error(Errc::NegotiationFailure, "ClientHello has no key_share");
  LURKT_ASSIGN(auto shares, tls::parse_client_key_shares(ks_ext->data));
  const tls::KeyShareEntry* client_share = nullptr;
  for (const auto& s : shares) {
    if (contains(opts_.groups, s.group) && crypto::group_supported(s.group)) {
      client_share = &s;
      break;
    }
  }
  if (!client_share) return make_error(Errc::NegotiationFailure, "no key share on a supported group");
  group_ = client_share->group;

  LURKT_TRY(try_resumption(*ch, ch_bytes));
  const CsConfig cfg = config_for(row_);
  const std::uint8_t wire_row = static_cast<std::uint8_t>(row_);

  freshness::EngineNonce::generate_into(n_e_);
  server_random_ = n_e_.server_random();

  if (!mono_ && cfg.cs_generates_ecdhe) {
    lurk::EcdheRequest req{wire_row, group_};
    LURKT_ASSIGN(auto resp, call(MsgType::GetEcdhe, req.encode()));
    LURKT_ASSIGN(auto share, lurk::EcdheResponse::decode(resp.payload));
    if (share.key_share.size() != crypto::group_public_len(static_cast<crypto::Group>(group_))) {
      return make_error(Errc::CsRejected, "service key share has the wrong length");
    }
    server_share_ = std::move(share.key_share);
  } else {
    eph_ = crypto::generate_keypair(static_cast<crypto::Group>(group_));
    auto ke = crypto::ecdh(*eph_, client_share->key_exchange);
    if (!ke) return make_error(Errc::NegotiationFailure, "client key share: " + ke.error().detail);
    ke_ = std::move(ke).value();
    server_share_ = eph_->pub;
  }

  tls::ServerHello sh;
  sh.random = server_random_;
  sh.legacy_session_id_echo = ch->legacy_session_id;
  sh.cipher_suite = suite_->code;
  sh.extensions.push_back(tls::make_server_key_share(tls::KeyShareEntry{group_, server_share_}));
  sh.extensions.push_back(tls::make_server_version());
  if (resumed_) sh.extensions.push_back(tls::make_selected_psk(0));
  Bytes sh_bytes = encode_handshake(sh);
  LURKT_TRY(transcript_.append(ch_bytes));
  LURKT_TRY(transcript_.append(sh_bytes));
  const Bytes ch_sh = transcript_.bytes();

  if (!mono_ && cfg.cs_generates_handshake) {
    emit(EventKind::ESentCrSrToCs, {});
    lurk::HandshakeSecretsRequest req{wire_row, suite_->code, SecretBytes(n_e_.view()), ch_sh,
                                      cfg.cs_generates_ecdhe ? SecretBytes() : SecretBytes(ke_.view())};
    LURKT_ASSIGN(auto payload, req.encode());
    LURKT_ASSIGN(auto resp, call(MsgType::GetHandshakeSecrets, std::move(payload)));
    LURKT_ASSIGN(auto hs, lurk::HandshakeSecretsResponse::decode(resp.payload));
    if (hs.client_hs.size() != crypto::hash_len(suite_->hash) || hs.server_hs.size() != hs.client_hs.size()) {
      return make_error(Errc::CsRejected, "handshake secrets have the wrong length");
    }
    client_hs_ = std::move(hs.client_hs);
    server_hs_ = std::move(hs.server_hs);
  } else {
    schedule_.emplace(suite_->hash);
    ks::SharedKeyMaterial km{SecretBytes(ke_.view()), psk_};
    LURKT_ASSIGN(auto hs, schedule_->derive_handshake_secrets(km, ch_sh));
    client_hs_ = std::move(hs.client);
    server_hs_ = std::move(hs.server);
  }

  LURKT_TRY(transcript_.append(encode_handshake(tls::EncryptedExtensions{})));
  const std::size_t flight_start = sh_bytes.size() + ch_bytes.size();

  if (cfg.mode == AuthMode::Cert) {
    tls::Certificate cert;
    for (const auto& der : opts_.cert_chain) cert.entries.push_back(tls::CertificateEntry{der, {}});
    LURKT_TRY(transcript_.append(encode_handshake(std::move(cert))));
    const Bytes through_cert = transcript_.bytes();
    const auto scheme = static_cast<std::uint16_t>(opts_.scheme);
    if (mono_) {
      Bytes psign = mono_->signing_key().sign(tls::certificate_verify_input(crypto::digest(suite_->hash, through_cert)));
      LURKT_TRY(transcript_.append(encode_handshake(tls::CertificateVerify{scheme, std::move(psign)})));
    } else {
      if (cfg.keyless()) emit(EventKind::ESentCrSrToCs, {});
      lurk::SigAndAppRequest req{wire_row, suite_->code, scheme, SecretBytes(n_e_.view()), through_cert};
      LURKT_ASSIGN(auto payload, req.encode());
      LURKT_ASSIGN(auto resp, call(MsgType::GetSigAndApp, std::move(payload)));
      LURKT_ASSIGN(auto sig, lurk::SigAndAppResponse::decode(resp.payload));
      if (cfg.keyless()) {
        if (sig.psign.empty()) return make_error(Errc::CsRejected, "empty signature");
        LURKT_TRY(transcript_.append(encode_handshake(tls::CertificateVerify{scheme, std::move(sig.psign)})));
        emit(EventKind::ERecvdCv, transcript_.bytes());
      } else {
        auto cv = tls::decode_message(sig.certificate_verify);
        auto fin = tls::decode_message(sig.server_finished);
        if (!cv || !cv->as<tls::CertificateVerify>() || !fin || !fin->as<tls::Finished>()) {
          return make_error(Errc::CsRejected, "service returned malformed CertificateVerify/Finished");
        }
        LURKT_TRY(transcript_.append(sig.certificate_verify));
        emit(EventKind::ERecvdCv, transcript_.bytes());
        const auto expected = ks::finished_mac(suite_->hash, server_hs_.view(), transcript_.bytes());
        if (!ct_equal(expected, fin->as<tls::Finished>()->verify_data)) {
          return make_error(Errc::CsRejected, "service Finished does not match the handshake secrets");
        }
        emit(EventKind::EPreServerFinished, transcript_.bytes());
        LURKT_TRY(transcript_.append(sig.server_finished));
        client_app_ = std::move(sig.client_app);
        server_app_ = std::move(sig.server_app);
      }
    }
  }

  if (!transcript_.contains(HandshakeType::Finished)) {
    emit(EventKind::EPreServerFinished, transcript_.bytes());
    Bytes fin = encode_handshake(tls::Finished{ks::finished_mac(suite_->hash, server_hs_.view(), transcript_.bytes())});
    LURKT_TRY(transcript_.append(fin));
    if (schedule_) {
      LURKT_ASSIGN(auto app, schedule_->derive_application_secrets(transcript_.bytes()));
      client_app_ = std::move(app.client);
      server_app_ = std::move(app.server);
    } else {
      lurk::AppSecretRequest req{SecretBytes(n_e_.view()), transcript_.bytes()};
      LURKT_ASSIGN(auto payload, req.encode());
      LURKT_ASSIGN(auto resp, call(MsgType::GetAppSecret, std::move(payload)));
      LURKT_ASSIGN(auto app, lurk::AppSecretResponse::decode(resp.payload));
      client_app_ = std::move(app.client_app);
      server_app_ = std::move(app.server_app);
    }
  }
  if (client_app_.size() != crypto::hash_len(suite_->hash) || server_app_.size() != client_app_.size()) {
    return make_error(Errc::CsRejected, "application secrets have the wrong length");
  }

  state_ = State::SentFlight;
  const Bytes all = transcript_.bytes();
  auto server_hs_keys = record::derive_traffic_keys(*suite_, server_hs_.view());
  client_hs_keys_ = record::derive_traffic_keys(*suite_, client_hs_.view());
  client_app_keys_ = record::derive_traffic_keys(*suite_, client_app_.view());
  server_app_keys_ = record::derive_traffic_keys(*suite_, server_app_.view());
  Bytes out = record::plaintext_records(record::ContentType::Handshake, sh_bytes);
  LURKT_ASSIGN(auto sealed, record::seal_fragmented(server_hs_keys, ByteView(all).subspan(flight_start),
                                                    record::ContentType::Handshake));
  append(out, sealed);
  state_ = State::AwaitFinished;
  return out;
}

Result<Bytes> EngineSession::on_client_finished(ByteView fin_bytes) {
  LURKT_ASSIGN(auto msg, tls::decode_message(fin_bytes));
  const auto* fin = msg.as<tls::Finished>();
  if (!fin) return make_error(Errc::StateViolation, "expected client Finished");
  const auto expected = ks::finished_mac(suite_->hash, client_hs_.view(), transcript_.bytes());
  if (!ct_equal(expected, fin->verify_data)) return make_error(Errc::BadClientFinished, "client Finished mismatch");
  LURKT_TRY(transcript_.append(fin_bytes));

  Bytes out;
  const CsConfig cfg = config_for(row_);
  if (cfg.cs_generates_resumption) {
    Bytes nonce = crypto::random_bytes(8);
    Bytes ticket;
    if (mono_) {
      LURKT_ASSIGN(auto r, schedule_->derive_resumption_secret(transcript_.bytes()));
      auto psk = ks::psk_from_resumption(suite_->hash, r.view(), nonce);
      auto id = lurk::SessionId::random();
      LURKT_TRY(mono_->store(id, psk.view(), suite_->hash));
      ticket.assign(id.bytes.begin(), id.bytes.end());
    } else {
      lurk::TicketRequest req{SecretBytes(n_e_.view()), transcript_.bytes(), nonce};
      LURKT_ASSIGN(auto payload, req.encode());
      const MsgType t = cfg.mode == AuthMode::Cert ? MsgType::NewTicket : MsgType::GetResSecret;
      LURKT_ASSIGN(auto resp, call(t, std::move(payload)));
      LURKT_ASSIGN(auto tr, lurk::TicketResponse::decode(resp.payload));
      ticket = std::move(tr.psk_id);
    }
    tls::NewSessionTicket nst;
    nst.lifetime = kTicketLifetime;
    Bytes age = crypto::random_bytes(4);
    nst.age_add = (std::uint32_t{age[0]} << 24) | (std::uint32_t{age[1]} << 16) | (std::uint32_t{age[2]} << 8) | age[3];
    nst.nonce = std::move(nonce);
    nst.ticket = std::move(ticket);
    LURKT_ASSIGN(auto sealed, record::seal(server_app_keys_, encode_handshake(std::move(nst)),
                                           record::ContentType::Handshake));
    out = std::move(sealed);
  }
  erase_secrets();
  state_ = State::Done;
  return out;
}

Result<Bytes> EngineSession::on_app_data(ByteView plaintext) {
  Bytes reply = opts_.app ? opts_.app(plaintext) : default_app(plaintext);
  if (reply.empty()) return Bytes{};
  return record::seal_fragmented(server_app_keys_, reply, record::ContentType::ApplicationData);
}

Result<EngineSession::Attestation> EngineSession::attest() {
  if (!cs_) return make_error(Errc::StateViolation, "monolithic sessions have no service to attest");
  if (state_ != State::Done) return make_error(Errc::StateViolation, "attestation needs a completed session");
  auto r = cs_->call(MsgType::Attest, cs_sid_, {});
  if (!r) return cs_error(r.error());
  LURKT_ASSIGN(auto quote, lurk::Quote::decode(r->payload));
  // The service context ends at its last response: the client Finished for
  // ticket-issuing rows, CertificateVerify for keyless, else server Finished.
  const CsConfig cfg = config_for(row_);
  Bytes context;
  if (cfg.cs_generates_resumption) {
    context = transcript_.bytes();
  } else {
    LURKT_ASSIGN(context, transcript_.prefix_bytes(cfg.keyless() ? HandshakeType::CertificateVerify
                                                                  : HandshakeType::Finished));
  }
  return Attestation{std::move(quote), std::move(context)};
}

EngineServer::EngineServer(EngineOptions opts, channel::CsClient& cs) : opts_(std::move(opts)), cs_(&cs) {}
EngineServer::EngineServer(EngineOptions opts, MonolithicBackend& mono) : opts_(std::move(opts)), mono_(&mono) {}

EngineServer::~EngineServer() { stop(); }

Status EngineServer::listen(const net::Endpoint& ep) {
  LURKT_ASSIGN(listener_, net::listen(ep));
  return {};
}

std::uint16_t EngineServer::port() const { return net::local_port(listener_); }

void EngineServer::stop() {
  stopping_ = true;
  listener_.shutdown();
  std::lock_guard lock(mu_);
  for (int fd : live_fds_) ::shutdown(fd, SHUT_RDWR);
}

void EngineServer::serve(std::size_t max_connections) {
  std::vector<std::thread> threads;
  std::size_t accepted = 0;
  while (!stopping_) {
    auto conn = net::accept(listener_);
    if (!conn || stopping_) break;
    {
      std::lock_guard lock(mu_);
      live_fds_.push_back(conn->fd());
    }
    threads.emplace_back([this, s = std::move(conn).value()]() mutable { serve_connection(std::move(s)); });
    if (max_connections != 0 && ++accepted >= max_connections) break;
  }
  for (auto& t : threads) t.join();
}

void EngineServer::serve_connection(net::Socket s) {
  const int fd = s.fd();
  std::unique_ptr<EngineSession> session =
      mono_ ? std::make_unique<EngineSession>(opts_, *mono_) : std::make_unique<EngineSession>(opts_, *cs_);
  for (;;) {
    auto data = s.read_some(1 << 16);
    if (!data || data->empty()) break;
    auto out = session->on_receive(*data);
    if (!out) {
      if (log) log("engine: " + out.error().message());
      break;
    }
    if (!out->empty() && !s.write_all(*out)) break;
  }
  if (session->state() == EngineSession::State::Done) {
    ++completed_;
    if (on_complete) on_complete(*session);
  } else {
    ++failed_;
  }
  std::lock_guard lock(mu_);
  live_fds_.erase(std::remove(live_fds_.begin(), live_fds_.end(), fd), live_fds_.end());
}

}  // namespace lurkt::engine
