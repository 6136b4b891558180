// SPDX-License-Identifier: Apache-2.0
#include "lurkt/crypto_service.hpp"

#include <algorithm>
#include <initializer_list>

#include "lurkt/freshness.hpp"

namespace lurkt::cs {

using lurk::LurkMessage;
using lurk::MsgType;
using lurk::SessionId;
using tls::HandshakeType;

namespace {

constexpr std::string_view kMeasurementLabel = "lurkt crypto service v1";
constexpr std::size_t kUsedNonceLimit = 1 << 20;
constexpr std::size_t kExpiredLimit = 1 << 16;

bool starts_with(ByteView whole, ByteView prefix) {
  return whole.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), whole.begin());
}

// Splits `bytes` into messages of exactly the given types.
Result<std::vector<ByteView>> expect_messages(ByteView bytes, std::initializer_list<HandshakeType> types) {
  auto msgs = tls::split_messages(bytes);
  if (!msgs) return make_error(Errc::TranscriptMismatch, "transcript framing: " + msgs.error().message());
  if (msgs->size() != types.size()) {
    return make_error(Errc::TranscriptMismatch, "transcript holds " + std::to_string(msgs->size()) +
                                                    " messages, expected " + std::to_string(types.size()));
  }
  std::size_t i = 0;
  for (auto t : types) {
    if ((*msgs)[i][0] != static_cast<std::uint8_t>(t)) {
      return make_error(Errc::TranscriptMismatch, "transcript message " + std::to_string(i) + " is not " +
                                                      std::string(tls::handshake_type_name(t)));
    }
    ++i;
  }
  return msgs;
}

template <class T>
Result<T> decode_as(ByteView bytes) {
  auto m = tls::decode_message(bytes);
  if (!m) return make_error(Errc::TranscriptMismatch, "transcript message: " + m.error().message());
  const T* v = m->template as<T>();
  if (!v) return make_error(Errc::TranscriptMismatch, "unexpected transcript message");
  return *v;
}

Result<SecretBytes> ecdh_with_client(const crypto::KeyPair& eph, const tls::ClientHello& ch) {
  const auto* ext = tls::find_extension(ch.extensions, tls::ext::kKeyShare);
  if (!ext) return make_error(Errc::MissingKeyShare, "ClientHello has no key_share");
  auto shares = tls::parse_client_key_shares(ext->data);
  if (!shares) return make_error(Errc::MissingKeyShare, "ClientHello key_share: " + shares.error().message());
  for (const auto& s : *shares) {
    if (s.group == static_cast<std::uint16_t>(eph.group)) {
      auto ke = crypto::ecdh(eph, s.key_exchange);
      if (!ke) return make_error(Errc::MissingKeyShare, ke.error().detail);
      return ke;
    }
  }
  return make_error(Errc::MissingKeyShare, "no client share for " + crypto::group_name(eph.group));
}

Bytes encode_handshake(tls::HandshakeBody body) {
  return std::move(tls::encode_message(tls::HandshakeMessage{std::move(body)})).value();
}

const ks::CipherSuite* suite_or_null(std::uint16_t code) { return ks::find_suite(code); }

Result<const ks::CipherSuite*> require_suite(std::uint16_t code) {
  const auto* s = suite_or_null(code);
  if (!s) return make_error(Errc::ConfigViolation, "unsupported cipher suite " + std::to_string(code));
  return s;
}

Result<Bytes> verify_data_of(ByteView finished_msg) {
  LURKT_ASSIGN(auto fin, decode_as<tls::Finished>(finished_msg));
  return fin.verify_data;
}

}  // namespace

Bytes build_measurement() { return crypto::digest(crypto::HashAlg::Sha256, as_bytes(kMeasurementLabel)); }

CsIdentity CsIdentity::generate(crypto::SigScheme scheme, const std::string& common_name) {
  CsIdentity id;
  id.sk = crypto::SigningKey::generate(scheme);
  id.cert_chain.push_back(std::move(crypto::self_signed_certificate(id.sk, common_name)).value());
  id.attest_sk = crypto::SigningKey::generate(crypto::SigScheme::Ed25519);
  id.measurement = build_measurement();
  return id;
}

Result<CsIdentity> CsIdentity::load(const std::string& key_path, const std::string& cert_path,
                                    const std::string& attest_key_path) {
  CsIdentity id;
  LURKT_ASSIGN(auto key_pem, crypto::read_file(key_path));
  auto sk = crypto::SigningKey::from_pem(key_pem);
  secure_wipe(key_pem.data(), key_pem.size());
  if (!sk) return sk.error();
  id.sk = std::move(sk).value();
  LURKT_ASSIGN(auto cert_pem, crypto::read_file(cert_path));
  LURKT_ASSIGN(id.cert_chain, crypto::certificates_from_pem(cert_pem));
  if (id.cert_chain.empty()) return make_error(Errc::BadCertificate, "no certificate in " + cert_path);
  LURKT_ASSIGN(auto leaf_key, crypto::PublicKey::from_certificate(id.cert_chain.front()));
  if (leaf_key.raw() != id.sk.public_key().raw()) {
    return make_error(Errc::BadCertificate, "leaf certificate does not match the signing key");
  }
  if (attest_key_path.empty()) {
    id.attest_sk = crypto::SigningKey::generate(crypto::SigScheme::Ed25519);
  } else {
    LURKT_ASSIGN(auto attest_pem, crypto::read_file(attest_key_path));
    auto ak = crypto::SigningKey::from_pem(attest_pem);
    secure_wipe(attest_pem.data(), attest_pem.size());
    if (!ak) return ak.error();
    id.attest_sk = std::move(ak).value();
  }
  id.measurement = build_measurement();
  return id;
}

Bytes CsIdentity::certificate_message() const {
  tls::Certificate cert;
  for (const auto& der : cert_chain) cert.entries.push_back(tls::CertificateEntry{der, {}});
  return encode_handshake(std::move(cert));
}

PskStore::PskStore(std::size_t capacity, bool evict_oldest) : capacity_(capacity), evict_(evict_oldest) {}

PskStore::~PskStore() {
  for (auto& e : order_) secure_wipe(e.psk.data(), e.psk.size());
}

void PskStore::erase_front() {
  auto& e = order_.front();
  index_.erase(e.id);
  secure_wipe(e.psk.data(), e.psk.size());
  order_.pop_front();
}

Status PskStore::put(const SessionId& id, ByteView psk, crypto::HashAlg hash, std::int64_t now_ms) {
  if (psk.size() > PskEntry{}.psk.size()) return make_error(Errc::LengthOverflow, "PSK longer than entry buffer");
  if (auto it = index_.find(id.bytes); it != index_.end()) {
    secure_wipe(it->second->psk.data(), it->second->psk.size());
    order_.erase(it->second);
    index_.erase(it);
  }
  if (capacity_ == 0) return make_error(Errc::StoreFull, "PSK store has no capacity");
  if (order_.size() >= capacity_) {
    if (!evict_) return make_error(Errc::StoreFull, "PSK store full");
    erase_front();
    ++evictions_;
  }
  PskEntry e;
  e.id = id.bytes;
  std::copy(psk.begin(), psk.end(), e.psk.begin());
  e.psk_len = static_cast<std::uint8_t>(psk.size());
  e.hash = hash;
  e.created_ms = now_ms;
  order_.push_back(e);
  secure_wipe(e.psk.data(), e.psk.size());
  index_[id.bytes] = std::prev(order_.end());
  return {};
}

std::optional<PskStore::Found> PskStore::get(ByteView id) const {
  if (id.size() != 8) return std::nullopt;
  std::array<std::uint8_t, 8> key{};
  std::copy(id.begin(), id.end(), key.begin());
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  const auto& e = *it->second;
  return Found{SecretBytes(ByteView(e.psk.data(), e.psk_len)), e.hash};
}

bool PskStore::contains(ByteView id) const { return get(id).has_value(); }

void PskStore::for_each(const std::function<void(ByteView, ByteView)>& f) const {
  for (const auto& e : order_) f(e.id, ByteView(e.psk.data(), e.psk_len));
}

CryptoService::CryptoService(CsIdentity identity, CsOptions options)
    : identity_(std::move(identity)),
      opts_(std::move(options)),
      certificate_msg_(identity_.certificate_message()),
      psks_(opts_.psk_capacity, opts_.psk_evict_oldest) {
  observe("sk", identity_.sk.raw_private().view());
  observe("attest_sk", identity_.attest_sk.raw_private().view());
}

CryptoService::~CryptoService() = default;

void CryptoService::observe(std::string_view kind, ByteView secret) const {
  if (opts_.secret_observer) opts_.secret_observer(kind, secret);
  if (opts_.debug_leak_secrets && opts_.log) opts_.log(std::string("debug ") + std::string(kind) + "=" + to_hex(secret));
}

std::int64_t CryptoService::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(opts_.now().time_since_epoch()).count();
}

Bytes CryptoService::handle(ByteView request_frame) {
  auto req = lurk::decode_lurk(request_frame);
  if (!req) {
    std::lock_guard lock(mu_);
    ++handled_;
    return std::move(lurk::encode_lurk(lurk::make_error_message(SessionId{}, req.error()))).value();
  }
  auto resp = dispatch(*req);
  secure_wipe(req->payload.data(), req->payload.size());
  if (!resp) {
    if (opts_.log) opts_.log("reject " + std::string(lurk::msg_type_name(req->request_type())) + " sid=" +
                             req->session_id.hex() + ": " + resp.error().message());
    return std::move(lurk::encode_lurk(lurk::make_error_message(req->session_id, resp.error()))).value();
  }
  auto out = std::move(lurk::encode_lurk(*resp)).value();
  secure_wipe(resp->payload.data(), resp->payload.size());
  return out;
}

Result<LurkMessage> CryptoService::dispatch(const LurkMessage& request) {
  std::lock_guard lock(mu_);
  ++handled_;
  purge();
  if (request.version != lurk::kVersion) return make_error(Errc::BadVersion, "LURK version");
  if (!lurk::is_request_type(request.type)) return make_error(Errc::UnknownType, "not a request type");
  Result<LurkMessage> r = make_error(Errc::UnknownType, "unhandled");
  switch (request.request_type()) {
    case MsgType::GetEcdhe: r = on_ecdhe(request); break;
    case MsgType::GetHandshakeSecrets: r = on_handshake(request); break;
    case MsgType::GetSigAndApp: r = on_sig(request); break;
    case MsgType::NewTicket: r = on_ticket(request, false); break;
    case MsgType::EarlySecret: r = on_early(request); break;
    case MsgType::GetAppSecret: r = on_app(request); break;
    case MsgType::GetResSecret: r = on_ticket(request, true); break;
    case MsgType::Attest: r = on_attest(request); break;
    case MsgType::Error: break;
  }
  if (r) ++accepted_;
  return r;
}

Result<ConfigRow> CryptoService::pinned_row(std::uint8_t wire_row, MsgType t) const {
  auto row = row_from_wire(wire_row);
  if (!row) return make_error(Errc::ConfigViolation, row.error().detail);
  if (std::find(opts_.allowed_rows.begin(), opts_.allowed_rows.end(), *row) == opts_.allowed_rows.end()) {
    return make_error(Errc::ConfigViolation, std::string(row_name(*row)) + " is not enabled on this service");
  }
  if (!accepts(*row, t)) {
    return make_error(Errc::ConfigViolation,
                      std::string(lurk::msg_type_name(t)) + " is not part of " + std::string(row_name(*row)));
  }
  return *row;
}

Result<CryptoService::Session*> CryptoService::live(const SessionId& sid, MsgType t) {
  if (sid.is_zero()) {
    return make_error(Errc::UnknownSession, std::string(lurk::msg_type_name(t)) + " requires an open session");
  }
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) return make_error(Errc::UnknownSession, "session " + sid.hex());
  if (!accepts(it->second.row, t)) {
    return make_error(Errc::ConfigViolation,
                      std::string(lurk::msg_type_name(t)) + " is not part of " + std::string(row_name(it->second.row)));
  }
  return &it->second;
}

Status CryptoService::check_fresh(ByteView n_e, ByteView n_s) const {
  if (opts_.test_bypass_freshness) return {};
  auto ok = freshness::verify(n_e, n_s);
  if (!ok || !*ok) return make_error(Errc::FreshnessViolation, "ServerHello.random is not phi(N_E)");
  return {};
}

bool CryptoService::n_s_used(const tls::Random& n_s) const { return used_n_s_.count(n_s) != 0; }

void CryptoService::mark_n_s_used(const tls::Random& n_s) {
  if (!used_n_s_.insert(n_s).second) return;
  used_n_s_order_.push_back(n_s);
  if (used_n_s_order_.size() > kUsedNonceLimit) {
    used_n_s_.erase(used_n_s_order_.front());
    used_n_s_order_.pop_front();
  }
}

SessionId CryptoService::fresh_session_id() const {
  for (;;) {
    auto id = SessionId::random();
    if (!sessions_.count(id) && !cache_index_.count(id) && !psks_.contains(id.view())) return id;
  }
}

void CryptoService::commit(Session&& s) {
  s.last_used = opts_.now();
  auto id = s.id;
  sessions_.insert_or_assign(id, std::move(s));
}

void CryptoService::complete(const SessionId& sid) {
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) return;
  Session& s = it->second;
  CacheEntry e{s.row, s.suite, s.scheme, s.group, std::move(s.eph), std::move(s.h_ctx), opts_.now()};
  sessions_.erase(it);
  if (opts_.attest_capacity == 0) return;
  cache_.emplace_front(sid, std::move(e));
  cache_index_[sid] = cache_.begin();
  while (cache_.size() > opts_.attest_capacity) {
    auto victim = cache_.back().first;
    cache_index_.erase(victim);
    cache_.pop_back();
    expired_.insert(victim);
    expired_order_.push_back(victim);
  }
  while (expired_order_.size() > kExpiredLimit) {
    expired_.erase(expired_order_.front());
    expired_order_.pop_front();
  }
}

void CryptoService::purge() {
  const auto now = opts_.now();
  while (!cache_.empty() && now - cache_.back().second.completed > opts_.attest_window) {
    auto victim = cache_.back().first;
    cache_index_.erase(victim);
    cache_.pop_back();
    expired_.insert(victim);
    expired_order_.push_back(victim);
  }
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second.last_used > opts_.session_idle_limit) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

void CryptoService::emit_cv_event(const Session& s, ByteView through_cv) const {
  if (!opts_.events) return;
  auto msgs = tls::split_messages(s.h_ctx);
  if (!msgs || msgs->size() < 2) return;
  auto ch = decode_as<tls::ClientHello>((*msgs)[0]);
  if (!ch) return;
  Bytes ch_sh((*msgs)[0].begin(), (*msgs)[0].end());
  append(ch_sh, (*msgs)[1]);
  Event e{EventKind::CsSentCv, "cs:" + s.id.hex(), Bytes(ch->random.begin(), ch->random.end()),
          Bytes(s.n_s.begin(), s.n_s.end()), event_hash(ch_sh), event_hash(through_cv), false, 0};
  opts_.events->append(std::move(e));
}

Result<LurkMessage> CryptoService::on_ecdhe(const LurkMessage& m) {
  LURKT_ASSIGN(auto req, lurk::EcdheRequest::decode(m.payload));
  LURKT_ASSIGN(auto row, pinned_row(req.row, MsgType::GetEcdhe));
  const bool cert = config_for(row).mode == AuthMode::Cert;
  Session work;
  if (m.session_id.is_zero()) {
    if (!cert) return make_error(Errc::UnknownSession, "PSK sessions open with EARLY_SECRET");
    work.id = fresh_session_id();
    work.row = row;
  } else {
    LURKT_ASSIGN(Session * s, live(m.session_id, MsgType::GetEcdhe));
    if (s->row != row) return make_error(Errc::ConfigViolation, "session is pinned to " + std::string(row_name(s->row)));
    if (cert || s->stage != Stage::Early) return make_error(Errc::OutOfOrder, "GET_ECDHE after key exchange");
    work = *s;
  }
  if (!crypto::group_supported(req.group)) {
    return make_error(Errc::UnsupportedGroup, "named group " + std::to_string(req.group));
  }
  work.eph = crypto::generate_keypair(static_cast<crypto::Group>(req.group));
  work.group = req.group;
  work.stage = Stage::Ecdhe;
  observe("v", work.eph->priv.view());
  lurk::EcdheResponse resp{work.eph->pub};
  const SessionId sid = work.id;
  commit(std::move(work));
  return lurk::make_response(MsgType::GetEcdhe, sid, resp.encode());
}

Result<LurkMessage> CryptoService::on_handshake(const LurkMessage& m) {
  LURKT_ASSIGN(auto req, lurk::HandshakeSecretsRequest::decode(m.payload));
  LURKT_ASSIGN(auto row, pinned_row(req.row, MsgType::GetHandshakeSecrets));
  const CsConfig cfg = config_for(row);
  Session work;
  if (m.session_id.is_zero()) {
    if (cfg.cs_generates_ecdhe || cfg.mode == AuthMode::Psk) {
      return make_error(Errc::UnknownSession, "GET_HANDSHAKE_SECRETS requires an open session");
    }
    work.id = fresh_session_id();
    work.row = row;
  } else {
    LURKT_ASSIGN(Session * s, live(m.session_id, MsgType::GetHandshakeSecrets));
    if (s->row != row) return make_error(Errc::ConfigViolation, "session is pinned to " + std::string(row_name(s->row)));
    const Stage expected = cfg.cs_generates_ecdhe ? Stage::Ecdhe : Stage::Early;
    if (s->stage != expected) return make_error(Errc::OutOfOrder, "GET_HANDSHAKE_SECRETS out of sequence");
    work = *s;
  }
  LURKT_ASSIGN(const auto* suite, require_suite(req.suite));
  if (work.suite && work.suite != suite) return make_error(Errc::TranscriptMismatch, "suite differs from EARLY_SECRET");
  LURKT_ASSIGN(auto msgs, expect_messages(req.transcript, {HandshakeType::ClientHello, HandshakeType::ServerHello}));
  LURKT_ASSIGN(auto ch, decode_as<tls::ClientHello>(msgs[0]));
  LURKT_ASSIGN(auto sh, decode_as<tls::ServerHello>(msgs[1]));
  LURKT_TRY(check_fresh(req.n_e.view(), sh.random));
  if (n_s_used(sh.random)) return make_error(Errc::FreshnessViolation, "ServerHello.random already bound");
  if (sh.cipher_suite != req.suite) return make_error(Errc::TranscriptMismatch, "ServerHello suite differs");

  SecretBytes ke;
  if (cfg.cs_generates_ecdhe) {
    if (!req.ke_shared.empty()) return make_error(Errc::ConfigViolation, "service generates the (EC)DHE share");
    const auto* ext = tls::find_extension(sh.extensions, tls::ext::kKeyShare);
    if (!ext) return make_error(Errc::TranscriptMismatch, "ServerHello has no key_share");
    auto share = tls::parse_server_key_share(ext->data);
    if (!share || share->group != work.group || share->key_exchange != work.eph->pub) {
      return make_error(Errc::TranscriptMismatch, "ServerHello key_share is not the service share");
    }
    LURKT_ASSIGN(ke, ecdh_with_client(*work.eph, ch));
  } else {
    if (req.ke_shared.empty()) return make_error(Errc::MissingKeyShare, "engine-generated shared secret missing");
    ke = std::move(req.ke_shared);
  }
  if (cfg.mode == AuthMode::Psk) {
    auto truncated = tls::truncate_for_binders(msgs[0]);
    if (!truncated || *truncated != work.truncated_ch) {
      return make_error(Errc::TranscriptMismatch, "ClientHello differs from EARLY_SECRET");
    }
  }
  ks::KeySchedule schedule(suite->hash);
  ks::SharedKeyMaterial km{std::move(ke), work.psk};
  LURKT_ASSIGN(auto hs, schedule.derive_handshake_secrets(km, req.transcript));
  work.suite = suite;
  work.schedule = std::move(schedule);
  work.h_ctx = req.transcript;
  work.n_s = sh.random;
  work.client_hs = hs.client;
  work.server_hs = hs.server;
  work.stage = Stage::Handshake;
  lurk::HandshakeSecretsResponse resp{std::move(hs.client), std::move(hs.server)};
  const SessionId sid = work.id;
  mark_n_s_used(sh.random);
  commit(std::move(work));
  return lurk::make_response(MsgType::GetHandshakeSecrets, sid, resp.encode());
}

Result<LurkMessage> CryptoService::on_sig(const LurkMessage& m) {
  LURKT_ASSIGN(auto req, lurk::SigAndAppRequest::decode(m.payload));
  LURKT_ASSIGN(auto row, pinned_row(req.row, MsgType::GetSigAndApp));
  const CsConfig cfg = config_for(row);
  if (req.scheme != static_cast<std::uint16_t>(identity_.sk.scheme())) {
    return make_error(Errc::UnsupportedScheme, "signature scheme " + std::to_string(req.scheme));
  }
  LURKT_ASSIGN(const auto* suite, require_suite(req.suite));
  LURKT_ASSIGN(auto msgs, expect_messages(req.transcript,
                                          {HandshakeType::ClientHello, HandshakeType::ServerHello,
                                           HandshakeType::EncryptedExtensions, HandshakeType::Certificate}));
  LURKT_ASSIGN(auto ch, decode_as<tls::ClientHello>(msgs[0]));
  LURKT_ASSIGN(auto sh, decode_as<tls::ServerHello>(msgs[1]));
  LURKT_TRY(check_fresh(req.n_e.view(), sh.random));
  if (!std::equal(msgs[3].begin(), msgs[3].end(), certificate_msg_.begin(), certificate_msg_.end())) {
    return make_error(Errc::TranscriptMismatch, "Certificate is not the service certificate");
  }
  if (sh.cipher_suite != req.suite) return make_error(Errc::TranscriptMismatch, "ServerHello suite differs");

  Session work;
  if (m.session_id.is_zero()) {
    if (!cfg.keyless()) return make_error(Errc::UnknownSession, "GET_SIG_AND_APP requires an open session");
    if (n_s_used(sh.random)) return make_error(Errc::FreshnessViolation, "ServerHello.random already bound");
    work.id = fresh_session_id();
    work.row = row;
    work.suite = suite;
    work.n_s = sh.random;
  } else {
    LURKT_ASSIGN(Session * s, live(m.session_id, MsgType::GetSigAndApp));
    if (s->row != row) return make_error(Errc::ConfigViolation, "session is pinned to " + std::string(row_name(s->row)));
    if (s->stage == Stage::Signed) {
      if (ByteView(req.transcript).size() == s->sig_transcript.size() &&
          std::equal(req.transcript.begin(), req.transcript.end(), s->sig_transcript.begin()) && s->suite == suite) {
        s->last_used = opts_.now();
        return lurk::make_response(MsgType::GetSigAndApp, s->id, s->sig_response.expose());
      }
      return make_error(Errc::TranscriptMismatch, "GET_SIG_AND_APP repeated with a different transcript");
    }
    if (s->stage != Stage::Handshake) return make_error(Errc::OutOfOrder, "GET_SIG_AND_APP before handshake secrets");
    if (!starts_with(req.transcript, s->h_ctx)) {
      return make_error(Errc::TranscriptMismatch, "transcript does not extend the service copy");
    }
    if (s->suite != suite) return make_error(Errc::TranscriptMismatch, "suite differs from GET_HANDSHAKE_SECRETS");
    work = *s;
  }

  const Bytes th = crypto::digest(suite->hash, req.transcript);
  lurk::SigAndAppResponse resp;
  resp.psign = identity_.sk.sign(tls::certificate_verify_input(th));
  Bytes cv_msg = encode_handshake(tls::CertificateVerify{req.scheme, resp.psign});
  work.h_ctx = req.transcript;
  append(work.h_ctx, cv_msg);
  emit_cv_event(work, work.h_ctx);
  if (!cfg.keyless()) {
    Bytes fin_msg = encode_handshake(tls::Finished{ks::finished_mac(suite->hash, work.server_hs.view(), work.h_ctx)});
    append(work.h_ctx, fin_msg);
    LURKT_ASSIGN(auto app, work.schedule->derive_application_secrets(work.h_ctx));
    resp.certificate_verify = std::move(cv_msg);
    resp.server_finished = std::move(fin_msg);
    resp.client_app = std::move(app.client);
    resp.server_app = std::move(app.server);
  }
  (void)ch;
  work.scheme = req.scheme;
  work.stage = Stage::Signed;
  work.sig_transcript = req.transcript;
  work.sig_response = SecretBytes(resp.encode());
  const SessionId sid = work.id;
  if (m.session_id.is_zero()) mark_n_s_used(sh.random);
  Bytes payload = work.sig_response.expose();
  commit(std::move(work));
  if (row != ConfigRow::CsCertDheR) complete(sid);
  return lurk::make_response(MsgType::GetSigAndApp, sid, std::move(payload));
}

Result<LurkMessage> CryptoService::on_ticket(const LurkMessage& m, bool psk_mode) {
  const MsgType type = psk_mode ? MsgType::GetResSecret : MsgType::NewTicket;
  LURKT_ASSIGN(auto req, lurk::TicketRequest::decode(m.payload));
  LURKT_ASSIGN(Session * s, live(m.session_id, type));
  if (std::find(opts_.allowed_rows.begin(), opts_.allowed_rows.end(), s->row) == opts_.allowed_rows.end()) {
    return make_error(Errc::ConfigViolation, "row disabled");
  }
  const Stage expected = psk_mode ? Stage::App : Stage::Signed;
  if (s->stage != expected) return make_error(Errc::OutOfOrder, std::string(lurk::msg_type_name(type)) + " out of sequence");
  if (!starts_with(req.transcript, s->h_ctx)) {
    return make_error(Errc::TranscriptMismatch, "transcript does not extend the service copy");
  }
  ByteView tail = ByteView(req.transcript).subspan(s->h_ctx.size());
  LURKT_ASSIGN(auto tail_msgs, expect_messages(tail, {HandshakeType::Finished}));
  LURKT_TRY(check_fresh(req.n_e.view(), s->n_s));
  LURKT_ASSIGN(auto verify_data, verify_data_of(tail_msgs[0]));
  const auto expected_mac = ks::finished_mac(s->suite->hash, s->client_hs.view(), s->h_ctx);
  if (!ct_equal(expected_mac, verify_data)) return make_error(Errc::BadClientFinished, "client Finished mismatch");

  Session work = *s;
  LURKT_ASSIGN(auto r, work.schedule->derive_resumption_secret(req.transcript));
  auto psk = ks::psk_from_resumption(work.suite->hash, r.view(), req.ticket_nonce);
  LURKT_TRY(psks_.put(work.id, psk.view(), work.suite->hash, now_ms()));
  observe("psk", psk.view());
  work.h_ctx = req.transcript;
  const SessionId sid = work.id;
  commit(std::move(work));
  complete(sid);
  lurk::TicketResponse resp{Bytes(sid.bytes.begin(), sid.bytes.end())};
  return lurk::make_response(type, sid, resp.encode());
}

Result<LurkMessage> CryptoService::on_early(const LurkMessage& m) {
  LURKT_ASSIGN(auto req, lurk::EarlySecretRequest::decode(m.payload));
  if (!m.session_id.is_zero()) return make_error(Errc::OutOfOrder, "EARLY_SECRET opens a new session");
  LURKT_ASSIGN(auto row, pinned_row(req.row, MsgType::EarlySecret));
  LURKT_ASSIGN(const auto* suite, require_suite(req.suite));
  auto found = psks_.get(req.psk_id);
  if (!found) return make_error(Errc::UnknownPskId, "psk_id " + to_hex(req.psk_id));
  if (found->hash != suite->hash) return make_error(Errc::UnknownPskId, "PSK hash does not match the suite");
  if (req.truncated_client_hello.empty()) return make_error(Errc::MalformedPayload, "empty truncated ClientHello");
  auto binder = ks::binder_key_and_mac(suite->hash, found->psk.view(), req.truncated_client_hello);
  Session work;
  work.id = fresh_session_id();
  work.row = row;
  work.suite = suite;
  work.psk = std::move(found->psk);
  work.truncated_ch = std::move(req.truncated_client_hello);
  work.stage = Stage::Early;
  lurk::EarlySecretResponse resp{std::move(binder.binder_key), std::move(binder.binder_mac)};
  const SessionId sid = work.id;
  commit(std::move(work));
  return lurk::make_response(MsgType::EarlySecret, sid, resp.encode());
}

Result<LurkMessage> CryptoService::on_app(const LurkMessage& m) {
  LURKT_ASSIGN(auto req, lurk::AppSecretRequest::decode(m.payload));
  LURKT_ASSIGN(Session * s, live(m.session_id, MsgType::GetAppSecret));
  if (s->stage != Stage::Handshake) return make_error(Errc::OutOfOrder, "GET_APP_SECRET before handshake secrets");
  if (!starts_with(req.transcript, s->h_ctx)) {
    return make_error(Errc::TranscriptMismatch, "transcript does not extend the service copy");
  }
  ByteView tail = ByteView(req.transcript).subspan(s->h_ctx.size());
  LURKT_ASSIGN(auto tail_msgs, expect_messages(tail, {HandshakeType::EncryptedExtensions, HandshakeType::Finished}));
  LURKT_TRY(check_fresh(req.n_e.view(), s->n_s));
  Bytes through_ee = s->h_ctx;
  append(through_ee, tail_msgs[0]);
  LURKT_ASSIGN(auto verify_data, verify_data_of(tail_msgs[1]));
  if (!ct_equal(ks::finished_mac(s->suite->hash, s->server_hs.view(), through_ee), verify_data)) {
    return make_error(Errc::TranscriptMismatch, "server Finished does not match the handshake secrets");
  }
  Session work = *s;
  LURKT_ASSIGN(auto app, work.schedule->derive_application_secrets(req.transcript));
  work.h_ctx = req.transcript;
  work.stage = Stage::App;
  lurk::AppSecretResponse resp{std::move(app.client), std::move(app.server)};
  const SessionId sid = work.id;
  const bool done = !config_for(work.row).cs_generates_resumption;
  commit(std::move(work));
  if (done) complete(sid);
  return lurk::make_response(MsgType::GetAppSecret, sid, resp.encode());
}

Result<LurkMessage> CryptoService::on_attest(const LurkMessage& m) {
  if (!m.payload.empty()) return make_error(Errc::MalformedPayload, "ATTEST carries no payload");
  const SessionId& sid = m.session_id;
  auto it = cache_index_.find(sid);
  if (it == cache_index_.end()) {
    if (expired_.count(sid)) return make_error(Errc::CacheExpired, "session " + sid.hex() + " left the cache");
    return make_error(Errc::UnknownSession, "session " + sid.hex() + " is not in the attestation cache");
  }
  // Refresh LRU position.
  cache_.splice(cache_.begin(), cache_, it->second);
  const CacheEntry& e = it->second->second;
  lurk::Quote q;
  q.measurement = identity_.measurement;
  q.h_ctx_hash = crypto::digest(crypto::HashAlg::Sha256, e.h_ctx);
  q.signature = identity_.attest_sk.sign(q.signed_message());
  return lurk::make_response(MsgType::Attest, sid, q.encode());
}

Result<Recomputed> CryptoService::recompute_from_context(const SessionId& sid, ByteView h_ctx) {
  std::lock_guard lock(mu_);
  purge();
  auto it = cache_index_.find(sid);
  if (it == cache_index_.end()) {
    if (expired_.count(sid)) return make_error(Errc::CacheExpired, "session " + sid.hex() + " left the cache");
    return make_error(Errc::UnknownSession, "session " + sid.hex() + " is not in the attestation cache");
  }
  const CacheEntry& e = it->second->second;
  if (!std::equal(h_ctx.begin(), h_ctx.end(), e.h_ctx.begin(), e.h_ctx.end())) {
    return make_error(Errc::TranscriptMismatch, "presented context differs from the cached context");
  }
  if (!e.eph) return make_error(Errc::ConfigViolation, "no service-generated ephemeral for this session");
  auto msgs = tls::split_messages(h_ctx);
  if (!msgs || msgs->size() < 6) return make_error(Errc::TranscriptMismatch, "cached context is incomplete");
  LURKT_ASSIGN(auto ch, decode_as<tls::ClientHello>((*msgs)[0]));
  LURKT_ASSIGN(auto ke, ecdh_with_client(*e.eph, ch));
  auto prefix = [&](std::size_t n) {
    Bytes out;
    for (std::size_t i = 0; i < n; ++i) append(out, (*msgs)[i]);
    return out;
  };
  ks::KeySchedule schedule(e.suite->hash);
  ks::SharedKeyMaterial km{std::move(ke), std::nullopt};
  LURKT_ASSIGN(auto hs, schedule.derive_handshake_secrets(km, prefix(2)));
  Recomputed out;
  out.psign = identity_.sk.sign(tls::certificate_verify_input(crypto::digest(e.suite->hash, prefix(4))));
  Bytes through_cv = prefix(4);
  append(through_cv, encode_handshake(tls::CertificateVerify{e.scheme, out.psign}));
  append(through_cv, encode_handshake(tls::Finished{ks::finished_mac(e.suite->hash, hs.server.view(), through_cv)}));
  LURKT_ASSIGN(auto app, schedule.derive_application_secrets(through_cv));
  out.client_hs = std::move(hs.client);
  out.server_hs = std::move(hs.server);
  out.client_app = std::move(app.client);
  out.server_app = std::move(app.server);
  return out;
}

std::size_t CryptoService::live_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t CryptoService::cached_sessions() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::size_t CryptoService::psk_count() const {
  std::lock_guard lock(mu_);
  return psks_.size();
}

std::uint64_t CryptoService::requests_handled() const {
  std::lock_guard lock(mu_);
  return handled_;
}

std::uint64_t CryptoService::requests_accepted() const {
  std::lock_guard lock(mu_);
  return accepted_;
}

void CryptoService::for_each_secret(const std::function<void(std::string_view, ByteView)>& f) const {
  std::lock_guard lock(mu_);
  f("sk", identity_.sk.raw_private().view());
  f("attest_sk", identity_.attest_sk.raw_private().view());
  psks_.for_each([&](ByteView, ByteView psk) { f("psk", psk); });
  for (const auto& [id, s] : sessions_) {
    if (s.eph) f("v", s.eph->priv.view());
    if (s.psk) f("psk", s.psk->view());
  }
  for (const auto& [id, e] : cache_) {
    if (e.eph) f("v", e.eph->priv.view());
  }
}

bool verify_quote(const lurk::Quote& quote, ByteView expected_h_ctx_hash, const crypto::PublicKey& attest_public,
                  std::span<const Bytes> allowed_measurements) {
  if (!ct_equal(quote.h_ctx_hash, expected_h_ctx_hash)) return false;
  const bool known = std::any_of(allowed_measurements.begin(), allowed_measurements.end(),
                                 [&](const Bytes& m) { return ct_equal(m, quote.measurement); });
  if (!known) return false;
  return attest_public.verify(quote.signed_message(), quote.signature);
}

}  // namespace lurkt::cs
