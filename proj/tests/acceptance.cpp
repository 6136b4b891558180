// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. Detail lines are indented under their verdict.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lurkt/bench.hpp"
#include "lurkt/channel.hpp"
#include "lurkt/client.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/engine.hpp"
#include "lurkt/harness.hpp"
#include "lurkt/key_schedule.hpp"
#include "lurkt/lurk.hpp"
#include "lurkt/record.hpp"
#include "lurkt/tls_codec.hpp"
#include "rfc8448_vectors.hpp"

namespace lurkt::acceptance {
namespace {

using crypto::HashAlg;

const std::vector<ConfigRow> kCertRows{ConfigRow::CsCertDheR, ConfigRow::CsCertDhe, ConfigRow::CsCert,
                                       ConfigRow::CsCertKeyless};
const std::vector<ConfigRow> kPskRows{ConfigRow::CsPskDheR, ConfigRow::CsPskDhe, ConfigRow::CsPskR,
                                      ConfigRow::CsPsk};
const std::vector<std::uint16_t> kSuites{ks::kAes128GcmSha256, ks::kAes256GcmSha384, ks::kChacha20Poly1305Sha256};
const std::vector<crypto::Group> kGroups{crypto::Group::X25519, crypto::Group::Secp256r1, crypto::Group::X448};

// Collects failed checks of one criterion; `ok` is false once any check fails.
class Checks {
 public:
  void expect(bool cond, const std::string& what) {
    ++total_;
    if (!cond && failures_.size() < 8) failures_.push_back(what);
    if (!cond) ++failed_;
  }
  void note(const std::string& line) { notes_.push_back(line); }
  bool ok() const { return failed_ == 0; }
  std::size_t total() const { return total_; }
  std::size_t failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

// In-process crypto service whose frames are recorded, plus engine options
// bound to its public chain.
class Deployment {
 public:
  explicit Deployment(crypto::SigScheme scheme = crypto::SigScheme::Ed25519, cs::CsOptions o = {})
      : svc(cs::CsIdentity::generate(scheme), std::move(o)), inner(svc), recorder(inner), cs(recorder) {
    opts.cert_chain = svc.cert_chain();
    opts.scheme = svc.scheme();
  }

  client::ClientOptions client_options() const {
    client::ClientOptions c;
    c.trust_anchor = svc.cert_chain().front();
    return c;
  }

  struct Run {
    std::unique_ptr<client::TlsClient> client;
    std::unique_ptr<engine::EngineSession> engine;
    Status status;
    std::size_t frames = 0;  // observed E<->CS request/response pairs
  };

  Run run(const client::ClientOptions& c, const client::WireTap& tap = {}) {
    Run r;
    recorder.clear();
    r.client = std::make_unique<client::TlsClient>(c);
    r.engine = std::make_unique<engine::EngineSession>(opts, cs);
    auto l = client::run_loopback(*r.client, *r.engine, tap, {});
    if (!l) r.status = l.error();
    r.frames = recorder.exchanges().size();
    return r;
  }

  std::optional<client::Ticket> ticket(std::uint16_t suite = ks::kAes128GcmSha256) {
    const auto saved = opts.cert_row;
    opts.cert_row = ConfigRow::CsCertDheR;
    auto c = client_options();
    c.suites = {suite};
    auto r = run(c);
    opts.cert_row = saved;
    if (!r.status || r.client->tickets().empty()) return std::nullopt;
    return r.client->tickets().front();
  }

  cs::CryptoService svc;
  channel::InProcessTransport inner;
  channel::RecordingTransport recorder;
  channel::CsClient cs;
  engine::EngineOptions opts;
};

std::string why(const Status& s) { return s ? std::string("ok") : s.error().message(); }

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ---------------------------------------------------------------------

Bytes trace_record_inner(const char* plaintext_hex, record::ContentType* type) {
  Bytes inner = hex(plaintext_hex);
  *type = static_cast<record::ContentType>(inner.back());
  inner.pop_back();
  return inner;
}

void rfc8448_conformance(Checks& c) {
  using namespace rfc8448;
  const HashAlg h = HashAlg::Sha256;

  // Full handshake trace.
  Bytes ch_sh = hex(messages::client_hello_plaintext);
  append(ch_sh, hex(messages::server_hello_payload));
  ks::KeySchedule full(h);
  auto hs = full.derive_handshake_secrets({SecretBytes(hex(rtt1::shared_secret)), std::nullopt}, ch_sh);
  c.expect(hs && to_hex(hs->client.view()) == rtt1::client_handshake_traffic_secret, "1-RTT client handshake secret");
  c.expect(hs && to_hex(hs->server.view()) == rtt1::server_handshake_traffic_secret, "1-RTT server handshake secret");
  auto app = full.derive_application_secrets_from_hash(hex(rtt1::th_server_finished));
  c.expect(app && to_hex(app->client.view()) == rtt1::client_traffic_secret, "1-RTT client application secret");
  c.expect(app && to_hex(app->server.view()) == rtt1::server_traffic_secret, "1-RTT server application secret");
  c.expect(to_hex(ks::finished_mac_from_hash(h, hex(rtt1::server_handshake_traffic_secret),
                                             hex(rtt1::th_pre_server_finished))) == rtt1::expected_server_mac,
           "1-RTT server Finished");
  c.expect(to_hex(ks::finished_mac_from_hash(h, hex(rtt1::client_handshake_traffic_secret),
                                             hex(rtt1::th_server_finished))) == rtt1::expected_client_mac,
           "1-RTT client Finished");
  auto res = full.derive_resumption_secret_from_hash(hex(rtt1::th_client_finished));
  Bytes nst = hex(rtt1::encrypted_new_session_ticket_plaintext);
  nst.pop_back();
  auto ticket = tls::decode_message(nst);
  const auto* t = ticket ? ticket->as<tls::NewSessionTicket>() : nullptr;
  c.expect(res && t && to_hex(ks::psk_from_resumption(h, res->view(), t->nonce).view()) == rtt1::expected_psk,
           "resumption master secret to ticket PSK");

  // Resumed handshake trace.
  ks::KeySchedule resumed(h);
  c.expect(to_hex(ks::finished_mac_from_hash(h, ks::binder_key_and_mac(h, hex(rtt0::psk), {}).binder_key.view(),
                                             hex(rtt0::th_client_hello_prefix))) == rtt0::expected_psk_binder,
           "resumed PSK binder");
  auto rhs = resumed.derive_handshake_secrets_from_hash(
      {SecretBytes(hex(rtt0::shared_secret)), SecretBytes(hex(rtt0::psk))}, hex(rtt0::th_server_hello));
  c.expect(rhs && to_hex(rhs->client.view()) == rtt0::client_handshake_traffic_secret, "resumed client handshake secret");
  c.expect(rhs && to_hex(rhs->server.view()) == rtt0::server_handshake_traffic_secret, "resumed server handshake secret");
  auto rapp = resumed.derive_application_secrets_from_hash(hex(rtt0::th_server_finished));
  c.expect(rapp && to_hex(rapp->client.view()) == rtt0::client_traffic_secret, "resumed client application secret");
  c.expect(rapp && to_hex(rapp->server.view()) == rtt0::server_traffic_secret, "resumed server application secret");
  c.expect(to_hex(ks::finished_mac_from_hash(h, hex(rtt0::server_handshake_traffic_secret),
                                             hex(rtt0::th_pre_server_finished))) == rtt0::expected_server_mac,
           "resumed server Finished");
  c.expect(to_hex(ks::finished_mac_from_hash(h, hex(rtt0::client_handshake_traffic_secret),
                                             hex(rtt0::th_end_of_early_data))) == rtt0::expected_client_mac,
           "resumed client Finished");

  // Every protected record; the traffic key and IV of each secret are
  // exercised by sealing to the exact trace bytes and opening them again.
  struct Rec {
    const char* secret;
    std::uint64_t seq;
    const char* header;
    const char* ciphertext;
    const char* plaintext;
  };
  const Rec recs[] = {
      {rtt1::server_handshake_traffic_secret, 0, rtt1::encrypted_extensions_header,
       rtt1::encrypted_extensions_ciphertext, rtt1::encrypted_extensions_plaintext},
      {rtt1::client_handshake_traffic_secret, 0, rtt1::encrypted_client_finished_message_header,
       rtt1::encrypted_client_finished_message_ciphertext, rtt1::encrypted_client_finished_message_plaintext},
      {rtt1::server_traffic_secret, 0, rtt1::encrypted_new_session_ticket_header,
       rtt1::encrypted_new_session_ticket_ciphertext, rtt1::encrypted_new_session_ticket_plaintext},
      {rtt1::client_traffic_secret, 0, rtt1::encrypted_application_data_client_header,
       rtt1::encrypted_application_data_client_ciphertext, rtt1::encrypted_application_data_client_plaintext},
      {rtt1::server_traffic_secret, 1, rtt1::encrypted_application_data_server_header,
       rtt1::encrypted_application_data_server_ciphertext, rtt1::encrypted_application_data_server_plaintext},
      {rtt0::server_handshake_traffic_secret, 0, rtt0::encrypted_extensions_header,
       rtt0::encrypted_extensions_ciphertext, rtt0::encrypted_extensions_plaintext},
      {rtt0::client_handshake_traffic_secret, 0, rtt0::encrypted_client_finished_message_header,
       rtt0::encrypted_client_finished_message_ciphertext, rtt0::encrypted_client_finished_message_plaintext},
      {rtt0::client_traffic_secret, 0, rtt0::encrypted_application_data_client_header,
       rtt0::encrypted_application_data_client_ciphertext, rtt0::encrypted_application_data_client_plaintext},
      {rtt0::server_traffic_secret, 0, rtt0::encrypted_application_data_server_header,
       rtt0::encrypted_application_data_server_ciphertext, rtt0::encrypted_application_data_server_plaintext},
  };
  const auto& suite = *ks::find_suite(ks::kAes128GcmSha256);
  for (const auto& r : recs) {
    Bytes wire = hex(r.header);
    append(wire, hex(r.ciphertext));
    record::ContentType type{};
    const Bytes inner = trace_record_inner(r.plaintext, &type);
    auto tx = record::derive_traffic_keys(suite, hex(r.secret));
    tx.seq = r.seq;
    auto sealed = record::seal(tx, inner, type);
    c.expect(sealed && *sealed == wire, std::string("seal record ") + r.header);
    auto rx = record::derive_traffic_keys(suite, hex(r.secret));
    rx.seq = r.seq;
    auto opened = record::open(rx, wire);
    c.expect(opened && opened->plaintext == inner && opened->type == type, std::string("open record ") + r.header);
  }
}

// ---- 2 ---------------------------------------------------------------------

void table_conformance(Checks& c) {
  // Exchange counts per row, certificate rows then PSK rows.
  const std::size_t cert_counts[] = {4, 3, 2, 1};
  const std::size_t psk_counts[] = {5, 4, 4, 3};
  Deployment d;
  std::ostringstream line;
  for (std::size_t i = 0; i < kCertRows.size(); ++i) {
    d.opts.cert_row = kCertRows[i];
    auto r = d.run(d.client_options());
    const std::string name(row_name(kCertRows[i]));
    c.expect(r.status && r.engine->state() == engine::EngineSession::State::Done, name + " completes: " + why(r.status));
    c.expect(r.frames == cert_counts[i], name + " exchanges " + std::to_string(r.frames));
    line << name << '=' << r.frames << ' ';
  }
  for (std::size_t i = 0; i < kPskRows.size(); ++i) {
    auto t = d.ticket();
    c.expect(static_cast<bool>(t), "ticket issued");
    if (!t) continue;
    d.opts.psk_row = kPskRows[i];
    auto co = d.client_options();
    co.ticket = *t;
    co.require_resumption = true;
    auto r = d.run(co);
    d.opts.psk_row.reset();
    const std::string name(row_name(kPskRows[i]));
    c.expect(r.status && r.engine->resumed(), name + " resumes: " + why(r.status));
    c.expect(r.frames == psk_counts[i], name + " exchanges " + std::to_string(r.frames));
    line << name << '=' << r.frames << ' ';
  }
  c.note(line.str());
}

// ---- 3 ---------------------------------------------------------------------

void key_agreement(Checks& c) {
  std::size_t handshakes = 0;
  for (auto scheme : {crypto::SigScheme::Ed25519, crypto::SigScheme::Ed448}) {
    Deployment d(scheme);
    for (auto row : kCertRows) {
      d.opts.cert_row = row;
      for (auto suite : kSuites) {
        for (auto group : kGroups) {
          auto co = d.client_options();
          co.suites = {suite};
          co.groups = {static_cast<std::uint16_t>(group)};
          auto r = d.run(co);
          ++handshakes;
          const std::string tag = std::string(row_name(row)) + "/" + std::to_string(suite) + "/" +
                                  std::to_string(static_cast<int>(group));
          c.expect(static_cast<bool>(r.status), tag + ": " + why(r.status));
          if (!r.status) continue;
          c.expect(r.client->saw_certificate(), tag + " certificate verified");
          c.expect(r.client->client_app_secret() == r.engine->client_app_secret(), tag + " client secret");
          c.expect(r.client->server_app_secret() == r.engine->server_app_secret(), tag + " server secret");
          c.expect(r.client->suite() == suite && r.client->group() == static_cast<std::uint16_t>(group),
                   tag + " negotiated");
        }
      }
    }
    d.opts.cert_row = ConfigRow::CsCertDheR;
    for (auto suite : kSuites) {
      for (auto row : kPskRows) {
        for (auto group : kGroups) {
          auto t = d.ticket(suite);
          c.expect(static_cast<bool>(t), "ticket for suite " + std::to_string(suite));
          if (!t) continue;
          d.opts.psk_row = row;
          auto co = d.client_options();
          co.suites = {suite};
          co.groups = {static_cast<std::uint16_t>(group)};
          co.ticket = *t;
          co.require_resumption = true;
          auto r = d.run(co);
          d.opts.psk_row.reset();
          ++handshakes;
          const std::string tag = std::string(row_name(row)) + "/" + std::to_string(suite);
          c.expect(static_cast<bool>(r.status), tag + ": " + why(r.status));
          if (!r.status) continue;
          c.expect(r.client->client_app_secret() == r.engine->client_app_secret(), tag + " client secret");
          c.expect(r.client->server_app_secret() == r.engine->server_app_secret(), tag + " server secret");
        }
      }
    }
  }

  // The client's signature check is live: a signature altered between the
  // service and the engine is rejected.
  cs::CryptoService svc(cs::CsIdentity::generate(crypto::SigScheme::Ed25519));
  struct Flip final : channel::Transport {
    explicit Flip(cs::CryptoService& s) : svc(s) {}
    Result<Bytes> round_trip(ByteView frame) override {
      auto resp = lurk::decode_lurk(svc.handle(frame));
      if (!resp) return resp.error();
      if (resp->is_response() && resp->request_type() == lurk::MsgType::GetSigAndApp) {
        auto p = lurk::SigAndAppResponse::decode(resp->payload);
        if (p && !p->psign.empty()) {
          p->psign[0] ^= 0x01;
          resp->payload = p->encode();
        }
      }
      return lurk::encode_lurk(*resp);
    }
    cs::CryptoService& svc;
  } flip(svc);
  channel::CsClient cs(flip);
  engine::EngineOptions eo;
  eo.cert_chain = svc.cert_chain();
  eo.cert_row = ConfigRow::CsCertKeyless;
  client::ClientOptions co;
  co.trust_anchor = svc.cert_chain().front();
  client::TlsClient cl(co);
  engine::EngineSession e(eo, cs);
  const bool failed = !client::run_loopback(cl, e);
  c.expect(failed && cl.failure() && cl.failure()->code == Errc::BadServerSignature,
           "altered CertificateVerify is rejected");
  c.note(std::to_string(handshakes) + " handshakes across rows, suites, groups and signature schemes");
}

// ---- 4 ---------------------------------------------------------------------

void resumption(Checks& c) {
  Deployment d;
  for (auto row : {ConfigRow::CsPskDheR, ConfigRow::CsPsk}) {
    auto t = d.ticket();
    c.expect(static_cast<bool>(t), "ticket under cs_cert_dhe_r");
    if (!t) return;
    d.opts.psk_row = row;
    auto co = d.client_options();
    co.ticket = *t;
    co.require_resumption = true;
    auto r = d.run(co);
    const std::string name(row_name(row));
    c.expect(static_cast<bool>(r.status), name + ": " + why(r.status));
    c.expect(r.status && r.engine->resumed() && r.client->resumed() && !r.client->saw_certificate(),
             name + " resumed with a verified binder");
    c.expect(r.status && r.client->server_app_secret() == r.engine->server_app_secret(), name + " agreement");
  }
  auto t = d.ticket();
  c.expect(static_cast<bool>(t), "ticket for the wrong-PSK run");
  if (!t) return;
  Bytes psk = t->psk.expose();
  psk[0] ^= 0x01;
  t->psk = SecretBytes(psk);
  d.opts.psk_row = ConfigRow::CsPskDheR;
  auto co = d.client_options();
  co.ticket = *t;
  auto r = d.run(co);
  c.expect(!r.status && r.engine->failure() && r.engine->failure()->code == Errc::BadBinder,
           "wrong PSK aborts with BadBinder: " + why(r.status));
  c.expect(r.engine->state() == engine::EngineSession::State::Failed, "engine aborted");
  c.expect(r.client->state() != client::TlsClient::State::Connected, "client did not connect");
}

// ---- 5 ---------------------------------------------------------------------

void anti_replay(Checks& c) {
  auto r = harness::run_replay_battery(1000, 5);
  c.expect(r.attempts == 1000, "attempts " + std::to_string(r.attempts));
  c.expect(r.acceptances == 0, "acceptances " + std::to_string(r.acceptances));
  c.expect(r.freshness_expected > 0, "mismatched pairs attempted");
  c.expect(r.freshness_observed == r.freshness_expected,
           "FreshnessViolation " + std::to_string(r.freshness_observed) + " of " +
               std::to_string(r.freshness_expected));
  c.note("attempts " + std::to_string(r.attempts) + " acceptances " + std::to_string(r.acceptances) +
         " freshness " + std::to_string(r.freshness_observed) + "/" + std::to_string(r.freshness_expected));
}

// ---- 6 ---------------------------------------------------------------------

void pfs_uniqueness(Checks& c) {
  auto r = harness::run_pfs_battery(1000, ConfigRow::CsCertDheR);
  c.expect(r.handshakes == 1000 && r.failures == 0, "handshakes " + std::to_string(r.handshakes));
  c.expect(r.distinct_key_shares == 1000, "distinct key shares " + std::to_string(r.distinct_key_shares));
  c.expect(r.distinct_server_randoms == 1000, "distinct randoms " + std::to_string(r.distinct_server_randoms));
  c.note("distinct key shares " + std::to_string(r.distinct_key_shares) + " server randoms " +
         std::to_string(r.distinct_server_randoms));
}

// ---- 7 ---------------------------------------------------------------------

bool all_zero(ByteView b) {
  return !b.empty() && std::all_of(b.begin(), b.end(), [](std::uint8_t x) { return x == 0; });
}

void nonce_hygiene(Checks& c) {
  Deployment d;
  std::size_t sessions = 0;
  auto check = [&](const Deployment::Run& r, const std::string& what, bool expect_done) {
    ++sessions;
    const auto s = r.engine->state();
    c.expect(expect_done ? s == engine::EngineSession::State::Done : s == engine::EngineSession::State::Failed,
             what + " ended as expected: " + why(r.status));
    c.expect(all_zero(r.engine->nonce_view()), what + " nonce buffer is all zero");
  };
  for (auto row : kCertRows) {
    d.opts.cert_row = row;
    check(d.run(d.client_options()), std::string(row_name(row)), true);
    auto co = d.client_options();
    co.corrupt_finished = true;
    check(d.run(co), std::string(row_name(row)) + " bad Finished", false);
  }
  d.opts.cert_row = ConfigRow::CsCertDheR;
  for (auto row : kPskRows) {
    auto t = d.ticket();
    if (!t) {
      c.expect(false, "ticket");
      continue;
    }
    d.opts.psk_row = row;
    auto co = d.client_options();
    co.ticket = *t;
    check(d.run(co), std::string(row_name(row)), true);
    Bytes psk = t->psk.expose();
    psk.back() ^= 0x80;
    co.ticket->psk = SecretBytes(psk);
    check(d.run(co), std::string(row_name(row)) + " bad binder", false);
    d.opts.psk_row.reset();
  }
  // Service unreachable.
  channel::DownTransport down;
  channel::CsClient cs(down);
  client::TlsClient cl(d.client_options());
  engine::EngineSession e(d.opts, cs);
  auto hello = cl.start();
  c.expect(static_cast<bool>(hello), "client hello");
  if (hello) {
    auto out = e.on_receive(*hello);
    ++sessions;
    c.expect(!out && e.state() == engine::EngineSession::State::Failed, "unreachable service fails the session");
    c.expect(all_zero(e.nonce_view()), "unreachable service nonce buffer is all zero");
  }
  c.note(std::to_string(sessions) + " engine sessions inspected");
}

// ---- 8 ---------------------------------------------------------------------

void confinement(Checks& c) {
  auto clean = harness::run_confinement({});
  c.expect(clean.ok, "clean run: " + (clean.hits.empty() ? std::string() : clean.hits.front()));
  c.expect(clean.secrets > 0 && clean.artifacts > 0, "scanner saw secrets and artifacts");
  harness::ConfinementOptions leaky;
  leaky.leaky = true;
  leaky.rounds = 1;
  auto control = harness::run_confinement(leaky);
  c.expect(!control.ok, "leaky fixture is detected");
  c.note("secrets " + std::to_string(clean.secrets) + " artifacts " + std::to_string(clean.artifacts) + " bytes " +
         std::to_string(clean.scanned_bytes) + " hits 0; leaky control hits " + std::to_string(control.hits.size()));
}

// ---- 9 ---------------------------------------------------------------------

void agreement(Checks& c) {
  harness::AgreementOptions o;
  o.sessions = 200;
  o.policy = harness::ManglerPolicy::hostile(2024);
  auto r = harness::run_agreement_battery(o);
  c.expect(r.sessions == 200, "sessions " + std::to_string(r.sessions));
  c.expect(r.hostile_actions > 0, "mangler acted");
  c.expect(r.mismatched_views == 0, "mismatched views " + std::to_string(r.mismatched_views));
  c.expect(r.verdict.ok, "verdict: " + r.verdict.violation);
  // A client may send Finished and then fail on a mangled trailing record;
  // such sessions count as aborted yet still need a chain.
  c.expect(r.verdict.chains == r.verdict.client_finished && r.verdict.client_finished >= r.completed,
           "one chain per client Finished");
  auto leak = harness::run_key_leak_control(5, 1);
  c.expect(!leak.verdict.ok, "key-leak control is rejected");
  c.note("completed " + std::to_string(r.completed) + " aborted " + std::to_string(r.aborted) + " chains " +
         std::to_string(r.verdict.chains) + " hostile actions " +
         std::to_string(r.hostile_actions) + "; control: " + leak.verdict.violation);
}

// ---- 10 --------------------------------------------------------------------

void key_binding(Checks& c) {
  Deployment d;
  d.opts.cert_row = ConfigRow::CsCertDheR;
  auto r = d.run(d.client_options());
  c.expect(static_cast<bool>(r.status), "handshake: " + why(r.status));
  if (!r.status) return;
  auto att = r.engine->attest();
  c.expect(static_cast<bool>(att), "attest");
  if (!att) return;
  const auto sid = r.engine->cs_session_id();
  auto a = d.svc.recompute_from_context(sid, att->context);
  auto b = d.svc.recompute_from_context(sid, att->context);
  c.expect(a && b, "recompute within the window");
  if (!a || !b) return;
  c.expect(a->psign == b->psign, "psign identical");
  c.expect(a->client_hs == b->client_hs && a->server_hs == b->server_hs, "handshake secrets identical");
  c.expect(a->client_app == b->client_app && a->server_app == b->server_app, "application secrets identical");

  // The recomputed values are the live ones.
  auto cv = r.engine->transcript().decoded(tls::HandshakeType::CertificateVerify);
  c.expect(cv && a->psign == cv->as<tls::CertificateVerify>()->signature, "psign equals the live signature");
  const HashAlg alg = ks::find_suite(r.engine->suite())->hash;
  auto th_cv = r.engine->transcript().prefix_hash(alg, tls::HandshakeType::CertificateVerify);
  auto fin = r.engine->transcript().decoded(tls::HandshakeType::Finished);
  c.expect(th_cv && fin &&
               ks::finished_mac_from_hash(alg, a->server_hs.view(), *th_cv) == fin->as<tls::Finished>()->verify_data,
           "server handshake secret reproduces the live Finished");
  c.expect(a->client_app == r.engine->client_app_secret() && a->server_app == r.client->server_app_secret(),
           "application secrets equal the live ones");

  const Bytes hash = crypto::digest(HashAlg::Sha256, att->context);
  const std::vector<Bytes> allowed{d.svc.measurement()};
  c.expect(cs::verify_quote(att->quote, hash, d.svc.attest_public_key(), allowed), "quote verifies");
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < hash.size(); ++i) {
    Bytes tampered = hash;
    tampered[i] ^= static_cast<std::uint8_t>(1u << (i % 8));
    rejected += !cs::verify_quote(att->quote, tampered, d.svc.attest_public_key(), allowed);
  }
  c.expect(rejected == hash.size(), "every tampered hash rejected");
  c.note("quote verified; " + std::to_string(rejected) + " tampered hashes rejected");
}

// ---- 11 --------------------------------------------------------------------

void benchmark(Checks& c) {
  bench::BenchResult base, split;
  base.suite = split.suite = "s";
  base.kex_per_sec = 1715;
  split.kex_per_sec = 1543.5;
  auto d = bench::delta_kex(base, split);
  c.expect(d && std::fabs(*d - 10.0) < 1e-9, "1715 -> 1543.5 is 10.0%");
  split.kex_per_sec = 1715;
  auto same = bench::delta_kex(base, split);
  c.expect(same && *same == 0.0, "equal rates are 0%");
  base.kex_per_sec = 0;
  auto zero = bench::delta_kex(base, split);
  c.expect(!zero && zero.error().code == Errc::SuiteMismatch, "zero baseline is rejected");

  // Full report: every row and both baselines on two suites.
  const auto t0 = std::chrono::steady_clock::now();
  bench::BenchOptions o;
  o.n = 1000;
  std::vector<bench::BenchResult> results;
  for (const char* name : {"x25519_ed25519", "x448_ed448"}) {
    const auto suite = bench::find_bench_suite(name).value();
    std::vector<bench::Target> targets{bench::Target::baseline(), bench::Target::baseline_resumed()};
    for (auto row : kCertRows) targets.push_back(bench::Target::split(row));
    for (auto row : kPskRows) targets.push_back(bench::Target::split(row));
    for (const auto& t : targets) {
      auto r = bench::measure_kex(t, suite, o);
      c.expect(r && r->count == o.n, std::string(name) + " " + t.name() + ": " + (r ? "ok" : r.error().message()));
      if (r) results.push_back(*r);
    }
  }
  const double report_secs = since(t0);
  c.expect(results.size() == 20, "20 report cells");
  c.expect(report_secs < 600, "report within 10 minutes");
  std::istringstream report(bench::format_kex_report(results));
  for (std::string line; std::getline(report, line);) c.note(line);
  std::ostringstream took;
  took << "report generated in " << report_secs << " s";
  c.note(took.str());

  // Transfer trend, median over five interleaved runs to damp scheduler noise.
  const auto suite = bench::bench_suites().front();
  bench::BenchOptions to;
  to.n = 200;
  std::vector<double> small, large;
  for (int i = 0; i < 5; ++i) {
    auto rows = bench::transfer_trend({0, 1u << 20}, bench::Target::split(ConfigRow::CsCertDheR), suite, to);
    c.expect(rows && rows->size() == 2, "transfer trend: " + (rows ? std::string("ok") : rows.error().message()));
    if (!rows || rows->size() != 2) return;
    small.push_back((*rows)[0].delta);
    large.push_back((*rows)[1].delta);
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  std::ostringstream trend;
  trend << "cs_cert_dhe_r transfer delta% median: 0 B " << small[2] << ", 1 MiB " << large[2];
  c.note(trend.str());
  c.expect(small[2] > large[2], "delta at 0 B exceeds delta at 1 MiB");
}

// ---- 12 --------------------------------------------------------------------

Bytes noise(std::mt19937_64& rng, std::size_t max) {
  Bytes b(rng() % (max + 1));
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

Bytes mutate(std::mt19937_64& rng, Bytes in) {
  if (in.empty()) return noise(rng, 16);
  switch (rng() % 4) {
    case 0: in[rng() % in.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
    case 1: in.resize(rng() % in.size()); break;
    case 2: in.insert(in.begin() + static_cast<long>(rng() % in.size()), static_cast<std::uint8_t>(rng())); break;
    default: {
      const std::size_t at = rng() % in.size();
      for (std::size_t i = at; i < std::min(in.size(), at + 4); ++i) in[i] = static_cast<std::uint8_t>(rng());
    }
  }
  return in;
}

// Runs `n` cases per decoder; returns the number of cases that did not end
// in a value or a structured error.
std::size_t fuzz_cases(std::size_t n, const std::vector<Bytes>& tls_seeds, const std::vector<Bytes>& lurk_seeds) {
  std::mt19937_64 rng(0x5eed);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Bytes in = i % 2 ? mutate(rng, tls_seeds[rng() % tls_seeds.size()]) : noise(rng, 96);
    if (i % 4 == 0 && !in.empty()) in[0] = static_cast<std::uint8_t>(1 + rng() % 24);
    auto r = tls::decode_message(in);
    if (!r && r.error().message().empty()) ++bad;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Bytes in = i % 2 ? mutate(rng, lurk_seeds[rng() % lurk_seeds.size()]) : noise(rng, 96);
    if (i % 4 == 0 && in.size() >= 2) in[0] = lurk::kVersion;
    auto r = lurk::decode_lurk(in);
    if (!r && r.error().message().empty()) ++bad;
    const ByteView payload = in.size() > lurk::kHeaderLen ? ByteView(in).subspan(lurk::kHeaderLen) : ByteView();
    (void)lurk::SigAndAppRequest::decode(payload);
    (void)lurk::SigAndAppResponse::decode(payload);
    (void)lurk::HandshakeSecretsRequest::decode(payload);
    (void)lurk::TicketRequest::decode(payload);
    (void)lurk::Quote::decode(payload);
  }
  return bad;
}

void codec_fuzz(Checks& c) {
  using namespace rfc8448;
  std::vector<Bytes> tls_seeds{hex(messages::client_hello_plaintext), hex(messages::server_hello_payload),
                               hex(messages::server_certificate_message),
                               hex(messages::server_certificateverify_message)};
  Bytes flight = hex(rtt1::encrypted_extensions_plaintext);
  flight.pop_back();
  if (auto parts = tls::split_messages(flight)) {
    for (auto p : *parts) tls_seeds.emplace_back(p.begin(), p.end());
  }
  Bytes nst = hex(rtt1::encrypted_new_session_ticket_plaintext);
  nst.pop_back();
  tls_seeds.push_back(nst);

  // LURK seeds are the frames of live handshakes under every row.
  std::vector<Bytes> lurk_seeds;
  Deployment d;
  for (auto row : kCertRows) {
    d.opts.cert_row = row;
    d.run(d.client_options());
    for (auto& x : d.recorder.exchanges()) {
      lurk_seeds.push_back(x.request);
      lurk_seeds.push_back(x.response);
    }
  }
  c.expect(!lurk_seeds.empty(), "captured LURK frames");
  if (lurk_seeds.empty()) return;

  // A child process runs the cases so a crash shows up as a verdict.
  constexpr std::size_t kCases = 100000;
  std::fflush(nullptr);
  const pid_t pid = ::fork();
  if (pid == 0) _exit(fuzz_cases(kCases, tls_seeds, lurk_seeds) == 0 ? 0 : 3);
  int status = 0;
  c.expect(pid > 0 && ::waitpid(pid, &status, 0) == pid, "fuzz child ran");
  c.expect(WIFEXITED(status), "fuzz child terminated normally");
  c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "every case decoded or returned a structured error");
  c.note(std::to_string(kCases) + " decode_message cases and " + std::to_string(kCases) +
         " decode_lurk cases; seeds " + std::to_string(tls_seeds.size()) + " + " + std::to_string(lurk_seeds.size()));
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0 when unbounded
  std::function<void(Checks&)> run;
};

}  // namespace
}  // namespace lurkt::acceptance

int main() {
  using namespace lurkt::acceptance;
  const std::vector<Criterion> criteria{
      {1, "rfc8448_conformance", 5, rfc8448_conformance},
      {2, "exchange_counts_per_row", 30, table_conformance},
      {3, "key_agreement", 60, key_agreement},
      {4, "resumption_and_binder", 30, resumption},
      {5, "anti_replay", 60, anti_replay},
      {6, "pfs_uniqueness", 120, pfs_uniqueness},
      {7, "nonce_hygiene", 0, nonce_hygiene},
      {8, "secret_confinement", 0, confinement},
      {9, "agreement_property", 120, agreement},
      {10, "trusted_key_binding", 0, key_binding},
      {11, "benchmark_methodology", 600, benchmark},
      {12, "codec_robustness", 60, codec_fuzz},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = since(t0);
    if (cr.limit_seconds > 0) checks.expect(secs < cr.limit_seconds, "runtime limit");
    const bool ok = checks.ok();
    failed += !ok;
    std::printf("%s %2d %s (%zu checks, %.2f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.name, checks.total(), secs);
    for (const auto& n : checks.notes()) std::printf("    %s\n", n.c_str());
    for (const auto& f : checks.failures()) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
