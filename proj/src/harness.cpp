// SPDX-License-Identifier: Apache-2.0
#include "lurkt/harness.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <set>
#include <sstream>

#include "lurkt/channel.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/engine.hpp"
#include "lurkt/lurk.hpp"

namespace lurkt::harness {

using client::Direction;
using lurk::MsgType;

// ---- agreement -------------------------------------------------------------

namespace {

bool same_view(const Event& a, const Event& b, bool with_pre_fin) {
  return a.n_c == b.n_c && a.n_s == b.n_s && a.th_sh == b.th_sh && (!with_pre_fin || a.th_pre_fin == b.th_pre_fin);
}

std::string event_label(const Event& e) {
  return std::string(event_kind_name(e.kind)) + "#" + std::to_string(e.seq) + (e.tag.empty() ? "" : "(" + e.tag + ")");
}

}  // namespace

AgreementVerdict check_agreement(const std::vector<Event>& input) {
  std::vector<Event> log = input;
  std::sort(log.begin(), log.end(), [](const Event& a, const Event& b) { return a.seq < b.seq; });
  std::vector<std::ptrdiff_t> used_by(log.size(), -1);
  AgreementVerdict v;

  for (std::size_t i = 0; i < log.size(); ++i) {
    const Event& cf = log[i];
    if (cf.kind != EventKind::CClientFinished) continue;
    ++v.client_finished;
    std::vector<std::size_t> chain;
    std::size_t bound = i;  // predecessors must sit strictly before this index
    std::vector<std::pair<EventKind, bool>> stages;
    stages.emplace_back(EventKind::EPreServerFinished, true);
    if (!cf.psk) {
      stages.emplace_back(EventKind::ERecvdCv, true);
      stages.emplace_back(EventKind::CsSentCv, true);
    }
    stages.emplace_back(EventKind::ESentCrSrToCs, false);
    for (const auto& [kind, with_pre_fin] : stages) {
      std::optional<std::size_t> pick;
      std::optional<std::size_t> taken;
      for (std::size_t j = 0; j < bound; ++j) {
        const Event& e = log[j];
        if (e.kind != kind || !same_view(e, cf, with_pre_fin)) continue;
        if (kind == EventKind::EPreServerFinished && e.psk != cf.psk) continue;
        if (used_by[j] >= 0) {
          if (!taken) taken = j;
          continue;
        }
        pick = j;
        break;
      }
      if (!pick) {
        v.ok = false;
        if (taken) {
          v.violation = "injectivity: " + event_label(cf) + " and " + event_label(log[used_by[*taken]]) +
                        " both map to " + event_label(log[*taken]);
        } else {
          v.violation = event_label(cf) + " n_c=" + to_hex(cf.n_c) + " has no matching " +
                        std::string(event_kind_name(kind)) + " predecessor";
        }
        return v;
      }
      chain.push_back(*pick);
      bound = *pick;
    }
    for (auto j : chain) used_by[j] = static_cast<std::ptrdiff_t>(i);
    ++v.chains;
  }
  return v;
}

// ---- mangler ---------------------------------------------------------------

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Pass: return "pass";
    case Action::Drop: return "drop";
    case Action::Duplicate: return "duplicate";
    case Action::Reorder: return "reorder";
    case Action::BitFlip: return "bitflip";
    case Action::ReplayOld: return "replay-old";
  }
  return "?";
}

std::vector<Bytes> split_records(ByteView data) {
  std::vector<Bytes> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t end = data.size();
    if (data.size() - pos >= record::kHeaderLen) {
      const std::size_t len = (std::size_t{data[pos + 3]} << 8) | data[pos + 4];
      end = std::min(data.size(), pos + record::kHeaderLen + len);
    }
    out.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(pos), data.begin() + static_cast<std::ptrdiff_t>(end));
    pos = end;
  }
  return out;
}

Mangler::Mangler(ManglerPolicy p)
    : policy_(p), rng_(p.seed), pick_(policy_.weights.begin(), policy_.weights.end()) {}

std::vector<Bytes> Mangler::apply(Direction d, Bytes flight) {
  if (flight.empty()) return {};
  std::lock_guard lock(mu_);
  const auto a = static_cast<Action>(pick_(rng_));
  ++counts_[static_cast<std::size_t>(a)];
  auto& hist = history_[d == Direction::ToServer ? 0 : 1];
  std::vector<Bytes> out;
  switch (a) {
    case Action::Pass:
      out.push_back(flight);
      break;
    case Action::Drop:
      break;
    case Action::Duplicate:
      out.push_back(flight);
      out.push_back(flight);
      break;
    case Action::Reorder: {
      out = split_records(flight);
      if (out.size() >= 2) {
        const std::size_t i = rng_() % (out.size() - 1);
        std::swap(out[i], out[i + 1]);
      }
      break;
    }
    case Action::BitFlip: {
      Bytes copy = flight;
      copy[rng_() % copy.size()] ^= static_cast<std::uint8_t>(1u << (rng_() % 8));
      out.push_back(std::move(copy));
      break;
    }
    case Action::ReplayOld:
      if (!hist.empty()) out.push_back(hist[rng_() % hist.size()]);
      out.push_back(flight);
      break;
  }
  hist.push_back(std::move(flight));
  if (hist.size() > 64) hist.erase(hist.begin());
  return out;
}

std::uint64_t Mangler::count(Action a) const {
  std::lock_guard lock(mu_);
  return counts_[static_cast<std::size_t>(a)];
}

std::uint64_t Mangler::hostile_actions() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (std::size_t i = 1; i < counts_.size(); ++i) n += counts_[i];
  return n;
}

namespace {

// One in-process crypto service with an engine-side client over it.
struct Service {
  explicit Service(cs::CsOptions o = {}, cs::CsIdentity id = cs::CsIdentity::generate(crypto::SigScheme::Ed25519))
      : svc(std::move(id), std::move(o)), direct(svc), recorder(direct), cs(recorder) {}

  engine::EngineOptions engine_options(ConfigRow cert_row, std::optional<ConfigRow> psk_row = std::nullopt) const {
    engine::EngineOptions e;
    e.cert_row = cert_row;
    e.psk_row = psk_row;
    e.cert_chain = svc.cert_chain();
    e.scheme = svc.scheme();
    return e;
  }
  client::ClientOptions client_options() const {
    client::ClientOptions c;
    c.trust_anchor = svc.cert_chain().front();
    return c;
  }
  // Ticket from an honest handshake under the ticket-issuing row.
  std::optional<client::Ticket> ticket(EventLog* events = nullptr) {
    auto eo = engine_options(ConfigRow::CsCertDheR);
    eo.events = events;
    auto co = client_options();
    co.events = events;
    client::TlsClient c(co);
    engine::EngineSession e(eo, cs);
    if (!client::run_loopback(c, e) || c.tickets().empty()) return std::nullopt;
    return c.tickets().front();
  }

  cs::CryptoService svc;
  channel::InProcessTransport direct;
  channel::RecordingTransport recorder;
  channel::CsClient cs;
};

struct Slot {
  std::unique_ptr<client::TlsClient> c;
  std::unique_ptr<engine::EngineSession> e;
  Bytes to_server;
  Bytes to_client;
  bool finished = false;
  // Secrets as each side first held them; later failures wipe live copies.
  std::optional<std::pair<SecretBytes, SecretBytes>> client_view;
  std::optional<std::pair<SecretBytes, SecretBytes>> engine_view;
};

void capture(Slot& s) {
  if (!s.client_view && s.c->state() == client::TlsClient::State::Connected) {
    s.client_view.emplace(s.c->client_app_secret(), s.c->server_app_secret());
  }
  const auto es = s.e->state();
  if (!s.engine_view && (es == engine::EngineSession::State::AwaitFinished || es == engine::EngineSession::State::Done)) {
    s.engine_view.emplace(s.e->client_app_secret(), s.e->server_app_secret());
  }
}

// Delivers the pending flight of one slot through the mangler.
void step(Slot& s, Mangler& m) {
  const bool to_server = !s.to_server.empty();
  if (!to_server && s.to_client.empty()) {
    s.finished = true;
    return;
  }
  Bytes flight = std::exchange(to_server ? s.to_server : s.to_client, Bytes{});
  for (auto& part : m.apply(to_server ? Direction::ToServer : Direction::ToClient, std::move(flight))) {
    auto r = to_server ? s.e->on_receive(part) : s.c->on_receive(part);
    capture(s);
    if (!r) {
      s.finished = true;
      return;
    }
    append(to_server ? s.to_client : s.to_server, *r);
  }
}

void tally(AgreementReport& rep, const Slot& s) {
  ++rep.sessions;
  if (!s.client_view) {
    ++rep.aborted;
    return;
  }
  ++rep.completed;
  if (!s.engine_view || s.client_view->first != s.engine_view->first ||
      s.client_view->second != s.engine_view->second) {
    ++rep.mismatched_views;
  }
}

}  // namespace

AgreementReport run_agreement_battery(const AgreementOptions& opts) {
  EventLog log;
  cs::CsOptions co;
  co.events = &log;
  Service service(co);
  std::vector<client::Ticket> tickets;
  if (opts.psk_row) {
    for (std::size_t i = 0; i < opts.sessions / 4 + 1; ++i) {
      if (auto t = service.ticket(&log)) tickets.push_back(std::move(*t));
    }
  }
  Mangler mangler(opts.policy);
  std::mt19937_64 sched(opts.policy.seed ^ 0x5eed);
  AgreementReport rep;
  std::vector<Slot> live;
  std::size_t started = 0;
  auto launch = [&]() {
    const std::size_t i = started++;
    const ConfigRow row = opts.cert_rows[i % opts.cert_rows.size()];
    const bool resume = opts.psk_row && i % 4 == 3 && !tickets.empty();
    auto eo = service.engine_options(row, resume ? opts.psk_row : std::nullopt);
    eo.events = &log;
    eo.tag = "e" + std::to_string(i);
    auto cl = service.client_options();
    cl.events = &log;
    cl.tag = "c" + std::to_string(i);
    if (resume) cl.ticket = tickets[(i / 4) % tickets.size()];
    Slot s;
    s.c = std::make_unique<client::TlsClient>(cl);
    s.e = std::make_unique<engine::EngineSession>(eo, service.cs);
    auto ch = s.c->start();
    if (ch) s.to_server = std::move(ch).value();
    live.push_back(std::move(s));
  };
  while (started < opts.sessions || !live.empty()) {
    while (started < opts.sessions && live.size() < std::max<std::size_t>(1, opts.window)) launch();
    const std::size_t k = sched() % live.size();
    step(live[k], mangler);
    if (live[k].finished) {
      tally(rep, live[k]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  rep.hostile_actions = mangler.hostile_actions();
  rep.verdict = check_agreement(log.snapshot());
  return rep;
}

AgreementReport run_key_leak_control(std::size_t honest, std::size_t rogue) {
  EventLog log;
  cs::CsOptions co;
  co.events = &log;
  auto identity = cs::CsIdentity::generate(crypto::SigScheme::Ed25519);
  const crypto::SigningKey stolen = identity.sk;
  Service service(co, std::move(identity));
  engine::MonolithicBackend rogue_backend(stolen, service.svc.cert_chain());
  AgreementReport rep;
  for (std::size_t i = 0; i < honest + rogue; ++i) {
    const bool is_rogue = i >= honest;
    auto eo = service.engine_options(ConfigRow::CsCertDhe);
    eo.events = is_rogue ? nullptr : &log;
    auto cl = service.client_options();
    cl.events = &log;
    cl.tag = (is_rogue ? "victim" : "c") + std::to_string(i);
    Slot s;
    s.c = std::make_unique<client::TlsClient>(cl);
    s.e = is_rogue ? std::make_unique<engine::EngineSession>(eo, rogue_backend)
                   : std::make_unique<engine::EngineSession>(eo, service.cs);
    auto ch = s.c->start();
    if (ch) s.to_server = std::move(ch).value();
    Mangler pass(ManglerPolicy::honest());
    while (!s.finished) step(s, pass);
    tally(rep, s);
  }
  rep.verdict = check_agreement(log.snapshot());
  return rep;
}

// ---- replay ----------------------------------------------------------------

std::string_view replay_kind_name(ReplayKind k) {
  switch (k) {
    case ReplayKind::Verbatim: return "verbatim";
    case ReplayKind::StaleBinding: return "stale-binding";
    case ReplayKind::RandomNonce: return "random-nonce";
    case ReplayKind::ForeignNonce: return "foreign-nonce";
    case ReplayKind::ChannelReplay: return "channel-replay";
  }
  return "?";
}

namespace {

bool carries_nonce(MsgType t) {
  return t == MsgType::GetHandshakeSecrets || t == MsgType::GetSigAndApp || t == MsgType::GetAppSecret ||
         t == MsgType::NewTicket || t == MsgType::GetResSecret;
}

// Request payload with its engine nonce and, optionally, its transcript replaced.
Result<Bytes> rebind(MsgType t, ByteView payload, ByteView n_e, std::optional<ByteView> transcript = std::nullopt) {
  auto set = [&](auto req) -> Result<Bytes> {
    req.n_e = SecretBytes(n_e);
    if (transcript) req.transcript.assign(transcript->begin(), transcript->end());
    return req.encode();
  };
  switch (t) {
    case MsgType::GetHandshakeSecrets: {
      LURKT_ASSIGN(auto r, lurk::HandshakeSecretsRequest::decode(payload));
      return set(std::move(r));
    }
    case MsgType::GetSigAndApp: {
      LURKT_ASSIGN(auto r, lurk::SigAndAppRequest::decode(payload));
      return set(std::move(r));
    }
    case MsgType::GetAppSecret: {
      LURKT_ASSIGN(auto r, lurk::AppSecretRequest::decode(payload));
      return set(std::move(r));
    }
    case MsgType::NewTicket:
    case MsgType::GetResSecret: {
      LURKT_ASSIGN(auto r, lurk::TicketRequest::decode(payload));
      return set(std::move(r));
    }
    default:
      return make_error(Errc::MalformedPayload, "request carries no engine nonce");
  }
}

struct Recorded {
  ConfigRow row;
  lurk::LurkMessage request;
};

// Engine-side transport that rewrites one request of a live session.
class Interceptor final : public channel::Transport {
 public:
  using Rewrite = std::function<Result<Bytes>(ByteView payload)>;
  Interceptor(channel::Transport& inner, MsgType target, Rewrite rw) : inner_(inner), target_(target), rw_(std::move(rw)) {}

  Result<Bytes> round_trip(ByteView frame) override {
    auto m = lurk::decode_lurk(frame);
    if (!m || fired_ || m->request_type() != target_) return inner_.round_trip(frame);
    fired_ = true;
    auto payload = rw_(m->payload);
    if (!payload) return make_error(Errc::CsRejected, "rewrite failed");
    m->payload = std::move(payload).value();
    LURKT_ASSIGN(auto out, lurk::encode_lurk(*m));
    LURKT_ASSIGN(auto resp, inner_.round_trip(out));
    auto decoded = lurk::decode_lurk(resp);
    accepted_ = decoded && !decoded->is_error();
    if (decoded && decoded->is_error()) outcome_ = lurk::decode_error_payload(decoded->payload);
    return resp;
  }

  bool fired() const { return fired_; }
  bool accepted() const { return accepted_; }
  const std::optional<Error>& outcome() const { return outcome_; }

 private:
  channel::Transport& inner_;
  MsgType target_;
  Rewrite rw_;
  bool fired_ = false;
  bool accepted_ = false;
  std::optional<Error> outcome_;
};

std::vector<MsgType> nonce_requests(ConfigRow row) {
  std::vector<MsgType> out;
  for (auto t : accepted_requests(row)) {
    if (carries_nonce(t)) out.push_back(t);
  }
  return out;
}

Bytes nonce_of(const lurk::LurkMessage& m) {
  auto n = [](auto r) -> Bytes { return r ? r->n_e.expose() : Bytes{}; };
  switch (m.request_type()) {
    case MsgType::GetHandshakeSecrets: return n(lurk::HandshakeSecretsRequest::decode(m.payload));
    case MsgType::GetSigAndApp: return n(lurk::SigAndAppRequest::decode(m.payload));
    case MsgType::GetAppSecret: return n(lurk::AppSecretRequest::decode(m.payload));
    case MsgType::NewTicket:
    case MsgType::GetResSecret: return n(lurk::TicketRequest::decode(m.payload));
    default: return {};
  }
}

Bytes transcript_of(const lurk::LurkMessage& m) {
  switch (m.request_type()) {
    case MsgType::GetHandshakeSecrets: {
      auto r = lurk::HandshakeSecretsRequest::decode(m.payload);
      return r ? r->transcript : Bytes{};
    }
    case MsgType::GetSigAndApp: {
      auto r = lurk::SigAndAppRequest::decode(m.payload);
      return r ? r->transcript : Bytes{};
    }
    default: return {};
  }
}

}  // namespace

ReplayReport run_replay_battery(std::size_t n, std::uint64_t seed) {
  Service service;
  std::mt19937_64 rng(seed);
  ReplayReport rep;

  // Honest sessions under every row feed the pool of recorded requests.
  std::map<ConfigRow, client::Ticket> tickets;
  std::vector<Recorded> pool;
  for (int round = 0; round < 4; ++round) {
    for (ConfigRow row : kAllRows) {
      const bool psk = config_for(row).mode == AuthMode::Psk;
      if (psk && !tickets.count(row)) {
        auto t = service.ticket();
        if (!t) continue;
        tickets.emplace(row, std::move(*t));
      }
      service.recorder.clear();
      auto eo = psk ? service.engine_options(ConfigRow::CsCertDheR, row) : service.engine_options(row);
      auto co = service.client_options();
      if (psk) co.ticket = tickets.at(row);
      client::TlsClient c(co);
      engine::EngineSession e(eo, service.cs);
      if (!client::run_loopback(c, e)) continue;
      for (const auto& ex : service.recorder.exchanges()) {
        auto m = lurk::decode_lurk(ex.request);
        if (m && carries_nonce(m->request_type())) pool.push_back(Recorded{row, std::move(m).value()});
      }
    }
  }
  if (pool.empty()) return rep;

  auto reject = [&](const Error& e) { ++rep.rejections[std::string(errc_name(e.code))]; };
  const Bytes channel_key = crypto::random_bytes(channel::kChannelKeyLen);

  for (std::size_t i = 0; i < n; ++i) {
    const auto kind = static_cast<ReplayKind>(i % 5);
    ++rep.attempts;
    ++rep.by_kind[std::string(replay_kind_name(kind))];
    const Recorded& old = pool[rng() % pool.size()];

    if (kind == ReplayKind::Verbatim) {
      auto frame = lurk::encode_lurk(old.request);
      auto resp = lurk::decode_lurk(service.svc.handle(*frame));
      if (resp && !resp->is_error()) {
        ++rep.acceptances;
      } else if (resp) {
        reject(lurk::decode_error_payload(resp->payload));
      }
      continue;
    }

    if (kind == ReplayKind::ChannelReplay) {
      channel::SecureLoopbackTransport remote(service.svc, channel_key);
      Bytes first_wire;
      bool replay = false;
      // The second sealed frame is replaced by a copy of the first.
      remote.set_tap([&](ByteView wire) -> std::vector<Bytes> {
        if (!replay) first_wire.assign(wire.begin(), wire.end());
        return {first_wire};
      });
      channel::CsClient cli(remote);
      lurk::EcdheRequest opener{static_cast<std::uint8_t>(ConfigRow::CsCertDhe),
                                static_cast<std::uint16_t>(crypto::Group::X25519)};
      (void)cli.call(MsgType::GetEcdhe, {}, opener.encode());
      const auto before = remote.delivered();
      replay = true;
      auto r = cli.call(MsgType::GetEcdhe, {}, opener.encode());
      if (remote.delivered() != before || r) {
        ++rep.acceptances;
      } else {
        if (r.code() == Errc::SequenceViolation) ++rep.sequence_violations;
        reject(r.error());
      }
      continue;
    }

    // A live honest session whose request of one type is rebound to a
    // stale or foreign nonce, or to the recorded request of an old session.
    ConfigRow row = old.row;
    MsgType target = old.request.request_type();
    if (kind != ReplayKind::StaleBinding) {
      row = kAllRows[rng() % kAllRows.size()];
      auto types = nonce_requests(row);
      target = types[rng() % types.size()];
    }
    const bool psk = config_for(row).mode == AuthMode::Psk;
    if (psk && !tickets.count(row)) continue;
    Interceptor::Rewrite rw;
    switch (kind) {
      case ReplayKind::StaleBinding: {
        const Bytes n_e = nonce_of(old.request);
        const Bytes transcript = transcript_of(old.request);
        if (!transcript.empty()) {
          rw = [=](ByteView p) { return rebind(target, p, n_e, ByteView(transcript)); };
        } else {
          rw = [=](ByteView p) { return rebind(target, p, n_e); };
        }
        break;
      }
      case ReplayKind::RandomNonce: {
        const Bytes n_e = crypto::random_bytes(freshness::kNonceLen);
        rw = [=](ByteView p) { return rebind(target, p, n_e); };
        break;
      }
      default: {
        const Bytes n_e = nonce_of(old.request);
        rw = [=](ByteView p) { return rebind(target, p, n_e); };
        break;
      }
    }
    Interceptor icpt(service.direct, target, rw);
    channel::CsClient cli(icpt);
    auto eo = psk ? service.engine_options(ConfigRow::CsCertDheR, row) : service.engine_options(row);
    auto co = service.client_options();
    if (psk) co.ticket = tickets.at(row);
    client::TlsClient c(co);
    engine::EngineSession e(eo, cli);
    (void)client::run_loopback(c, e);
    if (!icpt.fired()) continue;
    // Stale bindings that keep the recorded transcript carry a consistent
    // but already bound pair; the rest carry a mismatched pair.
    const bool sid_bound_tail = kind == ReplayKind::StaleBinding && !transcript_of(old.request).empty() &&
                                target == MsgType::GetSigAndApp && !config_for(row).keyless();
    if (!sid_bound_tail) ++rep.freshness_expected;
    if (icpt.accepted()) {
      ++rep.acceptances;
    } else if (icpt.outcome()) {
      if (icpt.outcome()->code == Errc::FreshnessViolation && !sid_bound_tail) ++rep.freshness_observed;
      reject(*icpt.outcome());
    }
  }
  return rep;
}

// ---- forward secrecy -------------------------------------------------------

PfsReport run_pfs_battery(std::size_t n, ConfigRow row) {
  Service service;
  PfsReport rep;
  std::set<Bytes> shares;
  std::set<tls::Random> randoms;
  for (std::size_t i = 0; i < n; ++i) {
    client::TlsClient c(service.client_options());
    engine::EngineSession e(service.engine_options(row), service.cs);
    ++rep.handshakes;
    if (!client::run_loopback(c, e)) {
      ++rep.failures;
      continue;
    }
    shares.insert(e.server_key_share());
    randoms.insert(e.server_random());
  }
  rep.distinct_key_shares = shares.size();
  rep.distinct_server_randoms = randoms.size();
  return rep;
}

// ---- confinement -----------------------------------------------------------

ScanVerdict scan_secret_confinement(const std::vector<NamedBytes>& secrets, const std::vector<NamedBytes>& artifacts,
                                    const std::vector<Bytes>& whitelist) {
  ScanVerdict v;
  v.secrets = secrets.size();
  v.artifacts = artifacts.size();
  for (const auto& a : artifacts) v.scanned_bytes += a.bytes.size();
  for (const auto& s : secrets) {
    if (s.bytes.empty()) continue;
    if (std::find(whitelist.begin(), whitelist.end(), s.bytes) != whitelist.end()) continue;
    std::string lower = to_hex(s.bytes);
    std::string upper = lower;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
    const std::vector<std::pair<std::string_view, ByteView>> forms = {
        {"raw", s.bytes}, {"hex", as_bytes(lower)}, {"HEX", as_bytes(upper)}};
    for (const auto& a : artifacts) {
      for (const auto& [form, needle] : forms) {
        const std::size_t at = find_bytes(a.bytes, needle);
        if (at == std::string::npos) continue;
        v.ok = false;
        v.hits.push_back(s.name + " (" + std::string(form) + ") in " + a.name + " at " + std::to_string(at));
      }
    }
  }
  return v;
}

ScanVerdict run_confinement(const ConfinementOptions& opts) {
  std::mutex mu;
  std::vector<NamedBytes> secrets;
  std::vector<NamedBytes> artifacts;
  std::string log_text;
  cs::CsOptions co;
  co.debug_leak_secrets = opts.leaky;
  co.secret_observer = [&](std::string_view kind, ByteView s) {
    std::lock_guard lock(mu);
    secrets.push_back(NamedBytes{std::string(kind) + "#" + std::to_string(secrets.size()), Bytes(s.begin(), s.end())});
  };
  co.log = [&](std::string_view line) {
    std::lock_guard lock(mu);
    log_text.append(line);
    log_text.push_back('\n');
  };
  Service service(co);

  auto run_one = [&](const std::string& label, ConfigRow cert_row, std::optional<ConfigRow> psk_row,
                     std::optional<client::Ticket> ticket) -> std::optional<client::Ticket> {
    auto co2 = service.client_options();
    co2.ticket = std::move(ticket);
    client::TlsClient c(co2);
    engine::EngineSession e(service.engine_options(cert_row, psk_row), service.cs);
    service.recorder.clear();
    Bytes wire;
    std::size_t snap = 0;
    auto tap = [&](Direction, Bytes b) {
      append(wire, b);
      artifacts.push_back(NamedBytes{label + ":engine-memory#" + std::to_string(snap++), e.memory_snapshot()});
      return std::vector<Bytes>{std::move(b)};
    };
    auto ok = client::run_loopback(c, e, tap, as_bytes("GET 32"));
    artifacts.push_back(NamedBytes{label + ":engine-memory#final", e.memory_snapshot()});
    artifacts.push_back(NamedBytes{label + ":client-engine-wire", std::move(wire)});
    Bytes frames;
    for (const auto& ex : service.recorder.exchanges()) {
      append(frames, ex.request);
      append(frames, ex.response);
    }
    artifacts.push_back(NamedBytes{label + ":engine-service-wire", std::move(frames)});
    if (!ok || c.tickets().empty()) return std::nullopt;
    return c.tickets().front();
  };

  for (std::size_t r = 0; r < opts.rounds; ++r) {
    for (ConfigRow row : opts.cert_rows) {
      run_one(std::string(row_name(row)) + "/" + std::to_string(r), row, std::nullopt, std::nullopt);
    }
    for (ConfigRow row : opts.psk_rows) {
      auto t = run_one("issue/" + std::to_string(r), ConfigRow::CsCertDheR, std::nullopt, std::nullopt);
      if (!t) continue;
      run_one(std::string(row_name(row)) + "/" + std::to_string(r), ConfigRow::CsCertDheR, row, std::move(t));
    }
  }
  artifacts.push_back(NamedBytes{"service-log", Bytes(log_text.begin(), log_text.end())});
  return scan_secret_confinement(secrets, artifacts);
}

// ---- reports ---------------------------------------------------------------

namespace {

template <class T>
void field(std::ostringstream& out, std::string_view key, const T& value) {
  out << key << '\t' << value << '\n';
}

}  // namespace

std::string format_report(const AgreementReport& r) {
  std::ostringstream out;
  field(out, "sessions", r.sessions);
  field(out, "completed", r.completed);
  field(out, "aborted", r.aborted);
  field(out, "mismatched_views", r.mismatched_views);
  field(out, "hostile_actions", r.hostile_actions);
  field(out, "client_finished", r.verdict.client_finished);
  field(out, "chains", r.verdict.chains);
  field(out, "verdict", r.verdict.ok ? "accept" : "reject");
  if (!r.verdict.ok) field(out, "violation", r.verdict.violation);
  return out.str();
}

std::string format_report(const ReplayReport& r) {
  std::ostringstream out;
  field(out, "attempts", r.attempts);
  field(out, "acceptances", r.acceptances);
  field(out, "freshness_expected", r.freshness_expected);
  field(out, "freshness_observed", r.freshness_observed);
  field(out, "sequence_violations", r.sequence_violations);
  for (const auto& [k, v] : r.by_kind) field(out, "kind:" + k, v);
  for (const auto& [k, v] : r.rejections) field(out, "rejected:" + k, v);
  return out.str();
}

std::string format_report(const PfsReport& r) {
  std::ostringstream out;
  field(out, "handshakes", r.handshakes);
  field(out, "failures", r.failures);
  field(out, "distinct_key_shares", r.distinct_key_shares);
  field(out, "distinct_server_randoms", r.distinct_server_randoms);
  return out.str();
}

std::string format_report(const ScanVerdict& v) {
  std::ostringstream out;
  field(out, "secrets", v.secrets);
  field(out, "artifacts", v.artifacts);
  field(out, "scanned_bytes", v.scanned_bytes);
  field(out, "hits", v.hits.size());
  for (const auto& h : v.hits) field(out, "hit", h);
  field(out, "verdict", v.ok ? "accept" : "reject");
  return out.str();
}

}  // namespace lurkt::harness
