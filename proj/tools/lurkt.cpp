// SPDX-License-Identifier: Apache-2.0
//
// lurkt: operator entry points for the crypto service, the engine, the test
// client, the benchmark driver and the adversarial batteries.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lurkt/bench.hpp"
#include "lurkt/channel.hpp"
#include "lurkt/client.hpp"
#include "lurkt/config.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/engine.hpp"
#include "lurkt/harness.hpp"
#include "lurkt/net.hpp"

namespace {

using namespace lurkt;

// Misconfiguration exits 2, runtime failure exits 1.
struct Exit {
  int code;
  std::string message;
};

[[noreturn]] void die(int code, const std::string& message) { throw Exit{code, message}; }

template <class T>
T need(Result<T> r, int code = 2) {
  if (!r) die(code, r.error().message());
  return std::move(r).value();
}

void need(const Status& s, int code = 2) {
  if (!s) die(code, s.error().message());
}

Result<std::uint16_t> parse_group(const std::string& name) {
  if (name == "x25519") return static_cast<std::uint16_t>(crypto::Group::X25519);
  if (name == "secp256r1" || name == "p256") return static_cast<std::uint16_t>(crypto::Group::Secp256r1);
  if (name == "x448") return static_cast<std::uint16_t>(crypto::Group::X448);
  return make_error(Errc::InvalidConfig, "unknown group '" + name + "'; expected x25519, secp256r1 or x448");
}

Result<std::uint16_t> parse_suite(const std::string& name) {
  const auto* s = ks::find_suite(name);
  if (!s) {
    return make_error(Errc::InvalidConfig, "unknown suite '" + name +
                                               "'; expected TLS_AES_128_GCM_SHA256, TLS_AES_256_GCM_SHA384 or "
                                               "TLS_CHACHA20_POLY1305_SHA256");
  }
  return s->code;
}

Result<crypto::SigScheme> parse_scheme(const std::string& name) {
  if (name == "ed25519") return crypto::SigScheme::Ed25519;
  if (name == "ed448") return crypto::SigScheme::Ed448;
  return make_error(Errc::InvalidConfig, "unknown scheme '" + name + "'; expected ed25519 or ed448");
}

Bytes read_bytes(const std::string& path) {
  auto text = need(crypto::read_file(path));
  return Bytes(text.begin(), text.end());
}

void write_text(const std::string& path, const std::string& text) { need(crypto::write_file(path, as_bytes(text)), 1); }

Bytes read_trust_anchor(const std::string& path) {
  auto certs = need(crypto::certificates_from_pem(need(crypto::read_file(path))));
  if (certs.empty()) die(2, "no certificate in " + path);
  return certs.front();
}

std::optional<SecretBytes> channel_key_for(const net::Endpoint& ep, const std::string& key_path) {
  if (!key_path.empty()) return need(channel::load_channel_key(key_path));
  if (ep.kind == net::Endpoint::Kind::Tcp) die(2, "a tcp channel needs --channel-key");
  return std::nullopt;
}

void log_line(std::string_view line) { std::cerr << line << '\n'; }

// ---- keygen ----------------------------------------------------------------

struct KeygenArgs {
  std::string scheme = "ed25519";
  std::string key_out;
  std::string cert_out;
  std::string attest_key_out;
  std::string channel_key_out;
  std::string common_name = "lurkt-cs";
};

int keygen(const KeygenArgs& a) {
  if (a.key_out.empty() && a.channel_key_out.empty() && a.attest_key_out.empty()) {
    die(2, "keygen needs --key-out, --attest-key-out or --channel-key-out");
  }
  if (!a.key_out.empty()) {
    if (a.cert_out.empty()) die(2, "--key-out needs --cert-out");
    auto sk = crypto::SigningKey::generate(need(parse_scheme(a.scheme)));
    auto cert = need(crypto::self_signed_certificate(sk, a.common_name), 1);
    write_text(a.key_out, sk.to_pem());
    write_text(a.cert_out, crypto::certificate_to_pem(cert));
    std::filesystem::permissions(a.key_out, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  }
  if (!a.attest_key_out.empty()) {
    write_text(a.attest_key_out, crypto::SigningKey::generate(crypto::SigScheme::Ed25519).to_pem());
  }
  if (!a.channel_key_out.empty()) {
    write_text(a.channel_key_out, to_hex(crypto::random_bytes(channel::kChannelKeyLen)) + "\n");
  }
  return 0;
}

// ---- cs-serve --------------------------------------------------------------

struct CsArgs {
  std::string listen;
  std::string key;
  std::string cert;
  std::string attest_key;
  std::string attest_pub_out;
  std::vector<std::string> rows;
  std::string channel_key;
  std::size_t max_connections = 0;
  std::size_t psk_capacity = 4096;
  bool verbose = false;
};

std::vector<ConfigRow> parse_rows(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllRows.begin(), kAllRows.end()};
  std::vector<ConfigRow> out;
  for (const auto& n : names) out.push_back(need(parse_row(n)));
  return out;
}

int cs_serve(const CsArgs& a) {
  auto ep = need(net::parse_listen(a.listen));
  auto key = channel_key_for(ep, a.channel_key);
  auto identity = need(cs::CsIdentity::load(a.key, a.cert, a.attest_key));
  cs::CsOptions o;
  o.allowed_rows = parse_rows(a.rows);
  o.psk_capacity = a.psk_capacity;
  if (a.verbose) o.log = log_line;
  cs::CryptoService svc(std::move(identity), o);
  if (!a.attest_pub_out.empty()) write_text(a.attest_pub_out, svc.attest_public_key().to_pem());
  channel::CsServer server(svc, key);
  if (a.verbose) server.log = log_line;
  need(server.listen(ep), 1);
  if (ep.kind == net::Endpoint::Kind::Tcp) ep.port = server.port();
  std::cout << "listening " << ep.to_string() << std::endl;
  server.serve(a.max_connections);
  return 0;
}

// ---- engine-serve ----------------------------------------------------------

struct EngineArgs {
  std::string listen;
  std::string cs = "inprocess";
  std::string channel_key;
  std::string row = "cs_cert_dhe_r";
  std::string psk_row;
  std::string resumption = "on";
  std::string key;
  std::string cert;
  std::string trust_out;
  std::string attest_pub_out;
  std::string quote_dir;
  std::vector<std::string> suites;
  std::vector<std::string> groups;
  std::size_t max_connections = 0;
  bool monolithic = false;
  bool verbose = false;
};

int engine_serve(const EngineArgs& a) {
  auto listen_ep = need(net::parse_listen(a.listen));
  engine::EngineOptions eo;
  const ConfigRow row = need(parse_row(a.row));
  if (config_for(row).mode == AuthMode::Psk) {
    eo.psk_row = row;
  } else {
    eo.cert_row = row;
  }
  if (!a.psk_row.empty()) eo.psk_row = need(parse_row(a.psk_row));
  if (a.resumption != "on" && a.resumption != "off") die(2, "--resumption expects on or off");
  if (a.resumption == "off") {
    eo.psk_row.reset();
    eo.cert_row = without_resumption(eo.cert_row);
  }
  if (!a.suites.empty()) {
    eo.suites.clear();
    for (const auto& s : a.suites) eo.suites.push_back(need(parse_suite(s)));
  }
  if (!a.groups.empty()) {
    eo.groups.clear();
    for (const auto& g : a.groups) eo.groups.push_back(need(parse_group(g)));
  }

  // Service or backend in this process when the service is not remote.
  const auto target = need(net::parse_endpoint(a.cs));
  std::unique_ptr<cs::CryptoService> local;
  std::unique_ptr<engine::MonolithicBackend> mono;
  std::unique_ptr<channel::Transport> transport;
  if (target.kind == net::Endpoint::Kind::InProcess || a.monolithic) {
    if (a.key.empty() != a.cert.empty()) die(2, "--key and --cert go together");
    auto identity = a.key.empty() ? cs::CsIdentity::generate(crypto::SigScheme::Ed25519)
                                  : need(cs::CsIdentity::load(a.key, a.cert));
    if (!a.trust_out.empty()) write_text(a.trust_out, crypto::certificate_to_pem(identity.cert_chain.front()));
    eo.cert_chain = identity.cert_chain;
    eo.scheme = identity.sk.scheme();
    if (a.monolithic) {
      mono = std::make_unique<engine::MonolithicBackend>(identity.sk, identity.cert_chain);
    } else {
      cs::CsOptions co;
      if (a.verbose) co.log = log_line;
      local = std::make_unique<cs::CryptoService>(std::move(identity), co);
      if (!a.attest_pub_out.empty()) write_text(a.attest_pub_out, local->attest_public_key().to_pem());
      transport = std::make_unique<channel::InProcessTransport>(*local);
    }
  } else {
    if (a.cert.empty()) die(2, "a remote crypto service needs --cert with its public chain");
    eo.cert_chain = need(crypto::certificates_from_pem(need(crypto::read_file(a.cert))));
    if (eo.cert_chain.empty()) die(2, "no certificate in " + a.cert);
    eo.scheme = need(need(crypto::PublicKey::from_certificate(eo.cert_chain.front())).scheme());
    auto key = channel_key_for(target, a.channel_key);
    transport = need(channel::StreamTransport::connect(target, std::move(key)), 1);
  }
  need(engine::validate(eo));

  std::unique_ptr<channel::CsClient> cs;
  std::unique_ptr<engine::EngineServer> server;
  if (mono) {
    server = std::make_unique<engine::EngineServer>(eo, *mono);
  } else {
    cs = std::make_unique<channel::CsClient>(*transport);
    server = std::make_unique<engine::EngineServer>(eo, *cs);
  }
  if (a.verbose) server->log = log_line;
  if (!a.quote_dir.empty() && !mono) {
    std::filesystem::create_directories(a.quote_dir);
    auto counter = std::make_shared<std::atomic<int>>(0);
    server->on_complete = [dir = a.quote_dir, counter](engine::EngineSession& s) {
      auto att = s.attest();
      if (!att) {
        log_line("attest: " + att.error().message());
        return;
      }
      const std::string n = std::to_string((*counter)++);
      (void)crypto::write_file(dir + "/quote-" + n + ".bin", att->quote.encode());
      (void)crypto::write_file(dir + "/context-" + n + ".bin", att->context);
    };
  }
  need(server->listen(listen_ep), 1);
  if (listen_ep.kind == net::Endpoint::Kind::Tcp) listen_ep.port = server->port();
  std::cout << "listening " << listen_ep.to_string() << std::endl;
  server->serve(a.max_connections);
  std::cout << "completed " << server->completed() << " failed " << server->failed() << std::endl;
  return 0;
}

// ---- client / resume -------------------------------------------------------

struct ClientArgs {
  std::string connect;
  std::string trust;
  std::vector<std::string> suites;
  std::string group;
  std::string request = "GET 64";
  std::size_t expect = 0;
  std::size_t n = 1;
  std::string ticket_out;
  std::string ticket;
  bool require_resumption = false;
};

client::ClientOptions client_options(const ClientArgs& a) {
  client::ClientOptions co;
  co.trust_anchor = read_trust_anchor(a.trust);
  if (!a.suites.empty()) {
    co.suites.clear();
    for (const auto& s : a.suites) co.suites.push_back(need(parse_suite(s)));
  }
  if (!a.group.empty()) {
    const auto g = need(parse_group(a.group));
    co.groups.erase(std::remove(co.groups.begin(), co.groups.end(), g), co.groups.end());
    co.groups.insert(co.groups.begin(), g);
  }
  return co;
}

std::size_t expected_bytes(const ClientArgs& a) {
  if (a.expect) return a.expect;
  if (a.request.rfind("GET ", 0) == 0) {
    try {
      return std::stoul(a.request.substr(4));
    } catch (const std::exception&) {
    }
  }
  return a.request.size();
}

int run_client(const ClientArgs& a, bool resume) {
  auto ep = need(net::parse_listen(a.connect));
  if (ep.kind != net::Endpoint::Kind::Tcp && ep.kind != net::Endpoint::Kind::Unix) die(2, "--connect needs HOST:PORT");
  auto co = client_options(a);
  if (resume) {
    co.ticket = need(client::parse_ticket(need(crypto::read_file(a.ticket))));
    co.require_resumption = a.require_resumption;
  }
  const std::size_t expect = expected_bytes(a);
  std::size_t resumed = 0;
  std::size_t rejected = 0;
  std::size_t bytes = 0;
  std::optional<client::Ticket> last_ticket;
  client::SessionReport last;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, a.n); ++i) {
    last = need(client::connect_tcp(ep, co, as_bytes(a.request), expect), 1);
    if (last.response.size() != expect) {
      die(1, "response of " + std::to_string(last.response.size()) + " bytes, expected " + std::to_string(expect));
    }
    resumed += last.resumed;
    rejected += last.psk_rejected;
    bytes += last.response.size();
    if (!last.tickets.empty()) last_ticket = last.tickets.front();
  }
  if (!a.ticket_out.empty()) {
    if (!last_ticket) die(1, "the server issued no ticket");
    write_text(a.ticket_out, client::serialize_ticket(*last_ticket));
  }
  std::cout << "ok handshakes " << std::max<std::size_t>(1, a.n) << " suite " << ks::find_suite(last.suite)->name
            << " group " << crypto::group_name(static_cast<crypto::Group>(last.group)) << " resumed " << resumed
            << " psk_rejected " << rejected << " bytes " << bytes << std::endl;
  return 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> suites{"x25519_ed25519", "x448_ed448"};
  std::vector<std::string> rows;
  std::vector<std::string> channels{"inprocess"};
  std::size_t n = 1000;
  std::size_t parallel = 1;
  bool transfer = false;
  std::string transfer_row = "cs_cert_dhe_r";
  std::vector<std::size_t> sizes{0, 1024, 65536, 1 << 20};
};

int run_bench(const BenchArgs& a) {
  std::vector<bench::BenchSuite> suites;
  for (const auto& s : a.suites) suites.push_back(need(bench::find_bench_suite(s)));
  const auto rows = parse_rows(a.rows);
  std::vector<bench::ChannelMode> channels;
  for (const auto& c : a.channels) channels.push_back(need(bench::parse_channel(c)));
  std::vector<bench::BenchResult> results;
  for (const auto& suite : suites) {
    bench::BenchOptions o;
    o.n = a.n;
    o.parallel = a.parallel;
    results.push_back(need(bench::measure_kex(bench::Target::baseline(), suite, o), 1));
    results.push_back(need(bench::measure_kex(bench::Target::baseline_resumed(), suite, o), 1));
    for (auto ch : channels) {
      o.channel = ch;
      for (auto row : rows) results.push_back(need(bench::measure_kex(bench::Target::split(row), suite, o), 1));
    }
  }
  std::cout << bench::format_kex_report(results);
  if (a.transfer) {
    bench::BenchOptions o;
    o.n = a.n;
    o.parallel = a.parallel;
    o.channel = channels.front();
    auto rows_t = need(bench::transfer_trend(a.sizes, bench::Target::split(need(parse_row(a.transfer_row))),
                                             suites.front(), o),
                       1);
    std::cout << "# transfer " << suites.front().name << ' ' << a.transfer_row << ' '
              << bench::channel_name(o.channel) << '\n'
              << bench::format_trend(rows_t);
  }
  return 0;
}

// ---- attack ----------------------------------------------------------------

struct AttackArgs {
  std::string battery = "replay";
  std::size_t n = 1000;
  std::uint64_t seed = 1;
};

int run_attack(const AttackArgs& a) {
  bool pass = true;
  const bool all = a.battery == "all";
  bool known = all;
  if (all || a.battery == "replay") {
    known = true;
    auto r = harness::run_replay_battery(a.n, a.seed);
    std::cout << "# replay\n" << harness::format_report(r);
    pass &= r.acceptances == 0 && r.freshness_observed == r.freshness_expected;
  }
  if (all || a.battery == "agreement") {
    known = true;
    harness::AgreementOptions o;
    o.sessions = a.n;
    o.policy = harness::ManglerPolicy::hostile(a.seed);
    auto r = harness::run_agreement_battery(o);
    std::cout << "# agreement\n" << harness::format_report(r);
    pass &= r.verdict.ok && r.mismatched_views == 0;
  }
  if (all || a.battery == "leak-control") {
    known = true;
    auto r = harness::run_key_leak_control(10, 1);
    std::cout << "# leak-control\n" << harness::format_report(r);
    pass &= !r.verdict.ok;
  }
  if (all || a.battery == "pfs") {
    known = true;
    auto r = harness::run_pfs_battery(a.n);
    std::cout << "# pfs\n" << harness::format_report(r);
    pass &= r.failures == 0 && r.distinct_key_shares == a.n && r.distinct_server_randoms == a.n;
  }
  if (all || a.battery == "confinement") {
    known = true;
    auto v = harness::run_confinement({});
    std::cout << "# confinement\n" << harness::format_report(v);
    pass &= v.ok;
  }
  if (!known) die(2, "unknown battery '" + a.battery + "'; expected replay, agreement, leak-control, pfs, confinement or all");
  std::cout << "result\t" << (pass ? "pass" : "fail") << std::endl;
  return pass ? 0 : 1;
}

// ---- attest-verify ---------------------------------------------------------

struct AttestArgs {
  std::string quote;
  std::string context;
  std::string attest_pub;
  std::vector<std::string> measurements;
};

int attest_verify(const AttestArgs& a) {
  auto quote = need(lurk::Quote::decode(read_bytes(a.quote)));
  const Bytes context = read_bytes(a.context);
  auto pub = need(crypto::PublicKey::from_pem(need(crypto::read_file(a.attest_pub))));
  std::vector<Bytes> allowed;
  for (const auto& m : a.measurements) allowed.push_back(need(from_hex(m)));
  if (allowed.empty()) allowed.push_back(cs::build_measurement());
  const Bytes h = crypto::digest(crypto::HashAlg::Sha256, context);
  if (!cs::verify_quote(quote, h, pub, allowed)) {
    std::cout << "quote rejected" << std::endl;
    return 1;
  }
  std::cout << "quote ok measurement " << to_hex(quote.measurement) << " context " << to_hex(h) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lurkt: split TLS 1.3 server with a credential-holding crypto service"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "line-oriented key = value file; flags override it");

  KeygenArgs kg;
  auto* k = app.add_subcommand("keygen", "generate a signing key and certificate, or a channel key");
  k->add_option("--scheme", kg.scheme, "ed25519 or ed448");
  k->add_option("--key-out", kg.key_out, "PEM private key output");
  k->add_option("--cert-out", kg.cert_out, "PEM self-signed certificate output");
  k->add_option("--attest-key-out", kg.attest_key_out, "PEM attestation key output");
  k->add_option("--channel-key-out", kg.channel_key_out, "hex channel key output");
  k->add_option("--cn", kg.common_name, "certificate common name");

  CsArgs cs;
  auto* c = app.add_subcommand("cs-serve", "run the crypto service");
  c->add_option("--listen", cs.listen, "unix:PATH, tcp:HOST:PORT or HOST:PORT")->required();
  c->add_option("--key", cs.key, "PEM signing key")->required();
  c->add_option("--cert", cs.cert, "PEM certificate chain, leaf first")->required();
  c->add_option("--attest-key", cs.attest_key, "PEM attestation key; generated when absent");
  c->add_option("--attest-pub-out", cs.attest_pub_out, "write the attestation public key (PEM)");
  c->add_option("--config", cs.rows, "allowed configuration rows (repeatable; default all)");
  c->add_option("--channel-key", cs.channel_key, "hex channel key file; required for tcp");
  c->add_option("--max-connections", cs.max_connections, "exit after this many connections (0 = never)");
  c->add_option("--psk-capacity", cs.psk_capacity, "stored PSK limit");
  c->add_flag("--verbose", cs.verbose, "log requests to stderr");

  EngineArgs en;
  auto* e = app.add_subcommand("engine-serve", "run the TLS engine");
  e->add_option("--listen", en.listen, "HOST:PORT or unix:PATH")->required();
  e->add_option("--cs", en.cs, "inprocess, unix:PATH or tcp:HOST:PORT");
  e->add_option("--channel-key", en.channel_key, "hex channel key file; required for tcp");
  e->add_option("--config", en.row, "configuration row");
  e->add_option("--psk-config", en.psk_row, "row serving resumed handshakes");
  e->add_option("--resumption", en.resumption, "on or off");
  e->add_option("--key", en.key, "PEM signing key for an in-process service");
  e->add_option("--cert", en.cert, "PEM certificate chain");
  e->add_option("--trust-out", en.trust_out, "write the served certificate (PEM)");
  e->add_option("--attest-pub-out", en.attest_pub_out, "write the in-process attestation public key (PEM)");
  e->add_option("--quote-dir", en.quote_dir, "write a quote and context capture per completed session");
  e->add_option("--suite", en.suites, "allowed cipher suites (repeatable)");
  e->add_option("--group", en.groups, "allowed groups (repeatable)");
  e->add_option("--max-connections", en.max_connections, "exit after this many connections (0 = never)");
  e->add_flag("--monolithic", en.monolithic, "hold the credentials in the engine (baseline)");
  e->add_flag("--verbose", en.verbose, "log failures to stderr");

  ClientArgs cl;
  auto* cc = app.add_subcommand("client", "full handshake and one request");
  ClientArgs rs;
  auto* rr = app.add_subcommand("resume", "resumed handshake from a stored ticket");
  for (auto [cmd, args] : {std::pair{cc, &cl}, std::pair{rr, &rs}}) {
    cmd->add_option("--connect", args->connect, "HOST:PORT or unix:PATH")->required();
    cmd->add_option("--trust", args->trust, "PEM trust anchor")->required();
    cmd->add_option("--suite", args->suites, "offered cipher suites (repeatable)");
    cmd->add_option("--group", args->group, "key share group");
    cmd->add_option("--request", args->request, "application request");
    cmd->add_option("--expect", args->expect, "response length");
    cmd->add_option("--n", args->n, "handshake count");
    cmd->add_option("--ticket-out", args->ticket_out, "store the last issued ticket");
  }
  rr->add_option("--ticket", rs.ticket, "ticket file from client --ticket-out")->required();
  rr->add_flag("--require-resumption", rs.require_resumption, "fail when the server runs a full handshake");

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "KEX/s of every row against the monolithic baseline");
  b->add_option("--suite", bn.suites, "x25519_ed25519, p256_ed25519, x448_ed448 (repeatable)");
  b->add_option("--config", bn.rows, "rows (repeatable; default all)");
  b->add_option("--channel", bn.channels, "inprocess, unix, tcp (repeatable)");
  b->add_option("--n", bn.n, "handshakes per cell");
  b->add_option("--parallel", bn.parallel, "concurrent client loops");
  b->add_flag("--transfer", bn.transfer, "also report the transfer trend");
  b->add_option("--transfer-config", bn.transfer_row, "row for the transfer trend");
  b->add_option("--size", bn.sizes, "transfer sizes in bytes (repeatable)");

  AttackArgs at;
  auto* a = app.add_subcommand("attack", "adversarial batteries");
  a->add_option("--battery", at.battery, "replay, agreement, leak-control, pfs, confinement or all");
  a->add_option("--n", at.n, "attempts or sessions");
  a->add_option("--seed", at.seed, "mangler and selection seed");

  AttestArgs av;
  auto* v = app.add_subcommand("attest-verify", "check a quote against a context capture");
  v->add_option("--quote", av.quote, "quote file")->required();
  v->add_option("--context", av.context, "handshake context capture")->required();
  v->add_option("--attest-pub", av.attest_pub, "PEM attestation public key")->required();
  v->add_option("--measurement", av.measurements, "allowed measurements, hex (default: this build)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*k) return keygen(kg);
    if (*c) return cs_serve(cs);
    if (*e) return engine_serve(en);
    if (*cc) return run_client(cl, false);
    if (*rr) return run_client(rs, true);
    if (*b) return run_bench(bn);
    if (*a) return run_attack(at);
    if (*v) return attest_verify(av);
  } catch (const Exit& x) {
    std::cerr << "lurkt: " << x.message << std::endl;
    return x.code;
  }
  return 2;
}
