// SPDX-License-Identifier: Apache-2.0
#include "lurkt/bench.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "lurkt/channel.hpp"
#include "lurkt/client.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/engine.hpp"

namespace lurkt::bench {

const std::vector<BenchSuite>& bench_suites() {
  static const std::vector<BenchSuite> suites = {
      {"x25519_ed25519", ks::kAes128GcmSha256, static_cast<std::uint16_t>(crypto::Group::X25519),
       crypto::SigScheme::Ed25519},
      {"p256_ed25519", ks::kAes128GcmSha256, static_cast<std::uint16_t>(crypto::Group::Secp256r1),
       crypto::SigScheme::Ed25519},
      {"x448_ed448", ks::kAes256GcmSha384, static_cast<std::uint16_t>(crypto::Group::X448), crypto::SigScheme::Ed448},
  };
  return suites;
}

Result<BenchSuite> find_bench_suite(std::string_view name) {
  std::string names;
  for (const auto& s : bench_suites()) {
    if (s.name == name) return s;
    names += (names.empty() ? "" : ", ") + s.name;
  }
  return make_error(Errc::InvalidConfig, "unknown suite '" + std::string(name) + "'; expected one of: " + names);
}

std::string_view channel_name(ChannelMode m) {
  switch (m) {
    case ChannelMode::InProcess: return "inprocess";
    case ChannelMode::Unix: return "unix";
    case ChannelMode::Tcp: return "tcp";
  }
  return "?";
}

Result<ChannelMode> parse_channel(std::string_view name) {
  for (auto m : {ChannelMode::InProcess, ChannelMode::Unix, ChannelMode::Tcp}) {
    if (channel_name(m) == name) return m;
  }
  return make_error(Errc::InvalidConfig, "unknown channel '" + std::string(name) + "'; expected inprocess, unix or tcp");
}

bool Target::psk() const { return row ? config_for(*row).mode == AuthMode::Psk : resumed; }

std::string Target::name() const {
  if (row) return std::string(row_name(*row));
  return resumed ? "baseline_psk" : "baseline";
}

namespace {

// Crypto service or monolithic backend, plus the channel engines use to
// reach the service.
class Deployment {
 public:
  static Result<std::unique_ptr<Deployment>> start(const Target& t, const BenchSuite& suite, ChannelMode mode) {
    auto d = std::unique_ptr<Deployment>(new Deployment());
    auto identity = cs::CsIdentity::generate(suite.scheme);
    d->chain_ = identity.cert_chain;
    if (!t.row) {
      d->mono_ = std::make_unique<engine::MonolithicBackend>(identity.sk, identity.cert_chain);
      return d;
    }
    d->svc_ = std::make_unique<cs::CryptoService>(std::move(identity));
    if (mode == ChannelMode::InProcess) return d;
    static std::atomic<int> counter{0};
    if (mode == ChannelMode::Unix) {
      d->ep_.kind = net::Endpoint::Kind::Unix;
      d->ep_.path = "/tmp/lurkt-bench-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".sock";
    } else {
      d->ep_.kind = net::Endpoint::Kind::Tcp;
      d->ep_.host = "127.0.0.1";
      d->key_ = SecretBytes(crypto::random_bytes(channel::kChannelKeyLen));
    }
    d->server_ = std::make_unique<channel::CsServer>(*d->svc_, d->key_);
    LURKT_TRY(d->server_->listen(d->ep_));
    if (mode == ChannelMode::Tcp) d->ep_.port = d->server_->port();
    d->thread_ = std::thread([s = d->server_.get()] { s->serve(); });
    return d;
  }

  ~Deployment() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    if (ep_.kind == net::Endpoint::Kind::Unix) ::unlink(ep_.path.c_str());
  }

  Result<std::unique_ptr<channel::Transport>> transport() {
    if (!svc_) return std::unique_ptr<channel::Transport>();
    if (!server_) return std::unique_ptr<channel::Transport>(std::make_unique<channel::InProcessTransport>(*svc_));
    LURKT_ASSIGN(auto t, channel::StreamTransport::connect(ep_, key_));
    return std::unique_ptr<channel::Transport>(std::move(t));
  }

  engine::MonolithicBackend* mono() { return mono_.get(); }
  const std::vector<Bytes>& chain() const { return chain_; }

 private:
  Deployment() = default;
  std::unique_ptr<cs::CryptoService> svc_;
  std::unique_ptr<engine::MonolithicBackend> mono_;
  std::unique_ptr<channel::CsServer> server_;
  std::thread thread_;
  net::Endpoint ep_;
  std::optional<SecretBytes> key_;
  std::vector<Bytes> chain_;
};

// One handshake (and optional request) over an in-memory client link.
Status one_session(const engine::EngineOptions& eo, const client::ClientOptions& co, channel::CsClient* cs,
                   engine::MonolithicBackend* mono, ByteView request, std::size_t expect,
                   std::optional<client::Ticket>* issued = nullptr) {
  client::TlsClient c(co);
  std::unique_ptr<engine::EngineSession> e = mono ? std::make_unique<engine::EngineSession>(eo, *mono)
                                                  : std::make_unique<engine::EngineSession>(eo, *cs);
  LURKT_TRY(client::run_loopback(c, *e, {}, request));
  if (!request.empty() && c.take_received().size() != expect) {
    return make_error(Errc::TargetUnavailable, "short application response");
  }
  if (issued && !c.tickets().empty()) *issued = c.tickets().front();
  return {};
}

Result<BenchResult> run(const Target& target, const BenchSuite& suite, const BenchOptions& opts, ByteView request,
                        std::size_t expect) {
  if (opts.n == 0) return make_error(Errc::InvalidConfig, "handshake count must be positive");
  auto dep = Deployment::start(target, suite, opts.channel);
  if (!dep) return make_error(Errc::TargetUnavailable, dep.error().message());
  auto& d = **dep;

  engine::EngineOptions eo;
  eo.cert_chain = d.chain();
  eo.scheme = suite.scheme;
  client::ClientOptions co;
  co.suites = {suite.cipher_suite};
  co.groups = {suite.group};
  co.trust_anchor = d.chain().front();

  const bool psk = target.psk();
  // The certificate baseline runs a plain (EC)DHE handshake; PSK targets
  // resume from a ticket issued up front.
  eo.cert_row = psk ? ConfigRow::CsCertDheR : target.row.value_or(ConfigRow::CsCertDhe);
  if (psk) {
    auto t = d.transport();
    if (!t) return make_error(Errc::TargetUnavailable, t.error().message());
    std::unique_ptr<channel::CsClient> cs;
    if (*t) cs = std::make_unique<channel::CsClient>(**t);
    std::optional<client::Ticket> ticket;
    LURKT_TRY(one_session(eo, co, cs.get(), d.mono(), {}, 0, &ticket));
    if (!ticket) return make_error(Errc::TargetUnavailable, "no ticket issued for the resumption benchmark");
    eo.psk_row = target.row.value_or(ConfigRow::CsPskDheR);
    co.ticket = std::move(ticket);
    co.require_resumption = true;
  }

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.parallel, opts.n));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex err_mu;
  std::optional<Error> first_error;
  auto worker = [&] {
    std::unique_ptr<channel::Transport> t;
    std::unique_ptr<channel::CsClient> cs;
    if (!d.mono()) {
      auto tr = d.transport();
      if (!tr) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = tr.error();
        return;
      }
      t = std::move(tr).value();
      cs = std::make_unique<channel::CsClient>(*t);
    }
    while (next.fetch_add(1) < opts.n) {
      auto s = one_session(eo, co, cs.get(), d.mono(), request, expect);
      if (!s) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = s.error();
        return;
      }
      ++done;
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (first_error) return make_error(Errc::TargetUnavailable, first_error->message());

  BenchResult r;
  r.suite = suite.name;
  r.config = target.name();
  r.channel = opts.channel;
  r.count = done;
  r.wall_seconds = secs;
  r.kex_per_sec = secs > 0 ? static_cast<double>(r.count) / secs : 0;
  return r;
}

}  // namespace

Result<BenchResult> measure_kex(const Target& target, const BenchSuite& suite, const BenchOptions& opts) {
  return run(target, suite, opts, {}, 0);
}

Result<double> delta_kex(const BenchResult& baseline, const BenchResult& split) {
  if (baseline.suite != split.suite) {
    return make_error(Errc::SuiteMismatch, "baseline suite " + baseline.suite + " vs split suite " + split.suite);
  }
  if (!(baseline.kex_per_sec > 0)) return make_error(Errc::SuiteMismatch, "baseline rate is not positive");
  return std::fabs(split.kex_per_sec - baseline.kex_per_sec) / baseline.kex_per_sec * 100.0;
}

Result<BenchResult> measure_transfer(std::size_t file_size, const Target& target, const BenchSuite& suite,
                                     const BenchOptions& opts) {
  const std::string request = "GET " + std::to_string(file_size);
  return run(target, suite, opts, as_bytes(request), file_size);
}

Result<std::vector<TransferRow>> transfer_trend(const std::vector<std::size_t>& sizes, const Target& split,
                                                const BenchSuite& suite, const BenchOptions& opts) {
  // Baseline and split alternate in short blocks, ordered ABBA, so drift in
  // machine load lands on both sides instead of on whichever ran second.
  constexpr std::size_t kBlocks = 10;
  if (opts.n == 0) return make_error(Errc::TargetUnavailable, "transfer count must be positive");
  const std::size_t blocks = std::min(kBlocks, opts.n);
  std::vector<TransferRow> rows;
  for (auto size : sizes) {
    BenchResult base, s;
    base.suite = s.suite = suite.name;
    for (std::size_t i = 0; i < blocks; ++i) {
      BenchOptions bo = opts;
      bo.n = opts.n / blocks + (i < opts.n % blocks ? 1 : 0);
      for (int side = 0; side < 2; ++side) {
        const bool split_side = (side == 1) != (i % 2 == 1);
        LURKT_ASSIGN(auto r, measure_transfer(size, split_side ? split : Target::baseline(), suite, bo));
        BenchResult& acc = split_side ? s : base;
        acc.count += r.count;
        acc.wall_seconds += r.wall_seconds;
      }
    }
    base.kex_per_sec = static_cast<double>(base.count) / base.wall_seconds;
    s.kex_per_sec = static_cast<double>(s.count) / s.wall_seconds;
    LURKT_ASSIGN(auto d, delta_kex(base, s));
    rows.push_back(TransferRow{size, base.kex_per_sec, s.kex_per_sec, d});
  }
  return rows;
}

std::string format_kex_report(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  std::vector<std::string> order;
  std::map<std::string, std::vector<const BenchResult*>> by_suite;
  for (const auto& r : results) {
    if (!by_suite.count(r.suite)) order.push_back(r.suite);
    by_suite[r.suite].push_back(&r);
  }
  for (const auto& suite : order) {
    const BenchResult* base = nullptr;
    const BenchResult* base_psk = nullptr;
    for (const auto* r : by_suite[suite]) {
      if (!base && r->config == "baseline") base = r;
      if (!base_psk && r->config == "baseline_psk") base_psk = r;
    }
    out << "# suite " << suite << '\n' << "config\tchannel\tKEX/s\tdelta%\n";
    for (const auto* r : by_suite[suite]) {
      out << r->config << '\t' << channel_name(r->channel) << '\t' << r->kex_per_sec << '\t';
      auto row = parse_row(r->config);
      const bool psk = r->config == "baseline_psk" || (row && config_for(*row).mode == AuthMode::Psk);
      const BenchResult* ref = psk ? base_psk : base;
      auto d = ref ? delta_kex(*ref, *r) : Result<double>(make_error(Errc::SuiteMismatch));
      if (d) {
        out << *d;
      } else {
        out << '-';
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string format_trend(const std::vector<TransferRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "file_size\tbaseline_req/s\tsplit_req/s\tdelta%\n";
  for (const auto& r : rows) {
    out << r.file_size << '\t' << r.baseline_rps << '\t' << r.split_rps << '\t' << r.delta << '\n';
  }
  return out.str();
}

}  // namespace lurkt::bench
