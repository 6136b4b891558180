// SPDX-License-Identifier: Apache-2.0
//
// The crypto service: sole holder of the signing key, stored PSKs and
// service-generated ephemerals. Serves LURK requests per configuration row,
// binds every transcript-bearing request to the engine nonce, and quotes
// completed handshake contexts.
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/channel.hpp"
#include "lurkt/config.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/error.hpp"
#include "lurkt/events.hpp"
#include "lurkt/key_schedule.hpp"
#include "lurkt/lurk.hpp"
#include "lurkt/tls_codec.hpp"

namespace lurkt::cs {

// Build identifier reported in every quote.
Bytes build_measurement();

struct CsIdentity {
  crypto::SigningKey sk;
  std::vector<Bytes> cert_chain;  // DER, leaf first
  crypto::SigningKey attest_sk;
  Bytes measurement;

  static CsIdentity generate(crypto::SigScheme scheme, const std::string& common_name = "lurkt-cs");
  // PEM key and chain; the leaf must carry the key's public half. A fresh
  // attestation key is generated when no path is given.
  static Result<CsIdentity> load(const std::string& key_path, const std::string& cert_path,
                                 const std::string& attest_key_path = {});
  // Encoded Certificate handshake message with an empty request context.
  Bytes certificate_message() const;
};

// Fixed-size store entry; the PSK buffer fits the largest supported hash.
struct PskEntry {
  std::array<std::uint8_t, 8> id{};
  std::array<std::uint8_t, 48> psk{};
  std::uint8_t psk_len = 0;
  crypto::HashAlg hash = crypto::HashAlg::Sha256;
  std::int64_t created_ms = 0;
};
static_assert(sizeof(PskEntry) <= 128, "PSK store entry above the per-session budget");

// Bounded map psk_id -> PSK. Oldest entries are evicted first when full,
// or StoreFull is reported when eviction is disabled.
class PskStore {
 public:
  PskStore(std::size_t capacity, bool evict_oldest);
  ~PskStore();
  PskStore(const PskStore&) = delete;
  PskStore& operator=(const PskStore&) = delete;

  Status put(const lurk::SessionId& id, ByteView psk, crypto::HashAlg hash, std::int64_t now_ms);
  struct Found {
    SecretBytes psk;
    crypto::HashAlg hash;
  };
  std::optional<Found> get(ByteView id) const;
  bool contains(ByteView id) const;
  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t evictions() const { return evictions_; }
  // Calls f(id, psk) for every stored entry; test hook for confinement scans.
  void for_each(const std::function<void(ByteView, ByteView)>& f) const;

 private:
  void erase_front();
  std::size_t capacity_;
  bool evict_;
  std::list<PskEntry> order_;
  std::map<std::array<std::uint8_t, 8>, std::list<PskEntry>::iterator> index_;
  std::uint64_t evictions_ = 0;
};

struct CsOptions {
  std::vector<ConfigRow> allowed_rows{kAllRows.begin(), kAllRows.end()};
  std::size_t psk_capacity = 4096;
  bool psk_evict_oldest = true;
  std::chrono::milliseconds attest_window{60'000};
  std::size_t attest_capacity = 1024;
  // Abandoned sessions are purged after this idle time.
  std::chrono::milliseconds session_idle_limit{60'000};
  // Skips the N_S == phi(N_E) check. Trace replay only.
  bool test_bypass_freshness = false;
  // Writes ephemerals and PSKs to the log sink. Leak fixture only.
  bool debug_leak_secrets = false;
  EventLog* events = nullptr;
  // Reports every secret the service creates or holds ("sk", "attest_sk", "v", "psk").
  std::function<void(std::string_view kind, ByteView secret)> secret_observer;
  std::function<void(std::string_view line)> log;
  std::function<std::chrono::steady_clock::time_point()> now = [] { return std::chrono::steady_clock::now(); };
};

// Values reproduced from a cached handshake context.
struct Recomputed {
  Bytes psign;
  SecretBytes client_hs;
  SecretBytes server_hs;
  SecretBytes client_app;
  SecretBytes server_app;
};

class CryptoService final : public channel::FrameHandler {
 public:
  explicit CryptoService(CsIdentity identity, CsOptions options = {});
  ~CryptoService() override;

  // Always answers with one frame: a response or an ERROR frame.
  Bytes handle(ByteView request_frame) override;
  // Decoded form of handle(); errors are returned rather than framed.
  Result<lurk::LurkMessage> dispatch(const lurk::LurkMessage& request);

  // Reproduces psign and the handshake/application secrets of a cached
  // session whose ephemeral was service-generated. The presented context
  // must equal the cached one.
  Result<Recomputed> recompute_from_context(const lurk::SessionId& sid, ByteView h_ctx);

  crypto::PublicKey public_key() const { return identity_.sk.public_key(); }
  crypto::PublicKey attest_public_key() const { return identity_.attest_sk.public_key(); }
  const Bytes& measurement() const { return identity_.measurement; }
  const std::vector<Bytes>& cert_chain() const { return identity_.cert_chain; }
  crypto::SigScheme scheme() const { return identity_.sk.scheme(); }

  std::size_t live_sessions() const;
  std::size_t cached_sessions() const;
  std::size_t psk_count() const;
  std::uint64_t requests_handled() const;
  std::uint64_t requests_accepted() const;
  // Secrets held right now, for confinement scans.
  void for_each_secret(const std::function<void(std::string_view, ByteView)>& f) const;

 private:
  enum class Stage { Early, Ecdhe, Handshake, Signed, App };

  struct Session {
    lurk::SessionId id;
    ConfigRow row = ConfigRow::CsCertDheR;
    Stage stage = Stage::Early;
    const ks::CipherSuite* suite = nullptr;
    std::uint16_t scheme = 0;
    std::optional<crypto::KeyPair> eph;
    std::uint16_t group = 0;
    std::optional<ks::KeySchedule> schedule;
    std::optional<SecretBytes> psk;
    Bytes truncated_ch;
    Bytes h_ctx;
    tls::Random n_s{};
    SecretBytes client_hs;
    SecretBytes server_hs;
    Bytes sig_transcript;
    SecretBytes sig_response;
    std::chrono::steady_clock::time_point last_used;
  };

  struct CacheEntry {
    ConfigRow row;
    const ks::CipherSuite* suite;
    std::uint16_t scheme;
    std::uint16_t group;
    std::optional<crypto::KeyPair> eph;
    Bytes h_ctx;
    std::chrono::steady_clock::time_point completed;
  };

  Result<lurk::LurkMessage> on_ecdhe(const lurk::LurkMessage& m);
  Result<lurk::LurkMessage> on_handshake(const lurk::LurkMessage& m);
  Result<lurk::LurkMessage> on_sig(const lurk::LurkMessage& m);
  Result<lurk::LurkMessage> on_ticket(const lurk::LurkMessage& m, bool psk_mode);
  Result<lurk::LurkMessage> on_early(const lurk::LurkMessage& m);
  Result<lurk::LurkMessage> on_app(const lurk::LurkMessage& m);
  Result<lurk::LurkMessage> on_attest(const lurk::LurkMessage& m);

  Result<ConfigRow> pinned_row(std::uint8_t wire_row, lurk::MsgType t) const;
  Result<Session*> live(const lurk::SessionId& sid, lurk::MsgType t);
  Status check_fresh(ByteView n_e, ByteView n_s) const;
  bool n_s_used(const tls::Random& n_s) const;
  void mark_n_s_used(const tls::Random& n_s);
  lurk::SessionId fresh_session_id() const;
  void commit(Session&& s);
  void complete(const lurk::SessionId& sid);
  void purge();
  void observe(std::string_view kind, ByteView secret) const;
  void emit_cv_event(const Session& s, ByteView through_cv) const;
  std::int64_t now_ms() const;

  CsIdentity identity_;
  CsOptions opts_;
  Bytes certificate_msg_;

  mutable std::mutex mu_;
  std::map<lurk::SessionId, Session> sessions_;
  PskStore psks_;
  std::list<std::pair<lurk::SessionId, CacheEntry>> cache_;  // front = most recent
  std::map<lurk::SessionId, std::list<std::pair<lurk::SessionId, CacheEntry>>::iterator> cache_index_;
  std::set<lurk::SessionId> expired_;
  std::list<lurk::SessionId> expired_order_;
  std::set<tls::Random> used_n_s_;
  std::list<tls::Random> used_n_s_order_;
  std::uint64_t handled_ = 0;
  std::uint64_t accepted_ = 0;
};

// Signature check plus measurement allow-list.
bool verify_quote(const lurk::Quote& quote, ByteView expected_h_ctx_hash, const crypto::PublicKey& attest_public,
                  std::span<const Bytes> allowed_measurements);

}  // namespace lurkt::cs
