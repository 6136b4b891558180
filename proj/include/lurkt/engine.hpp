// SPDX-License-Identifier: Apache-2.0
//
// The engine: terminates TLS 1.3 toward clients without holding any
// credential. Each EngineSession is a sans-IO state machine fed with
// record bytes; credential-touching steps go to the crypto service per the
// configured row. A monolithic mode performs everything locally for
// baseline measurements.
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/channel.hpp"
#include "lurkt/config.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/events.hpp"
#include "lurkt/freshness.hpp"
#include "lurkt/key_schedule.hpp"
#include "lurkt/net.hpp"
#include "lurkt/record.hpp"
#include "lurkt/tls_codec.hpp"

namespace lurkt::engine {

constexpr std::uint32_t kTicketLifetime = 7200;

// Maps one application request to one response.
using AppHandler = std::function<Bytes(ByteView request)>;
// "GET <n>" answers n bytes; anything else is echoed.
Bytes default_app(ByteView request);

// Credentials and ticket store for the monolithic baseline.
class MonolithicBackend {
 public:
  MonolithicBackend(crypto::SigningKey sk, std::vector<Bytes> cert_chain, std::size_t psk_capacity = 4096);
  const crypto::SigningKey& signing_key() const { return sk_; }
  const std::vector<Bytes>& cert_chain() const { return chain_; }
  Status store(const lurk::SessionId& id, ByteView psk, crypto::HashAlg hash);
  std::optional<cs::PskStore::Found> lookup(ByteView id) const;

 private:
  crypto::SigningKey sk_;
  std::vector<Bytes> chain_;
  mutable std::mutex mu_;
  cs::PskStore store_;
};

struct EngineOptions {
  ConfigRow cert_row = ConfigRow::CsCertDheR;
  // Resumption offers are ignored when absent.
  std::optional<ConfigRow> psk_row;
  std::vector<std::uint16_t> suites{ks::kAes128GcmSha256, ks::kAes256GcmSha384, ks::kChacha20Poly1305Sha256};
  std::vector<std::uint16_t> groups{static_cast<std::uint16_t>(crypto::Group::X25519),
                                    static_cast<std::uint16_t>(crypto::Group::Secp256r1),
                                    static_cast<std::uint16_t>(crypto::Group::X448)};
  std::vector<Bytes> cert_chain;  // public chain presented to clients
  crypto::SigScheme scheme = crypto::SigScheme::Ed25519;
  AppHandler app = default_app;
  EventLog* events = nullptr;
  std::string tag;
};

Status validate(const EngineOptions& opts);

class EngineSession {
 public:
  enum class State { AwaitClientHello, SentFlight, AwaitFinished, Done, Failed };

  // Split mode: credential operations go through `cs`.
  EngineSession(const EngineOptions& opts, channel::CsClient& cs);
  // Baseline mode: no service, everything local.
  EngineSession(const EngineOptions& opts, MonolithicBackend& mono);
  ~EngineSession();
  EngineSession(const EngineSession&) = delete;
  EngineSession& operator=(const EngineSession&) = delete;

  // Consumes bytes from the client and returns bytes to send back. On
  // error the session is Failed and every secret it held is erased.
  Result<Bytes> on_receive(ByteView data);

  State state() const { return state_; }
  bool resumed() const { return resumed_; }
  // An offered PSK was unknown to the service and a full handshake ran.
  bool fell_back() const { return fell_back_; }
  ConfigRow active_row() const { return row_; }
  const std::vector<lurk::MsgType>& exchanges() const { return exchanges_; }
  bool nonce_erased() const { return n_e_.is_zero(); }
  bool ephemeral_erased() const { return !eph_ || eph_->priv.empty(); }
  ByteView nonce_view() const { return n_e_.view(); }
  const tls::Random& server_random() const { return server_random_; }
  const Bytes& server_key_share() const { return server_share_; }
  const lurk::SessionId& cs_session_id() const { return cs_sid_; }
  const tls::HandshakeTranscript& transcript() const { return transcript_; }
  const SecretBytes& client_app_secret() const { return client_app_; }
  const SecretBytes& server_app_secret() const { return server_app_; }
  std::uint16_t suite() const { return suite_ ? suite_->code : 0; }
  std::uint16_t group() const { return group_; }
  const std::optional<Error>& failure() const { return failure_; }
  // Every byte buffer this session object holds right now.
  Bytes memory_snapshot() const;

  struct Attestation {
    lurk::Quote quote;
    Bytes context;  // the handshake context the service holds for this session
  };
  // Quote over the service's cached context; split mode, Done sessions only.
  Result<Attestation> attest();

 private:
  Result<Bytes> receive(ByteView data);
  Result<Bytes> on_client_hello(ByteView ch_bytes);
  Result<Bytes> on_client_finished(ByteView fin_bytes);
  Result<Bytes> on_app_data(ByteView plaintext);
  Result<lurk::LurkMessage> call(lurk::MsgType t, Bytes payload);
  Status try_resumption(const tls::ClientHello& ch, ByteView ch_bytes);
  void emit(EventKind k, ByteView through) const;
  void fail(const Error& e);
  void erase_secrets();

  EngineOptions opts_;
  channel::CsClient* cs_ = nullptr;
  MonolithicBackend* mono_ = nullptr;

  State state_ = State::AwaitClientHello;
  ConfigRow row_;
  bool resumed_ = false;
  bool fell_back_ = false;
  std::optional<Error> failure_;
  std::vector<lurk::MsgType> exchanges_;

  record::RecordReader records_;
  record::HandshakeReassembler handshake_;
  tls::HandshakeTranscript transcript_;
  const ks::CipherSuite* suite_ = nullptr;
  std::uint16_t group_ = 0;
  freshness::EngineNonce n_e_;
  tls::Random server_random_{};
  Bytes server_share_;
  lurk::SessionId cs_sid_;
  std::optional<crypto::KeyPair> eph_;
  SecretBytes ke_;
  std::optional<SecretBytes> psk_;  // monolithic resumption only
  SecretBytes binder_key_;
  std::optional<ks::KeySchedule> schedule_;  // local derivations
  SecretBytes client_hs_;
  SecretBytes server_hs_;
  SecretBytes client_app_;
  SecretBytes server_app_;
  record::TrafficKeys client_hs_keys_;
  record::TrafficKeys client_app_keys_;
  record::TrafficKeys server_app_keys_;
  Bytes ch_random_;
};

std::string_view state_name(EngineSession::State s);

// TCP front end: one EngineSession per accepted connection.
class EngineServer {
 public:
  EngineServer(EngineOptions opts, channel::CsClient& cs);
  EngineServer(EngineOptions opts, MonolithicBackend& mono);
  ~EngineServer();
  Status listen(const net::Endpoint& ep);
  std::uint16_t port() const;
  // Blocks until stop() or `max_connections` connections have completed.
  void serve(std::size_t max_connections = 0);
  void stop();
  std::uint64_t completed() const { return completed_; }
  std::uint64_t failed() const { return failed_; }
  std::function<void(std::string_view)> log;
  // Runs on the connection thread after a session reaches Done.
  std::function<void(EngineSession&)> on_complete;

 private:
  void serve_connection(net::Socket s);
  EngineOptions opts_;
  channel::CsClient* cs_ = nullptr;
  MonolithicBackend* mono_ = nullptr;
  net::Socket listener_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<std::uint64_t> failed_{0};
  std::mutex mu_;
  std::vector<int> live_fds_;
};

}  // namespace lurkt::engine
