// SPDX-License-Identifier: Apache-2.0
//
// Minimal TLS 1.3 client for closed-loop testing: one key share, signature
// and Finished verification against a single trust anchor, PSK resumption
// with binders, and application data.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/engine.hpp"
#include "lurkt/error.hpp"
#include "lurkt/events.hpp"
#include "lurkt/key_schedule.hpp"
#include "lurkt/net.hpp"
#include "lurkt/record.hpp"
#include "lurkt/tls_codec.hpp"

namespace lurkt::client {

// Resumption material kept in memory only.
struct Ticket {
  Bytes identity;
  SecretBytes psk;
  std::uint16_t suite = 0;
  std::uint32_t age_add = 0;
  std::uint32_t lifetime = 0;
};

// "<suite hex> <identity hex> <psk hex>" on one line.
std::string serialize_ticket(const Ticket& t);
Result<Ticket> parse_ticket(std::string_view text);

struct ClientOptions {
  // Preference order; the first group carries the single key share.
  std::vector<std::uint16_t> suites{ks::kAes128GcmSha256, ks::kAes256GcmSha384, ks::kChacha20Poly1305Sha256};
  std::vector<std::uint16_t> groups{static_cast<std::uint16_t>(crypto::Group::X25519),
                                    static_cast<std::uint16_t>(crypto::Group::Secp256r1),
                                    static_cast<std::uint16_t>(crypto::Group::X448)};
  Bytes trust_anchor;  // DER; required for certificate handshakes
  std::optional<Ticket> ticket;
  // Fail with ServerRejectedPsk instead of accepting a full handshake.
  bool require_resumption = false;
  std::string server_name;
  EventLog* events = nullptr;
  std::string tag;
  // Test fixture: sends a Finished whose verify_data has one bit flipped.
  bool corrupt_finished = false;
};

class TlsClient {
 public:
  enum class State { Start, WaitServerFlight, Connected, Failed };

  explicit TlsClient(ClientOptions opts);
  ~TlsClient();
  TlsClient(const TlsClient&) = delete;
  TlsClient& operator=(const TlsClient&) = delete;

  // ClientHello records.
  Result<Bytes> start();
  // Consumes server bytes; returns bytes to send (client Finished).
  Result<Bytes> on_receive(ByteView data);
  // Application data records under the client application keys.
  Result<Bytes> send(ByteView plaintext);
  // Application data received so far; cleared by the call.
  Bytes take_received();

  State state() const { return state_; }
  bool resumed() const { return resumed_; }
  // A ticket was offered and the server ran a full handshake instead.
  bool psk_rejected() const { return psk_rejected_; }
  bool saw_certificate() const { return saw_certificate_; }
  const std::vector<Ticket>& tickets() const { return tickets_; }
  const SecretBytes& client_app_secret() const { return client_app_; }
  const SecretBytes& server_app_secret() const { return server_app_; }
  const tls::Random& client_random() const { return random_; }
  const tls::Random& server_random() const { return server_random_; }
  const Bytes& server_key_share() const { return server_share_; }
  std::uint16_t suite() const { return suite_ ? suite_->code : 0; }
  std::uint16_t group() const { return group_; }
  const tls::HandshakeTranscript& transcript() const { return transcript_; }
  const std::optional<Error>& failure() const { return failure_; }

 private:
  Result<Bytes> receive(ByteView data);
  Status on_server_hello(ByteView sh_bytes);
  Result<Bytes> on_flight_message(ByteView msg_bytes);
  Status on_post_handshake(ByteView msg_bytes);
  void fail(const Error& e);

  ClientOptions opts_;
  State state_ = State::Start;
  bool resumed_ = false;
  bool psk_rejected_ = false;
  bool saw_certificate_ = false;
  std::optional<Error> failure_;

  record::RecordReader records_;
  record::HandshakeReassembler handshake_;
  tls::HandshakeTranscript transcript_;
  tls::Random random_{};
  tls::Random server_random_{};
  Bytes server_share_;
  std::optional<crypto::KeyPair> eph_;
  const ks::CipherSuite* suite_ = nullptr;
  std::uint16_t group_ = 0;
  std::optional<ks::KeySchedule> schedule_;
  SecretBytes client_hs_;
  SecretBytes server_hs_;
  SecretBytes client_app_;
  SecretBytes server_app_;
  SecretBytes resumption_;
  std::optional<record::TrafficKeys> server_read_;
  record::TrafficKeys client_hs_keys_;
  record::TrafficKeys client_app_keys_;
  record::TrafficKeys server_app_keys_;
  std::optional<crypto::PublicKey> server_key_;
  Bytes received_;
  std::vector<Ticket> tickets_;
};

std::string_view state_name(TlsClient::State s);

enum class Direction { ToServer, ToClient };

// Hook over every flight crossing the public channel; returns the byte
// strings actually delivered, in order.
using WireTap = std::function<std::vector<Bytes>(Direction, Bytes)>;

struct LoopbackResult {
  std::vector<Bytes> to_server;  // as delivered
  std::vector<Bytes> to_client;
};

// Drives client and engine session to completion in memory. The first
// error from either side is returned.
Result<LoopbackResult> run_loopback(TlsClient& c, engine::EngineSession& e, const WireTap& tap = {},
                                    ByteView request = {});

struct SessionReport {
  bool resumed = false;
  bool psk_rejected = false;
  bool saw_certificate = false;
  std::uint16_t suite = 0;
  std::uint16_t group = 0;
  Bytes response;
  std::vector<Ticket> tickets;
  SecretBytes client_app;
  SecretBytes server_app;
};

// Full TCP exchange: handshake, one request, and the response of
// `expect_bytes` bytes (or any non-empty response when zero).
Result<SessionReport> connect_tcp(const net::Endpoint& ep, ClientOptions opts, ByteView request,
                                  std::size_t expect_bytes = 0);

}  // namespace lurkt::client
