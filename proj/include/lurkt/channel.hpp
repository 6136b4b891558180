// SPDX-License-Identifier: Apache-2.0
//
// Engine <-> crypto service transports. Every transport carries encoded
// LURK frames; the remote mode seals each frame under a pre-shared key with
// a per-direction sequence number.
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"
#include "lurkt/lurk.hpp"
#include "lurkt/net.hpp"

namespace lurkt::channel {

constexpr std::size_t kChannelKeyLen = 32;
constexpr std::size_t kSecureHeaderLen = 12;  // [len:4][seq:8]

enum class Role { Engine, CryptoService };

// One endpoint of the remote channel. Direction keys are expanded from the
// shared key so both sides never reuse a nonce.
class SecureChannel {
 public:
  SecureChannel(ByteView channel_key, Role role);

  // [len:4][seq:8][ciphertext||tag]; nonce = 0^4 || seq, AAD = len || seq.
  Result<Bytes> seal(ByteView frame);
  // ChannelAuthFailure on AEAD failure; SequenceViolation on an authentic
  // frame whose sequence number is not the next expected one.
  Result<Bytes> open(ByteView wire);

  std::uint64_t sent() const { return send_seq_; }
  std::uint64_t received() const { return recv_seq_; }

 private:
  SecretBytes send_key_;
  SecretBytes recv_key_;
  std::uint64_t send_seq_ = 0;
  std::uint64_t recv_seq_ = 0;
};

// Bytes still needed to complete the sealed frame at the front of `buffer`.
Result<std::size_t> secure_bytes_missing(ByteView buffer);

Result<SecretBytes> load_channel_key(const std::string& hex_file);

// Service side: consumes one request frame, always answers with one frame.
class FrameHandler {
 public:
  virtual ~FrameHandler() = default;
  virtual Bytes handle(ByteView request_frame) = 0;
};

// Engine side: one request frame in, one response frame out.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Result<Bytes> round_trip(ByteView request_frame) = 0;
};

// Direct call into a service in the same address space.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(FrameHandler& h) : handler_(h) {}
  Result<Bytes> round_trip(ByteView request_frame) override { return handler_.handle(request_frame); }

 private:
  FrameHandler& handler_;
};

// Unix or TCP stream. Plain frames unless a channel key is supplied.
// Concurrent callers are serialized.
class StreamTransport final : public Transport {
 public:
  static Result<std::unique_ptr<StreamTransport>> connect(const net::Endpoint& ep,
                                                           std::optional<SecretBytes> channel_key);
  Result<Bytes> round_trip(ByteView request_frame) override;

 private:
  StreamTransport(net::Socket s, std::optional<SecretBytes> key);
  std::mutex mu_;
  net::Socket sock_;
  std::optional<SecureChannel> secure_;
};

// Wire-level interception of sealed engine->service frames. Returns the
// frames to deliver, in order: empty drops, two copies duplicates.
using WireTap = std::function<std::vector<Bytes>(ByteView wire)>;

// Both ends of the remote channel in one process, for adversarial tests.
class SecureLoopbackTransport final : public Transport {
 public:
  SecureLoopbackTransport(FrameHandler& h, ByteView channel_key);
  void set_tap(WireTap tap);
  // Observes every sealed frame in both directions.
  void set_capture(std::function<void(ByteView)> capture);
  Result<Bytes> round_trip(ByteView request_frame) override;
  // Frames that passed channel checks and reached the service.
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t rejected() const { return rejected_; }

 private:
  std::mutex mu_;
  FrameHandler& handler_;
  SecureChannel engine_end_;
  SecureChannel service_end_;
  WireTap tap_;
  std::function<void(ByteView)> capture_;
  std::uint64_t delivered_ = 0;
  std::uint64_t rejected_ = 0;
};

// Records request/response frames of an inner transport.
class RecordingTransport final : public Transport {
 public:
  struct Exchange {
    Bytes request;
    Bytes response;
  };
  explicit RecordingTransport(Transport& inner) : inner_(inner) {}
  Result<Bytes> round_trip(ByteView request_frame) override;
  std::vector<Exchange> exchanges() const;
  void clear();
  Transport& inner() { return inner_; }

 private:
  Transport& inner_;
  mutable std::mutex mu_;
  std::vector<Exchange> log_;
};

// Reports transport failure for every call.
class DownTransport final : public Transport {
 public:
  Result<Bytes> round_trip(ByteView) override {
    return make_error(Errc::CsUnavailable, "crypto service channel is down");
  }
};

// Typed request issuing on top of a transport.
class CsClient {
 public:
  explicit CsClient(Transport& t) : transport_(t) {}
  // Error frames surface as their inner error; mismatched responses as CsRejected.
  Result<lurk::LurkMessage> call(lurk::MsgType type, lurk::SessionId sid, Bytes payload);
  std::uint64_t requests() const { return requests_; }

 private:
  Transport& transport_;
  std::atomic<std::uint64_t> requests_{0};
};

// Accepts connections and serves frames from a handler, one thread per
// connection. Channel failures close the offending connection.
class CsServer {
 public:
  CsServer(FrameHandler& h, std::optional<SecretBytes> channel_key);
  ~CsServer();
  Status listen(const net::Endpoint& ep);
  // Blocks until stop() or `max_connections` connections have been served.
  void serve(std::size_t max_connections = 0);
  void stop();
  std::uint16_t port() const;
  std::function<void(std::string_view)> log;

 private:
  void serve_connection(net::Socket s);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lurkt::channel
