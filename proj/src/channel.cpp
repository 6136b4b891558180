// SPDX-License-Identifier: Apache-2.0
#include "lurkt/channel.hpp"

#include <algorithm>
#include <sys/socket.h>

#include <thread>

#include "lurkt/crypto.hpp"
#include "lurkt/key_schedule.hpp"

namespace lurkt::channel {

namespace {

constexpr crypto::AeadAlg kChannelAead = crypto::AeadAlg::Aes256Gcm;
constexpr std::size_t kMaxSealed = lurk::kMaxFrame + crypto::kAeadTagLen;

SecretBytes direction_key(ByteView key, std::string_view label) {
  return std::move(ks::hkdf_expand_label(crypto::HashAlg::Sha256, key, label, {}, 32)).value();
}

Bytes nonce_for(std::uint64_t seq) {
  Bytes n(crypto::kAeadNonceLen, 0);
  for (int i = 0; i < 8; ++i) n[11 - static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(seq >> (8 * i));
  return n;
}

std::uint64_t read_u64(ByteView v) {
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < 8; ++i) x = (x << 8) | v[i];
  return x;
}

std::size_t read_u32(ByteView v) {
  return (std::size_t{v[0]} << 24) | (std::size_t{v[1]} << 16) | (std::size_t{v[2]} << 8) | v[3];
}

Result<Bytes> read_plain_frame(net::Socket& s) {
  LURKT_ASSIGN(auto frame, s.read_exact(lurk::kHeaderLen));
  LURKT_ASSIGN(auto missing, lurk::frame_bytes_missing(frame));
  if (missing > 0) {
    LURKT_ASSIGN(auto rest, s.read_exact(missing));
    append(frame, rest);
  }
  return frame;
}

Result<Bytes> read_sealed_frame(net::Socket& s) {
  LURKT_ASSIGN(auto wire, s.read_exact(kSecureHeaderLen));
  LURKT_ASSIGN(auto missing, secure_bytes_missing(wire));
  if (missing > 0) {
    LURKT_ASSIGN(auto rest, s.read_exact(missing));
    append(wire, rest);
  }
  return wire;
}

}  // namespace

SecureChannel::SecureChannel(ByteView channel_key, Role role) {
  auto e2cs = direction_key(channel_key, "lurk e2cs");
  auto cs2e = direction_key(channel_key, "lurk cs2e");
  if (role == Role::Engine) {
    send_key_ = std::move(e2cs);
    recv_key_ = std::move(cs2e);
  } else {
    send_key_ = std::move(cs2e);
    recv_key_ = std::move(e2cs);
  }
}

Result<Bytes> SecureChannel::seal(ByteView frame) {
  if (send_seq_ == UINT64_MAX) return make_error(Errc::SeqExhausted, "channel sequence exhausted");
  if (frame.size() > lurk::kMaxFrame) return make_error(Errc::OversizeBody, "channel frame above 2^24");
  ByteWriter hdr;
  hdr.u32(static_cast<std::uint32_t>(frame.size() + crypto::kAeadTagLen));
  hdr.u64(send_seq_);
  Bytes out = std::move(hdr).take();
  LURKT_ASSIGN(auto ct, crypto::aead_seal(kChannelAead, send_key_.view(), nonce_for(send_seq_), out, frame));
  append(out, ct);
  ++send_seq_;
  return out;
}

Result<Bytes> SecureChannel::open(ByteView wire) {
  if (wire.size() < kSecureHeaderLen) return make_error(Errc::ChannelAuthFailure, "short channel frame");
  const std::size_t len = read_u32(wire);
  if (len + kSecureHeaderLen != wire.size() || len < crypto::kAeadTagLen) {
    return make_error(Errc::ChannelAuthFailure, "channel frame length mismatch");
  }
  const std::uint64_t seq = read_u64(wire.subspan(4));
  auto pt = crypto::aead_open(kChannelAead, recv_key_.view(), nonce_for(seq), wire.first(kSecureHeaderLen),
                              wire.subspan(kSecureHeaderLen));
  if (!pt) return make_error(Errc::ChannelAuthFailure, "channel frame failed authentication");
  if (seq != recv_seq_) {
    secure_wipe(pt->data(), pt->size());
    return make_error(Errc::SequenceViolation,
                      "channel sequence " + std::to_string(seq) + ", expected " + std::to_string(recv_seq_));
  }
  ++recv_seq_;
  return std::move(pt).value();
}

Result<std::size_t> secure_bytes_missing(ByteView buffer) {
  if (buffer.size() < kSecureHeaderLen) return kSecureHeaderLen - buffer.size();
  const std::size_t len = read_u32(buffer);
  if (len > kMaxSealed || len < crypto::kAeadTagLen) {
    return make_error(Errc::ChannelAuthFailure, "channel frame length out of range");
  }
  const std::size_t total = kSecureHeaderLen + len;
  return buffer.size() >= total ? 0 : total - buffer.size();
}

Result<SecretBytes> load_channel_key(const std::string& hex_file) {
  LURKT_ASSIGN(auto text, crypto::read_file(hex_file));
  auto raw = from_hex(text);
  if (!raw || raw->size() != kChannelKeyLen) {
    return make_error(Errc::InvalidConfig, "channel key file must hold 32 hex-encoded bytes");
  }
  SecretBytes key(*raw);
  secure_wipe(raw->data(), raw->size());
  secure_wipe(text.data(), text.size());
  return key;
}

StreamTransport::StreamTransport(net::Socket s, std::optional<SecretBytes> key) : sock_(std::move(s)) {
  if (key) secure_.emplace(key->view(), Role::Engine);
}

Result<std::unique_ptr<StreamTransport>> StreamTransport::connect(const net::Endpoint& ep,
                                                                  std::optional<SecretBytes> channel_key) {
  auto s = net::connect(ep);
  if (!s) return make_error(Errc::CsUnavailable, s.error().detail);
  return std::unique_ptr<StreamTransport>(new StreamTransport(std::move(s).value(), std::move(channel_key)));
}

Result<Bytes> StreamTransport::round_trip(ByteView request_frame) {
  std::lock_guard lock(mu_);
  if (!sock_.valid()) return make_error(Errc::CsUnavailable, "crypto service connection closed");
  auto fail = [this](const Error& e) -> Error {
    sock_.close();
    return make_error(Errc::CsUnavailable, e.detail);
  };
  if (secure_) {
    LURKT_ASSIGN(auto wire, secure_->seal(request_frame));
    if (auto st = sock_.write_all(wire); !st) return fail(st.error());
    auto resp = read_sealed_frame(sock_);
    if (!resp) return fail(resp.error());
    auto frame = secure_->open(*resp);
    if (!frame) sock_.close();
    return frame;
  }
  if (auto st = sock_.write_all(request_frame); !st) return fail(st.error());
  auto resp = read_plain_frame(sock_);
  if (!resp) return fail(resp.error());
  return resp;
}

SecureLoopbackTransport::SecureLoopbackTransport(FrameHandler& h, ByteView channel_key)
    : handler_(h), engine_end_(channel_key, Role::Engine), service_end_(channel_key, Role::CryptoService) {}

void SecureLoopbackTransport::set_tap(WireTap tap) {
  std::lock_guard lock(mu_);
  tap_ = std::move(tap);
}

void SecureLoopbackTransport::set_capture(std::function<void(ByteView)> capture) {
  std::lock_guard lock(mu_);
  capture_ = std::move(capture);
}

Result<Bytes> SecureLoopbackTransport::round_trip(ByteView request_frame) {
  std::lock_guard lock(mu_);
  LURKT_ASSIGN(auto wire, engine_end_.seal(request_frame));
  if (capture_) capture_(wire);
  std::vector<Bytes> deliveries;
  if (tap_) {
    deliveries = tap_(wire);
  } else {
    deliveries.push_back(std::move(wire));
  }
  std::optional<Bytes> response;
  std::optional<Error> first_error;
  for (const auto& w : deliveries) {
    auto frame = service_end_.open(w);
    if (!frame) {
      ++rejected_;
      if (!first_error) first_error = frame.error();
      continue;
    }
    ++delivered_;
    Bytes reply = handler_.handle(*frame);
    secure_wipe(frame->data(), frame->size());
    LURKT_ASSIGN(auto sealed, service_end_.seal(reply));
    if (capture_) capture_(sealed);
    auto opened = engine_end_.open(sealed);
    if (!opened) return opened.error();
    response = std::move(opened).value();
  }
  if (first_error) return *first_error;
  if (!response) return make_error(Errc::CsUnavailable, "request frame dropped");
  return std::move(*response);
}

Result<Bytes> RecordingTransport::round_trip(ByteView request_frame) {
  auto r = inner_.round_trip(request_frame);
  std::lock_guard lock(mu_);
  log_.push_back(Exchange{Bytes(request_frame.begin(), request_frame.end()), r ? *r : Bytes{}});
  return r;
}

std::vector<RecordingTransport::Exchange> RecordingTransport::exchanges() const {
  std::lock_guard lock(mu_);
  return log_;
}

void RecordingTransport::clear() {
  std::lock_guard lock(mu_);
  log_.clear();
}

Result<lurk::LurkMessage> CsClient::call(lurk::MsgType type, lurk::SessionId sid, Bytes payload) {
  ++requests_;
  auto req = lurk::make_request(type, sid, std::move(payload));
  LURKT_ASSIGN(auto frame, lurk::encode_lurk(req));
  secure_wipe(req.payload.data(), req.payload.size());
  auto resp_bytes = transport_.round_trip(frame);
  secure_wipe(frame.data(), frame.size());
  if (!resp_bytes) return resp_bytes.error();
  auto resp = lurk::decode_lurk(*resp_bytes);
  secure_wipe(resp_bytes->data(), resp_bytes->size());
  if (!resp) return make_error(Errc::CsRejected, "undecodable response: " + resp.error().message());
  if (resp->is_error()) return lurk::decode_error_payload(resp->payload);
  if (resp->type != (lurk::kResponseBit | static_cast<std::uint8_t>(type))) {
    return make_error(Errc::CsRejected, "response type does not match request");
  }
  if (!sid.is_zero() && resp->session_id != sid) {
    return make_error(Errc::CsRejected, "response session id does not match request");
  }
  return resp;
}

struct CsServer::Impl {
  FrameHandler& handler;
  std::optional<SecretBytes> key;
  net::Socket listener;
  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::vector<int> live_fds;
  std::vector<std::thread> threads;
};

CsServer::CsServer(FrameHandler& h, std::optional<SecretBytes> channel_key)
    : impl_(new Impl{h, std::move(channel_key), {}, {}, {}, {}, {}}) {}

CsServer::~CsServer() {
  stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

Status CsServer::listen(const net::Endpoint& ep) {
  LURKT_ASSIGN(impl_->listener, net::listen(ep));
  return {};
}

std::uint16_t CsServer::port() const { return net::local_port(impl_->listener); }

void CsServer::stop() {
  impl_->stopping = true;
  impl_->listener.shutdown();
  std::lock_guard lock(impl_->mu);
  for (int fd : impl_->live_fds) ::shutdown(fd, 2);
}

void CsServer::serve(std::size_t max_connections) {
  std::size_t served = 0;
  while (!impl_->stopping) {
    auto conn = net::accept(impl_->listener);
    if (!conn) break;
    if (impl_->stopping) break;
    {
      std::lock_guard lock(impl_->mu);
      impl_->live_fds.push_back(conn->fd());
      impl_->threads.emplace_back([this, s = std::move(conn).value()]() mutable { serve_connection(std::move(s)); });
    }
    if (max_connections != 0 && ++served >= max_connections) break;
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(impl_->mu);
    threads.swap(impl_->threads);
  }
  for (auto& t : threads) t.join();
}

void CsServer::serve_connection(net::Socket s) {
  std::optional<SecureChannel> secure;
  if (impl_->key) secure.emplace(impl_->key->view(), Role::CryptoService);
  const int fd = s.fd();
  for (;;) {
    Result<Bytes> frame = secure ? read_sealed_frame(s) : read_plain_frame(s);
    if (!frame) break;
    if (secure) {
      auto opened = secure->open(*frame);
      if (!opened) {
        if (log) log("channel: " + opened.error().message() + "; closing connection");
        break;
      }
      frame = std::move(opened).value();
    }
    Bytes reply = impl_->handler.handle(*frame);
    secure_wipe(frame->data(), frame->size());
    if (secure) {
      auto sealed = secure->seal(reply);
      secure_wipe(reply.data(), reply.size());
      if (!sealed || !s.write_all(*sealed)) break;
    } else {
      auto st = s.write_all(reply);
      secure_wipe(reply.data(), reply.size());
      if (!st) break;
    }
  }
  std::lock_guard lock(impl_->mu);
  auto& fds = impl_->live_fds;
  fds.erase(std::remove(fds.begin(), fds.end(), fd), fds.end());
}

}  // namespace lurkt::channel
