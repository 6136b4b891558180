// SPDX-License-Identifier: Apache-2.0
//
// Binding of ServerHello.random to a secret engine nonce: the server random
// on the wire is phi(n_e), and the crypto service only acts on transcripts
// whose ServerHello.random matches the n_e the engine presents.
#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "lurkt/bytes.hpp"
#include "lurkt/error.hpp"

namespace lurkt::freshness {

constexpr std::string_view kLabel = "lurk-t/v1/freshness";
constexpr std::size_t kNonceLen = 32;

using ServerRandom = std::array<std::uint8_t, 32>;

// SHA-256(label || n_e). Fails with BadLength unless n_e is 32 bytes.
Result<ServerRandom> phi(ByteView n_e);
// Constant-time comparison of n_s against phi(n_e).
Result<bool> verify(ByteView n_e, ByteView n_s);

// Per-handshake secret nonce. The buffer stays allocated after erase() so
// callers can confirm it reads as zero.
class EngineNonce {
 public:
  EngineNonce() { bytes_.fill(0); }
  EngineNonce(const EngineNonce&) = delete;
  EngineNonce& operator=(const EngineNonce&) = delete;
  ~EngineNonce() { erase(); }

  static void generate_into(EngineNonce& n);
  void erase();
  bool is_zero() const;
  ByteView view() const { return bytes_; }
  ServerRandom server_random() const;

 private:
  std::array<std::uint8_t, kNonceLen> bytes_;
};

}  // namespace lurkt::freshness
