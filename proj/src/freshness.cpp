// SPDX-License-Identifier: Apache-2.0
#include "lurkt/freshness.hpp"

#include <algorithm>

#include "lurkt/crypto.hpp"

namespace lurkt::freshness {

Result<ServerRandom> phi(ByteView n_e) {
  if (n_e.size() != kNonceLen) return make_error(Errc::BadLength, "engine nonce must be 32 bytes");
  Bytes input(kLabel.begin(), kLabel.end());
  append(input, n_e);
  auto h = crypto::digest(crypto::HashAlg::Sha256, input);
  secure_wipe(input.data(), input.size());
  ServerRandom out;
  std::copy_n(h.begin(), out.size(), out.begin());
  return out;
}

Result<bool> verify(ByteView n_e, ByteView n_s) {
  if (n_s.size() != 32) return make_error(Errc::BadLength, "server random must be 32 bytes");
  LURKT_ASSIGN(auto expected, phi(n_e));
  return ct_equal(expected, n_s);
}

void EngineNonce::generate_into(EngineNonce& n) { crypto::random_bytes(std::span<std::uint8_t>(n.bytes_)); }

void EngineNonce::erase() { secure_wipe(bytes_.data(), bytes_.size()); }

bool EngineNonce::is_zero() const {
  return std::all_of(bytes_.begin(), bytes_.end(), [](std::uint8_t b) { return b == 0; });
}

ServerRandom EngineNonce::server_random() const { return std::move(phi(bytes_)).value(); }

}  // namespace lurkt::freshness
