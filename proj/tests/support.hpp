// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures: an in-process crypto service, engine options bound to
// its public chain, and one-call loopback handshakes.
#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "lurkt/channel.hpp"
#include "lurkt/client.hpp"
#include "lurkt/crypto_service.hpp"
#include "lurkt/engine.hpp"

namespace lurkt::testing {

struct Handshake {
  std::unique_ptr<client::TlsClient> client;
  std::unique_ptr<engine::EngineSession> engine;
  Status status;
  client::LoopbackResult wire;
};

class Rig {
 public:
  explicit Rig(crypto::SigScheme scheme = crypto::SigScheme::Ed25519, cs::CsOptions cs_opts = {})
      : service_(cs::CsIdentity::generate(scheme), std::move(cs_opts)), transport_(service_), cs_(transport_) {
    opts.cert_chain = service_.cert_chain();
    opts.scheme = service_.scheme();
  }

  client::ClientOptions client_options() const {
    client::ClientOptions c;
    c.trust_anchor = service_.cert_chain().front();
    return c;
  }

  Handshake run(const client::ClientOptions& c, const client::WireTap& tap = {}, ByteView request = {}) {
    Handshake h;
    h.client = std::make_unique<client::TlsClient>(c);
    h.engine = std::make_unique<engine::EngineSession>(opts, cs_);
    auto r = client::run_loopback(*h.client, *h.engine, tap, request);
    if (r) {
      h.wire = std::move(r).value();
    } else {
      h.status = r.error();
    }
    return h;
  }

  // Full handshake under a ticket-issuing row; returns the first ticket.
  std::optional<client::Ticket> issue_ticket(std::uint16_t suite = ks::kAes128GcmSha256) {
    auto saved = opts.cert_row;
    opts.cert_row = ConfigRow::CsCertDheR;
    auto c = client_options();
    c.suites = {suite};
    auto h = run(c);
    opts.cert_row = saved;
    if (!h.status || h.client->tickets().empty()) return std::nullopt;
    return h.client->tickets().front();
  }

  cs::CryptoService& service() { return service_; }
  channel::CsClient& cs() { return cs_; }
  channel::InProcessTransport& transport() { return transport_; }

  engine::EngineOptions opts;

 private:
  cs::CryptoService service_;
  channel::InProcessTransport transport_;
  channel::CsClient cs_;
};

}  // namespace lurkt::testing
