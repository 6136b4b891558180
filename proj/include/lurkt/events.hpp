// SPDX-License-Identifier: Apache-2.0
//
// Instrumentation events emitted by client, engine and crypto service, and
// the global append-only log they are collected into.
#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "lurkt/bytes.hpp"

namespace lurkt {

enum class EventKind : std::uint8_t {
  ESentCrSrToCs,
  CsSentCv,
  ERecvdCv,
  EPreServerFinished,
  CClientFinished,
};

std::string_view event_kind_name(EventKind k);

struct Event {
  EventKind kind;
  std::string tag;  // emitting session, diagnostics only
  Bytes n_c;
  Bytes n_s;
  Bytes th_sh;       // SHA-256(ClientHello..ServerHello)
  Bytes th_pre_fin;  // SHA-256(ClientHello..message before server Finished); empty on ESentCrSrToCs
  bool psk = false;  // resumed handshake, no CertificateVerify
  std::uint64_t seq = 0;
};

// Appends are serialized; seq is the global arrival order.
class EventLog {
 public:
  void append(Event e);
  std::vector<Event> snapshot() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
  std::uint64_t next_seq_ = 0;
};

// Event fields use a fixed hash regardless of the negotiated suite.
Bytes event_hash(ByteView transcript);

// Tab-separated, one event per line.
std::string format_event(const Event& e);

}  // namespace lurkt
