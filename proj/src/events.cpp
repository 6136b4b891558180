// SPDX-License-Identifier: Apache-2.0
#include "lurkt/events.hpp"

#include "lurkt/crypto.hpp"

namespace lurkt {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::ESentCrSrToCs: return "E_sent_cr_sr_to_CS";
    case EventKind::CsSentCv: return "CS_sent_CV";
    case EventKind::ERecvdCv: return "E_recvd_CV";
    case EventKind::EPreServerFinished: return "E_pre_server_finished";
    case EventKind::CClientFinished: return "C_client_finished";
  }
  return "unknown";
}

void EventLog::append(Event e) {
  std::lock_guard lock(mu_);
  e.seq = next_seq_++;
  events_.push_back(std::move(e));
}

std::vector<Event> EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t EventLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void EventLog::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
  next_seq_ = 0;
}

Bytes event_hash(ByteView transcript) { return crypto::digest(crypto::HashAlg::Sha256, transcript); }

std::string format_event(const Event& e) {
  std::string out = std::to_string(e.seq);
  out += '\t';
  out += event_kind_name(e.kind);
  out += '\t' + e.tag;
  out += '\t' + to_hex(e.n_c);
  out += '\t' + to_hex(e.n_s);
  out += '\t' + to_hex(e.th_sh);
  out += '\t' + to_hex(e.th_pre_fin);
  return out;
}

}  // namespace lurkt
