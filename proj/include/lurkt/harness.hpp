// SPDX-License-Identifier: Apache-2.0
//
// Adversarial and statistical batteries over client, engine and crypto
// service: post-hoc event agreement, a seeded wire mangler, replay and
// forward-secrecy batteries, and a secret confinement scanner.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lurkt/bytes.hpp"
#include "lurkt/client.hpp"
#include "lurkt/config.hpp"
#include "lurkt/events.hpp"

namespace lurkt::harness {

// ---- agreement -------------------------------------------------------------

struct AgreementVerdict {
  bool ok = true;
  std::string violation;  // first violation, empty when ok
  std::size_t client_finished = 0;
  std::size_t chains = 0;
};

// Every ClientFinished needs its own chain
// PreServerFinished <- RecvdCV <- CsSentCV <- SentCrSr (CV links skipped for
// PSK handshakes) with equal nonces and transcript hashes, each event
// strictly earlier than its successor and used by at most one chain.
AgreementVerdict check_agreement(const std::vector<Event>& log);

// ---- mangler ---------------------------------------------------------------

enum class Action { Pass, Drop, Duplicate, Reorder, BitFlip, ReplayOld };
std::string_view action_name(Action a);

struct ManglerPolicy {
  // Relative weights, in Action order.
  std::array<double, 6> weights{1, 0, 0, 0, 0, 0};
  std::uint64_t seed = 1;

  static ManglerPolicy honest(std::uint64_t seed = 1) { return {{1, 0, 0, 0, 0, 0}, seed}; }
  // Mostly honest with every hostile action present.
  static ManglerPolicy hostile(std::uint64_t seed = 1) { return {{0.6, 0.08, 0.08, 0.08, 0.08, 0.08}, seed}; }
};

// Deterministic given the seed and the order of calls. Shared across
// sessions so replays can cross session boundaries.
class Mangler {
 public:
  explicit Mangler(ManglerPolicy p);
  std::vector<Bytes> apply(client::Direction d, Bytes flight);
  client::WireTap tap() {
    return [this](client::Direction d, Bytes b) { return apply(d, std::move(b)); };
  }
  std::uint64_t count(Action a) const;
  std::uint64_t hostile_actions() const;

 private:
  mutable std::mutex mu_;
  ManglerPolicy policy_;
  std::mt19937_64 rng_;
  std::discrete_distribution<int> pick_;
  std::array<std::vector<Bytes>, 2> history_;
  std::array<std::uint64_t, 6> counts_{};
};

// Splits a byte string into whole TLS records; a trailing partial record is
// kept as the last element.
std::vector<Bytes> split_records(ByteView data);

struct AgreementReport {
  std::size_t sessions = 0;
  std::size_t completed = 0;  // client reached Connected
  std::size_t aborted = 0;
  std::size_t mismatched_views = 0;  // completed with differing secrets
  std::uint64_t hostile_actions = 0;
  AgreementVerdict verdict;
};

struct AgreementOptions {
  std::size_t sessions = 200;
  // Sessions in flight at once; a seeded scheduler picks which one steps.
  std::size_t window = 16;
  ManglerPolicy policy = ManglerPolicy::hostile();
  std::vector<ConfigRow> cert_rows{ConfigRow::CsCertDheR, ConfigRow::CsCertDhe, ConfigRow::CsCert,
                                   ConfigRow::CsCertKeyless};
  // Every fourth session resumes under this row when set.
  std::optional<ConfigRow> psk_row = ConfigRow::CsPskDheR;
};

// Interleaved handshakes against one crypto service through a shared
// mangler. Deterministic given the policy seed.
AgreementReport run_agreement_battery(const AgreementOptions& opts);

// Negative control: honest sessions plus sessions served by a rogue server
// holding a copy of the service signing key. The checker must reject.
AgreementReport run_key_leak_control(std::size_t honest, std::size_t rogue);

// ---- replay ----------------------------------------------------------------

enum class ReplayKind { Verbatim, StaleBinding, RandomNonce, ForeignNonce, ChannelReplay };
std::string_view replay_kind_name(ReplayKind k);

struct ReplayReport {
  std::size_t attempts = 0;
  std::size_t acceptances = 0;
  // Attempts with a mismatched or already bound (N_E, N_S) pair, and how
  // many of those were answered with FreshnessViolation.
  std::size_t freshness_expected = 0;
  std::size_t freshness_observed = 0;
  std::size_t sequence_violations = 0;
  std::map<std::string, std::size_t> rejections;  // by error name
  std::map<std::string, std::size_t> by_kind;
};

ReplayReport run_replay_battery(std::size_t n, std::uint64_t seed = 1);

// ---- forward secrecy -------------------------------------------------------

struct PfsReport {
  std::size_t handshakes = 0;
  std::size_t distinct_key_shares = 0;
  std::size_t distinct_server_randoms = 0;
  std::size_t failures = 0;
};

PfsReport run_pfs_battery(std::size_t n, ConfigRow row = ConfigRow::CsCertDheR);

// ---- confinement -----------------------------------------------------------

struct NamedBytes {
  std::string name;
  Bytes bytes;
};

struct ScanVerdict {
  bool ok = true;
  std::vector<std::string> hits;  // "secret in artifact at offset"
  std::size_t secrets = 0;
  std::size_t artifacts = 0;
  std::size_t scanned_bytes = 0;
};

// Searches every artifact for each secret in raw, lowercase hex and
// uppercase hex form. Secrets equal to a whitelisted value are skipped.
ScanVerdict scan_secret_confinement(const std::vector<NamedBytes>& secrets, const std::vector<NamedBytes>& artifacts,
                                    const std::vector<Bytes>& whitelist = {});

struct ConfinementOptions {
  std::vector<ConfigRow> cert_rows{ConfigRow::CsCertDheR, ConfigRow::CsCertDhe, ConfigRow::CsCert,
                                   ConfigRow::CsCertKeyless};
  std::vector<ConfigRow> psk_rows{ConfigRow::CsPskDheR, ConfigRow::CsPskDhe, ConfigRow::CsPskR, ConfigRow::CsPsk};
  std::size_t rounds = 2;
  // Turns on the service's secret-logging debug switch.
  bool leaky = false;
};

// Runs handshakes under every row, collecting engine memory snapshots,
// service logs, and both wire captures, then scans them for every secret
// the service reported holding.
ScanVerdict run_confinement(const ConfinementOptions& opts);

// ---- reports ---------------------------------------------------------------

std::string format_report(const AgreementReport& r);
std::string format_report(const ReplayReport& r);
std::string format_report(const PfsReport& r);
std::string format_report(const ScanVerdict& v);

}  // namespace lurkt::harness
