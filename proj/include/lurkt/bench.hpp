// SPDX-License-Identifier: Apache-2.0
//
// Handshake throughput (KEX/s) of the split deployment against a
// monolithic baseline, and request throughput for post-handshake transfers.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lurkt/config.hpp"
#include "lurkt/crypto.hpp"
#include "lurkt/error.hpp"

namespace lurkt::bench {

struct BenchSuite {
  std::string name;
  std::uint16_t cipher_suite;
  std::uint16_t group;
  crypto::SigScheme scheme;
};

// x25519_ed25519, p256_ed25519, x448_ed448.
const std::vector<BenchSuite>& bench_suites();
Result<BenchSuite> find_bench_suite(std::string_view name);

enum class ChannelMode { InProcess, Unix, Tcp };
std::string_view channel_name(ChannelMode m);
Result<ChannelMode> parse_channel(std::string_view name);

// Baseline when `row` is empty. A resumed baseline runs monolithic PSK-DHE
// resumptions, the reference for the PSK rows.
struct Target {
  std::optional<ConfigRow> row;
  bool resumed = false;
  static Target baseline() { return {}; }
  static Target baseline_resumed() { return {std::nullopt, true}; }
  static Target split(ConfigRow r) { return {r, false}; }
  bool psk() const;
  std::string name() const;  // row name, "baseline" or "baseline_psk"
};

struct BenchResult {
  std::string suite;
  std::string config;
  ChannelMode channel = ChannelMode::InProcess;
  double kex_per_sec = 0;  // count / wall_seconds
  std::size_t count = 0;
  double wall_seconds = 0;
};

struct BenchOptions {
  std::size_t n = 1000;
  std::size_t parallel = 1;
  ChannelMode channel = ChannelMode::InProcess;
};

// n full handshakes (resumed handshakes for PSK rows) between the test
// client and the engine; TargetUnavailable when any handshake fails.
Result<BenchResult> measure_kex(const Target& target, const BenchSuite& suite, const BenchOptions& opts);

// |split - baseline| / baseline * 100. SuiteMismatch when the suites differ
// or the baseline rate is not positive.
Result<double> delta_kex(const BenchResult& baseline, const BenchResult& split);

// Handshake plus one request answered with `file_size` bytes, per session;
// kex_per_sec carries requests per second.
Result<BenchResult> measure_transfer(std::size_t file_size, const Target& target, const BenchSuite& suite,
                                     const BenchOptions& opts);

struct TransferRow {
  std::size_t file_size = 0;
  double baseline_rps = 0;
  double split_rps = 0;
  double delta = 0;
};

// Delta per file size for one split target. Baseline and split runs are
// interleaved in blocks; rates are total count over total wall time.
Result<std::vector<TransferRow>> transfer_trend(const std::vector<std::size_t>& sizes, const Target& split,
                                                const BenchSuite& suite, const BenchOptions& opts);

// One table per suite: config, channel, KEX/s, delta% against the suite's
// baseline of the same mode (certificate or PSK). Tab-separated.
std::string format_kex_report(const std::vector<BenchResult>& results);
std::string format_trend(const std::vector<TransferRow>& rows);

}  // namespace lurkt::bench
