// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "lurkt/bench.hpp"

namespace lurkt::bench {
namespace {

BenchResult rate(std::string suite, std::string config, double kex) {
  BenchResult r;
  r.suite = std::move(suite);
  r.config = std::move(config);
  r.kex_per_sec = kex;
  return r;
}

const BenchSuite& x25519() { return bench_suites().front(); }

TEST(DeltaKex, HandCheckedTenPercent) {
  auto d = delta_kex(rate("s", "baseline", 1715), rate("s", "cs_cert", 1543.5));
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 10.0, 1e-12);
}

TEST(DeltaKex, AbsoluteValueOfFasterSplit) {
  auto d = delta_kex(rate("s", "baseline", 200), rate("s", "cs_cert", 250));
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 25.0, 1e-12);
}

TEST(DeltaKex, EqualRatesIsZero) {
  auto d = delta_kex(rate("s", "baseline", 812.25), rate("s", "cs_psk", 812.25));
  ASSERT_TRUE(d);
  EXPECT_EQ(*d, 0.0);
}

TEST(DeltaKex, ZeroBaselineIsSuiteMismatch) {
  auto d = delta_kex(rate("s", "baseline", 0), rate("s", "cs_cert", 10));
  ASSERT_FALSE(d);
  EXPECT_EQ(d.error().code, Errc::SuiteMismatch);
}

TEST(DeltaKex, DifferentSuitesIsSuiteMismatch) {
  auto d = delta_kex(rate("x25519_ed25519", "baseline", 100), rate("x448_ed448", "cs_cert", 90));
  ASSERT_FALSE(d);
  EXPECT_EQ(d.error().code, Errc::SuiteMismatch);
}

TEST(Lookup, SuitesAndChannels) {
  EXPECT_TRUE(find_bench_suite("x448_ed448"));
  auto bad = find_bench_suite("rsa2048");
  ASSERT_FALSE(bad);
  EXPECT_NE(bad.error().message().find("x25519_ed25519"), std::string::npos);
  EXPECT_EQ(*parse_channel("unix"), ChannelMode::Unix);
  EXPECT_FALSE(parse_channel("udp"));
  EXPECT_EQ(Target::baseline().name(), "baseline");
  EXPECT_EQ(Target::baseline_resumed().name(), "baseline_psk");
  EXPECT_EQ(Target::split(ConfigRow::CsPskR).name(), "cs_psk_r");
  EXPECT_TRUE(Target::split(ConfigRow::CsPskR).psk());
  EXPECT_FALSE(Target::split(ConfigRow::CsCert).psk());
}

TEST(MeasureKex, BaselineAndKeylessCompleteThousand) {
  BenchOptions o;
  o.n = 1000;
  for (const auto& t : {Target::baseline(), Target::split(ConfigRow::CsCertKeyless)}) {
    auto r = measure_kex(t, x25519(), o);
    ASSERT_TRUE(r) << r.error().message();
    EXPECT_EQ(r->count, 1000u);
    EXPECT_EQ(r->config, t.name());
    EXPECT_GT(r->wall_seconds, 0);
    EXPECT_DOUBLE_EQ(r->kex_per_sec, static_cast<double>(r->count) / r->wall_seconds);
  }
}

TEST(MeasureKex, CountsAreDeterministic) {
  BenchOptions o;
  o.n = 40;
  o.parallel = 4;
  auto a = measure_kex(Target::split(ConfigRow::CsCertDheR), x25519(), o);
  auto b = measure_kex(Target::split(ConfigRow::CsCertDheR), x25519(), o);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->count, 40u);
  EXPECT_EQ(b->count, a->count);
}

TEST(MeasureKex, PskRowsAndResumedBaseline) {
  BenchOptions o;
  o.n = 20;
  for (const auto& t : {Target::baseline_resumed(), Target::split(ConfigRow::CsPskDhe), Target::split(ConfigRow::CsPsk)}) {
    auto r = measure_kex(t, x25519(), o);
    ASSERT_TRUE(r) << t.name() << ": " << r.error().message();
    EXPECT_EQ(r->count, 20u);
  }
}

TEST(MeasureKex, SocketChannels) {
  BenchOptions o;
  o.n = 10;
  for (auto mode : {ChannelMode::Unix, ChannelMode::Tcp}) {
    o.channel = mode;
    auto r = measure_kex(Target::split(ConfigRow::CsCertDhe), x25519(), o);
    ASSERT_TRUE(r) << channel_name(mode) << ": " << r.error().message();
    EXPECT_EQ(r->count, 10u);
    EXPECT_EQ(r->channel, mode);
  }
}

TEST(MeasureKex, ZeroCountIsRejected) {
  BenchOptions o;
  o.n = 0;
  EXPECT_FALSE(measure_kex(Target::baseline(), x25519(), o));
}

TEST(Report, OneTablePerSuiteWithModeBaselines) {
  const std::vector<BenchResult> results{
      rate("x25519_ed25519", "baseline", 1715),  rate("x25519_ed25519", "baseline_psk", 2000),
      rate("x25519_ed25519", "cs_cert", 1543.5), rate("x25519_ed25519", "cs_psk", 1800),
      rate("x448_ed448", "baseline", 400),       rate("x448_ed448", "cs_cert_dhe", 400),
  };
  const std::string expected =
      "# suite x25519_ed25519\n"
      "config\tchannel\tKEX/s\tdelta%\n"
      "baseline\tinprocess\t1715.0\t0.0\n"
      "baseline_psk\tinprocess\t2000.0\t0.0\n"
      "cs_cert\tinprocess\t1543.5\t10.0\n"
      "cs_psk\tinprocess\t1800.0\t10.0\n"
      "# suite x448_ed448\n"
      "config\tchannel\tKEX/s\tdelta%\n"
      "baseline\tinprocess\t400.0\t0.0\n"
      "cs_cert_dhe\tinprocess\t400.0\t0.0\n";
  EXPECT_EQ(format_kex_report(results), expected);
}

TEST(Report, MissingBaselineIsDash) {
  EXPECT_EQ(format_kex_report({rate("s", "cs_psk", 10)}), "# suite s\nconfig\tchannel\tKEX/s\tdelta%\ncs_psk\tinprocess\t10.0\t-\n");
}

TEST(Transfer, TrendRowsPerSize) {
  BenchOptions o;
  o.n = 5;
  auto rows = transfer_trend({0, 4096}, Target::split(ConfigRow::CsCertDheR), x25519(), o);
  ASSERT_TRUE(rows) << rows.error().message();
  ASSERT_EQ(rows->size(), 2u);
  EXPECT_EQ((*rows)[1].file_size, 4096u);
  for (const auto& r : *rows) {
    EXPECT_GT(r.baseline_rps, 0);
    EXPECT_GT(r.split_rps, 0);
    EXPECT_NEAR(r.delta, std::fabs(r.split_rps - r.baseline_rps) / r.baseline_rps * 100, 1e-9);
  }
  EXPECT_EQ(format_trend(*rows).rfind("file_size\tbaseline_req/s\tsplit_req/s\tdelta%\n", 0), 0u);
}

}  // namespace
}  // namespace lurkt::bench
