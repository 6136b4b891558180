// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lurkt/harness.hpp"

namespace lurkt::harness {
namespace {

TEST(Agreement, HonestInterleavedRunAccepts) {
  AgreementOptions o;
  o.sessions = 100;
  o.policy = ManglerPolicy::honest(7);
  auto r = run_agreement_battery(o);
  EXPECT_EQ(r.completed, 100u);
  EXPECT_TRUE(r.verdict.ok) << r.verdict.violation;
}

TEST(Agreement, HostileRunAcceptsCompletedSessions) {
  AgreementOptions o;
  o.sessions = 200;
  o.policy = ManglerPolicy::hostile(11);
  auto r = run_agreement_battery(o);
  std::cout << format_report(r);
  EXPECT_GT(r.hostile_actions, 0u);
  EXPECT_GT(r.aborted, 0u);
  EXPECT_EQ(r.mismatched_views, 0u);
  EXPECT_TRUE(r.verdict.ok) << r.verdict.violation;
}

TEST(Agreement, KeyLeakControlRejects) {
  auto r = run_key_leak_control(5, 1);
  EXPECT_EQ(r.completed, 6u);
  EXPECT_FALSE(r.verdict.ok);
}

TEST(Replay, NoAcceptances) {
  auto r = run_replay_battery(1000, 3);
  std::cout << format_report(r);
  EXPECT_EQ(r.attempts, 1000u);
  EXPECT_EQ(r.acceptances, 0u);
  EXPECT_GT(r.freshness_expected, 0u);
  EXPECT_EQ(r.freshness_observed, r.freshness_expected);
  EXPECT_EQ(r.sequence_violations, 200u);
}

TEST(Pfs, DistinctSharesAndRandoms) {
  auto r = run_pfs_battery(200);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.distinct_key_shares, 200u);
  EXPECT_EQ(r.distinct_server_randoms, 200u);
}

TEST(Confinement, CleanRunAccepts) {
  auto v = run_confinement({});
  EXPECT_TRUE(v.ok) << format_report(v);
  EXPECT_GT(v.secrets, 2u);
}

TEST(Confinement, LeakyFixtureRejects) {
  ConfinementOptions o;
  o.leaky = true;
  o.rounds = 1;
  auto v = run_confinement(o);
  EXPECT_FALSE(v.ok);
}

}  // namespace
}  // namespace lurkt::harness
