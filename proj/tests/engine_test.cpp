// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

namespace lurkt {
namespace {

using testing::Rig;

class CertRows : public ::testing::TestWithParam<ConfigRow> {};

TEST_P(CertRows, CompletesWithPlannedExchanges) {
  Rig rig;
  rig.opts.cert_row = GetParam();
  auto h = rig.run(rig.client_options());
  ASSERT_TRUE(h.status) << h.status.error().message();
  EXPECT_EQ(h.engine->state(), engine::EngineSession::State::Done);
  EXPECT_EQ(h.engine->exchanges(), *plan_exchanges(GetParam(), false));
  EXPECT_EQ(h.client->client_app_secret(), h.engine->client_app_secret());
  EXPECT_EQ(h.client->server_app_secret(), h.engine->server_app_secret());
  EXPECT_TRUE(h.client->saw_certificate());
  EXPECT_TRUE(h.engine->nonce_erased());
  EXPECT_EQ(h.client->tickets().empty(), !config_for(GetParam()).cs_generates_resumption);
}

INSTANTIATE_TEST_SUITE_P(All, CertRows,
                         ::testing::Values(ConfigRow::CsCertDheR, ConfigRow::CsCertDhe, ConfigRow::CsCert,
                                           ConfigRow::CsCertKeyless),
                         [](const auto& info) { return std::string(row_name(info.param)); });

class PskRows : public ::testing::TestWithParam<ConfigRow> {};

TEST_P(PskRows, ResumesWithPlannedExchanges) {
  Rig rig;
  auto ticket = rig.issue_ticket();
  ASSERT_TRUE(ticket);
  rig.opts.psk_row = GetParam();
  auto c = rig.client_options();
  c.ticket = *ticket;
  c.require_resumption = true;
  auto h = rig.run(c);
  ASSERT_TRUE(h.status) << h.status.error().message();
  EXPECT_TRUE(h.engine->resumed());
  EXPECT_TRUE(h.client->resumed());
  EXPECT_FALSE(h.client->saw_certificate());
  EXPECT_EQ(h.engine->exchanges(), *plan_exchanges(GetParam(), true));
  EXPECT_EQ(h.client->server_app_secret(), h.engine->server_app_secret());
  EXPECT_EQ(h.client->tickets().empty(), !config_for(GetParam()).cs_generates_resumption);
}

INSTANTIATE_TEST_SUITE_P(All, PskRows,
                         ::testing::Values(ConfigRow::CsPskDheR, ConfigRow::CsPskDhe, ConfigRow::CsPskR,
                                           ConfigRow::CsPsk),
                         [](const auto& info) { return std::string(row_name(info.param)); });

}  // namespace
}  // namespace lurkt
