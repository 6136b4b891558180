// SPDX-License-Identifier: Apache-2.0
#include "lurkt/config.hpp"

#include <algorithm>

namespace lurkt {

using lurk::MsgType;

namespace {

struct RowInfo {
  ConfigRow row;
  std::string_view name;
  CsConfig cfg;
};

// mode, ecdhe, handshake, application, resumption
constexpr std::array<RowInfo, 8> kRows = {{
    {ConfigRow::CsCertDheR, "cs_cert_dhe_r", {AuthMode::Cert, true, true, true, true}},
    {ConfigRow::CsCertDhe, "cs_cert_dhe", {AuthMode::Cert, true, true, true, false}},
    {ConfigRow::CsCert, "cs_cert", {AuthMode::Cert, false, true, true, false}},
    {ConfigRow::CsCertKeyless, "cs_cert_keyless", {AuthMode::Cert, false, false, false, false}},
    {ConfigRow::CsPskDheR, "cs_psk_dhe_r", {AuthMode::Psk, true, true, true, true}},
    {ConfigRow::CsPskDhe, "cs_psk_dhe", {AuthMode::Psk, true, true, true, false}},
    {ConfigRow::CsPskR, "cs_psk_r", {AuthMode::Psk, false, true, true, true}},
    {ConfigRow::CsPsk, "cs_psk", {AuthMode::Psk, false, true, true, false}},
}};

const RowInfo& info(ConfigRow row) { return kRows[static_cast<std::size_t>(row) - 1]; }

}  // namespace

Result<CsConfig> CsConfig::make(AuthMode mode, bool ecdhe, bool handshake, bool application, bool resumption) {
  CsConfig cfg{mode, ecdhe, handshake, application, resumption};
  LURKT_TRY(row_for(cfg));
  return cfg;
}

CsConfig config_for(ConfigRow row) { return info(row).cfg; }

Result<ConfigRow> row_for(const CsConfig& cfg) {
  for (const auto& r : kRows) {
    if (r.cfg == cfg) return r.row;
  }
  return make_error(Errc::InvalidConfig, "flag combination is not one of: " + all_row_names());
}

std::string_view row_name(ConfigRow row) { return info(row).name; }

std::string all_row_names() {
  std::string out;
  for (const auto& r : kRows) {
    if (!out.empty()) out += ", ";
    out += r.name;
  }
  return out;
}

Result<ConfigRow> parse_row(std::string_view name) {
  for (const auto& r : kRows) {
    if (r.name == name) return r.row;
  }
  return make_error(Errc::InvalidConfig,
                    "unknown configuration '" + std::string(name) + "'; expected one of: " + all_row_names());
}

Result<ConfigRow> row_from_wire(std::uint8_t raw) {
  if (raw < 1 || raw > kRows.size()) {
    return make_error(Errc::InvalidConfig, "configuration id " + std::to_string(raw));
  }
  return static_cast<ConfigRow>(raw);
}

ConfigRow without_resumption(ConfigRow row) {
  switch (row) {
    case ConfigRow::CsCertDheR: return ConfigRow::CsCertDhe;
    case ConfigRow::CsPskDheR: return ConfigRow::CsPskDhe;
    case ConfigRow::CsPskR: return ConfigRow::CsPsk;
    default: return row;
  }
}

namespace {

ExchangePlan plan_for(ConfigRow row) {
  const CsConfig cfg = config_for(row);
  ExchangePlan plan;
  if (cfg.mode == AuthMode::Cert) {
    if (cfg.cs_generates_ecdhe) plan.push_back(MsgType::GetEcdhe);
    if (cfg.cs_generates_handshake) plan.push_back(MsgType::GetHandshakeSecrets);
    plan.push_back(MsgType::GetSigAndApp);
    if (cfg.cs_generates_resumption) plan.push_back(MsgType::NewTicket);
    return plan;
  }
  plan.push_back(MsgType::EarlySecret);
  if (cfg.cs_generates_ecdhe) plan.push_back(MsgType::GetEcdhe);
  plan.push_back(MsgType::GetHandshakeSecrets);
  plan.push_back(MsgType::GetAppSecret);
  if (cfg.cs_generates_resumption) plan.push_back(MsgType::GetResSecret);
  return plan;
}

}  // namespace

Result<ExchangePlan> plan_exchanges(ConfigRow row, bool resumed) {
  if (static_cast<std::uint8_t>(row) < 1 || static_cast<std::uint8_t>(row) > kRows.size()) {
    return make_error(Errc::InvalidConfig, "configuration id out of range");
  }
  const bool psk = config_for(row).mode == AuthMode::Psk;
  if (psk != resumed) {
    return make_error(Errc::InvalidConfig, std::string(row_name(row)) +
                                               (psk ? " only serves resumed handshakes" : " only serves full handshakes"));
  }
  return plan_for(row);
}

std::vector<MsgType> accepted_requests(ConfigRow row) {
  auto out = plan_for(row);
  out.push_back(MsgType::Attest);
  return out;
}

bool accepts(ConfigRow row, MsgType t) {
  auto list = accepted_requests(row);
  return std::find(list.begin(), list.end(), t) != list.end();
}

}  // namespace lurkt
