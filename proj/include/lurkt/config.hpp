// SPDX-License-Identifier: Apache-2.0
//
// Crypto service configurations: which side produces the (EC)DHE share and
// each secret, and the ordered request plan an engine issues per handshake.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lurkt/error.hpp"
#include "lurkt/lurk.hpp"

namespace lurkt {

enum class AuthMode : std::uint8_t { Cert, Psk };

// Wire values are carried in request payloads.
enum class ConfigRow : std::uint8_t {
  CsCertDheR = 1,
  CsCertDhe = 2,
  CsCert = 3,
  CsCertKeyless = 4,
  CsPskDheR = 5,
  CsPskDhe = 6,
  CsPskR = 7,
  CsPsk = 8,
};

inline constexpr std::array<ConfigRow, 8> kAllRows = {
    ConfigRow::CsCertDheR, ConfigRow::CsCertDhe, ConfigRow::CsCert, ConfigRow::CsCertKeyless,
    ConfigRow::CsPskDheR,  ConfigRow::CsPskDhe,  ConfigRow::CsPskR, ConfigRow::CsPsk,
};

struct CsConfig {
  AuthMode mode = AuthMode::Cert;
  bool cs_generates_ecdhe = false;
  bool cs_generates_handshake = false;
  bool cs_generates_application = false;
  bool cs_generates_resumption = false;

  bool keyless() const {
    return mode == AuthMode::Cert && !cs_generates_ecdhe && !cs_generates_handshake && !cs_generates_application &&
           !cs_generates_resumption;
  }
  bool operator==(const CsConfig&) const = default;

  // Only the eight rows are constructible; anything else is InvalidConfig.
  static Result<CsConfig> make(AuthMode mode, bool ecdhe, bool handshake, bool application, bool resumption);
};

CsConfig config_for(ConfigRow row);
Result<ConfigRow> row_for(const CsConfig& cfg);
std::string_view row_name(ConfigRow row);
// InvalidConfig names every accepted row.
Result<ConfigRow> parse_row(std::string_view name);
Result<ConfigRow> row_from_wire(std::uint8_t raw);
std::string all_row_names();

// Rows with resumption map to their counterpart without it.
ConfigRow without_resumption(ConfigRow row);

using ExchangePlan = std::vector<lurk::MsgType>;

// Cert rows plan full handshakes, PSK rows plan resumed ones; the other
// combination is InvalidConfig.
Result<ExchangePlan> plan_exchanges(ConfigRow row, bool resumed);
// Request types a service accepts for sessions pinned to `row`.
std::vector<lurk::MsgType> accepted_requests(ConfigRow row);
bool accepts(ConfigRow row, lurk::MsgType t);

}  // namespace lurkt
