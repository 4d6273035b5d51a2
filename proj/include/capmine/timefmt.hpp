// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace capmine {

/// Seconds since the Unix epoch, UTC.
using EpochSeconds = std::int64_t;

/// Parses exactly `YYYY-MM-DD HH:MM:SS` as UTC. Rejects anything else,
/// including out-of-range calendar fields.
std::optional<EpochSeconds> parse_timestamp(std::string_view text) noexcept;

std::string format_timestamp(EpochSeconds t);

}  // namespace capmine
