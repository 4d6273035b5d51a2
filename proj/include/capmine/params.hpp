// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace capmine {

struct Dataset;

enum class DirectionMode { signed_mode, unsigned_mode };

/// A threshold per attribute with an optional fallback for attributes that
/// are not listed.
struct AttributeThresholds {
    std::optional<double> fallback;
    std::map<std::string, double> per_attribute;

    [[nodiscard]] std::optional<double> resolve(const std::string& attribute) const;
    bool operator==(const AttributeThresholds&) const = default;
};

struct EpsilonSpec {
    enum class Mode { absolute, relative };
    Mode mode = Mode::absolute;
    AttributeThresholds absolute;
    /// Relative mode: epsilon = fraction * (max - min) of each sensor's
    /// non-null values.
    double relative_fraction = 0.0;

    bool operator==(const EpsilonSpec&) const = default;
};

struct MiningParams {
    EpsilonSpec epsilon;
    double eta_meters = 0.0;
    int mu = 2;
    int psi = 1;
    bool distinct_attributes = true;
    AttributeThresholds max_error{0.0, {}};
    DirectionMode direction = DirectionMode::signed_mode;
    bool maximal = false;

    bool operator==(const MiningParams&) const = default;
};

/// Checks the invariants that do not depend on data. With a dataset it also
/// requires psi <= timestamps - 1 and thresholds for every attribute.
void validate_params(const MiningParams& params, const Dataset* dataset = nullptr);

/// Canonical form: every field present, keys sorted, integral numbers
/// written as integers, per-attribute entries equal to the fallback dropped.
nlohmann::json params_to_json(const MiningParams& params);

/// Accepts the canonical form plus looser spellings: a bare number or the
/// flag syntax ("rel:0.05", "temp=0.5,traffic=3") for epsilon and
/// max_error, flat attribute maps, `eta` for `eta_meters`, numbers like 3.0
/// for integers. Throws InvalidParams.
MiningParams params_from_json(const nlohmann::json& json);

std::string canonical_params(const MiningParams& params);

/// SHA-256 hex of canonical_params().
std::string params_digest(const MiningParams& params);

/// Parses the command-line threshold syntax. Each item is a bare number
/// (fallback) or `attr=value` pairs separated by commas; epsilon also
/// accepts `rel:fraction`.
EpsilonSpec parse_epsilon_syntax(const std::vector<std::string>& items);
AttributeThresholds parse_threshold_syntax(const std::vector<std::string>& items);

std::string_view direction_name(DirectionMode mode) noexcept;

}  // namespace capmine
