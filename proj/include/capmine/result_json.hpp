// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "capmine/miner.hpp"
#include "json.hpp"

namespace capmine {

/// {"caps":[{"members":[{"attribute","id","sign"}],"support","timestamps"}],
///  "dataset_hash","params","stats"}. Keys are sorted.
nlohmann::json result_to_json(const MiningResult& result);

/// Compact dump of result_to_json(); byte-stable for equal results.
std::string serialize_result(const MiningResult& result);

MiningResult result_from_json(const nlohmann::json& json);

/// One Point feature per (cap, member) pair; coordinates come from the
/// dataset. Members missing from the dataset are skipped.
nlohmann::json result_to_geojson(const MiningResult& result, const Dataset& dataset);

std::string sign_text(Sign sign);

}  // namespace capmine
