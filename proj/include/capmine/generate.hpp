// SPDX-License-Identifier: Apache-2.0

// Synthetic sensor datasets with planted co-evolution patterns.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "capmine/ingest.hpp"
#include "capmine/miner.hpp"
#include "json.hpp"

namespace capmine {

struct GenerateOptions {
    std::size_t sensors = 50;
    std::size_t attributes = 3;
    std::size_t timestamps = 500;
    std::size_t planted_caps = 2;
    std::size_t cap_size = 3;
    /// Planted co-evolving timestamps per cap.
    std::size_t support = 50;
    /// Per-sensor, per-timestamp probability of a background jump.
    double noise = 0.02;
    /// Fraction of cells left empty (never inside a planted pattern).
    double null_fraction = 0.0;
    std::uint64_t seed = 42;
    EpochSeconds start = 1456790400;  // 2016-03-01 00:00:00
    std::int64_t step = 3600;
};

struct PlantedCap {
    std::vector<CapMember> members;  // sorted
    std::vector<std::uint32_t> timestamps;  // ascending grid indices
};

struct GeneratedDataset {
    Dataset dataset;
    DatasetFiles files;
    std::vector<PlantedCap> planted;
    /// Sidecar describing the planted caps and parameters that recover them.
    nlohmann::json manifest;
};

/// Jumps are at least 2 in magnitude and jitter stays within 0.2, so with
/// epsilon 1 and max_error 0 every planted timestamp is an event for every
/// member and jitter alone never is. Deterministic per options.
GeneratedDataset generate_dataset(const GenerateOptions& options);

}  // namespace capmine
