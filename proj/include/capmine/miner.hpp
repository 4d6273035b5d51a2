// SPDX-License-Identifier: Apache-2.0

// Correlated attribute pattern (CAP) search.
//
// A CAP is a set of sensors, each tagged with an event direction, that
//   * induces a connected subgraph of the eta-proximity graph,
//   * spans between 2 and mu attributes (pairwise distinct unless
//     distinct_attributes is off),
//   * shares at least psi grid timestamps at which every member has an
//     event of its tagged direction.
//
// Support is anti-monotone: adding a member can only shrink the shared
// timestamp set, which is what makes the pruned search below exact.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "capmine/ingest.hpp"
#include "capmine/params.hpp"
#include "capmine/segmentation.hpp"
#include "capmine/spatial.hpp"

namespace capmine {

struct CapMember {
    SensorKey sensor;
    Sign sign = Sign::plus;

    auto operator<=>(const CapMember&) const = default;
    bool operator==(const CapMember&) const = default;
};

struct Cap {
    std::vector<CapMember> members;       // sorted
    std::vector<std::string> attributes;  // sorted, distinct
    std::size_t support = 0;
    std::vector<std::uint32_t> co_timestamps;  // grid indices, ascending

    bool operator==(const Cap&) const = default;
};

struct MiningStats {
    std::size_t sensors = 0;
    std::size_t attributes = 0;
    std::size_t timestamps = 0;
    std::size_t events = 0;
    std::size_t edges = 0;
    std::size_t components = 0;
    std::size_t nodes_visited = 0;
    std::size_t caps = 0;

    bool operator==(const MiningStats&) const = default;
};

struct MiningResult {
    std::string dataset_hash;
    MiningParams params;
    std::vector<Cap> caps;  // support desc, then members asc
    MiningStats stats;
    /// Wall time of the run. Not serialized, so results stay byte-stable.
    double elapsed_seconds = 0.0;
};

/// Per-sensor events, indexed like Dataset::sensors.
using EventSet = std::vector<std::vector<Event>>;

/// Segmentation (per attribute max_error) then event extraction (per
/// attribute or relative epsilon) for every sensor.
EventSet compute_events(const Dataset& dataset, const MiningParams& params);

struct MemberRef {
    std::uint32_t sensor = 0;
    Sign sign = Sign::plus;
};

struct Support {
    std::size_t count = 0;
    std::vector<std::uint32_t> co_timestamps;
};

/// Intersection over members of their event timestamps with the member's
/// sign (any sign in unsigned mode). Throws UnknownSensor.
Support coevolution_support(const EventSet& events, std::span<const MemberRef> members, DirectionMode mode);

struct EnumerationHooks {
    /// Called at every node of the search tree with the vertex set (in
    /// insertion order, root first) and the matching signs.
    std::function<void(std::span<const std::uint32_t>, std::span<const Sign>)> on_visit;
};

/// All CAPs whose sensors lie in `component`. `events` is indexed by graph
/// vertex. The result is sorted like MiningResult::caps and is not
/// maximal-filtered.
std::vector<Cap> enumerate_caps(const ProximityGraph& graph, const EventSet& events, const MiningParams& params,
                                std::span<const std::uint32_t> component, const EnumerationHooks& hooks = {});

struct MineOptions {
    /// 0 = hardware concurrency.
    std::size_t threads = 0;
    /// (components finished, components total); may be called from worker
    /// threads.
    std::function<void(std::size_t, std::size_t)> on_progress;
};

MiningResult mine(const Dataset& dataset, const MiningParams& params, const MineOptions& options = {});

/// Exhaustive reference: every signed subset of sensors is checked against
/// the CAP definition directly. Throws TooLarge above 16 sensors.
MiningResult brute_force_mine(const Dataset& dataset, const MiningParams& params);

inline constexpr std::size_t kBruteForceMaxSensors = 16;

/// Sorts by (support desc, member list asc).
void sort_caps(std::vector<Cap>& caps);

/// Drops caps whose member set is a strict subset of another cap's.
std::vector<Cap> filter_maximal(std::vector<Cap> caps);

}  // namespace capmine
