// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "capmine/ingest.hpp"

namespace capmine {

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

struct LatLon {
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees
};

/// Great-circle distance in meters on a sphere of radius kEarthRadiusMeters.
double haversine(LatLon a, LatLon b) noexcept;

/// Undirected graph over sensors with an edge wherever haversine <= eta.
/// Vertices are kept in (id, attribute) order; vertex i is `keys[i]`.
class ProximityGraph {
  public:
    ProximityGraph() = default;
    ProximityGraph(std::vector<SensorKey> keys, std::vector<std::vector<std::uint32_t>> adjacency);

    [[nodiscard]] std::size_t size() const noexcept { return keys_.size(); }
    [[nodiscard]] const SensorKey& key(std::size_t v) const { return keys_[v]; }
    [[nodiscard]] std::span<const SensorKey> keys() const noexcept { return keys_; }
    /// Sorted ascending.
    [[nodiscard]] std::span<const std::uint32_t> neighbors(std::size_t v) const { return adjacency_[v]; }
    [[nodiscard]] bool adjacent(std::size_t u, std::size_t v) const;
    [[nodiscard]] std::size_t edge_count() const noexcept;

  private:
    std::vector<SensorKey> keys_;
    std::vector<std::vector<std::uint32_t>> adjacency_;
};

struct ProximityOptions {
    /// Skips pairs whose latitude gap alone exceeds eta. Never changes the
    /// resulting edge set.
    bool latitude_prefilter = true;
};

ProximityGraph build_proximity_graph(std::span<const Sensor> sensors, double eta_meters,
                                     ProximityOptions options = {});

struct ComponentPartition {
    std::vector<std::uint32_t> component_of;             // per vertex
    std::vector<std::vector<std::uint32_t>> components;  // sorted members; ordered by smallest member
};

ComponentPartition connected_components(const ProximityGraph& graph);

}  // namespace capmine
