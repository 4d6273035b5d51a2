// SPDX-License-Identifier: Apache-2.0

#include "capmine/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "capmine/error.hpp"

namespace capmine {

double haversine(LatLon a, LatLon b) noexcept {
    constexpr double kRad = std::numbers::pi / 180.0;
    const double phi1 = a.lat * kRad;
    const double phi2 = b.lat * kRad;
    const double dphi = (b.lat - a.lat) * kRad;
    const double dlambda = (b.lon - a.lon) * kRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(h));
}

ProximityGraph::ProximityGraph(std::vector<SensorKey> keys, std::vector<std::vector<std::uint32_t>> adjacency)
    : keys_(std::move(keys)), adjacency_(std::move(adjacency)) {}

bool ProximityGraph::adjacent(std::size_t u, std::size_t v) const {
    const auto& n = adjacency_[u];
    return std::binary_search(n.begin(), n.end(), static_cast<std::uint32_t>(v));
}

std::size_t ProximityGraph::edge_count() const noexcept {
    std::size_t total = 0;
    for (const auto& n : adjacency_) total += n.size();
    return total / 2;
}

ProximityGraph build_proximity_graph(std::span<const Sensor> sensors, double eta_meters, ProximityOptions options) {
    if (!(eta_meters >= 0.0)) throw Error(ErrorCode::NegativeEta, "eta must be >= 0 meters");
    std::vector<std::uint32_t> order(sensors.size());
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return sensors[a].key < sensors[b].key; });

    const std::size_t n = sensors.size();
    std::vector<SensorKey> keys;
    std::vector<LatLon> pos;
    keys.reserve(n);
    pos.reserve(n);
    for (const auto i : order) {
        keys.push_back(sensors[i].key);
        pos.push_back({sensors[i].lat, sensors[i].lon});
    }

    std::vector<std::vector<std::uint32_t>> adjacency(n);
    auto consider = [&](std::uint32_t u, std::uint32_t v) {
        if (haversine(pos[u], pos[v]) <= eta_meters) {
            adjacency[u].push_back(v);
            adjacency[v].push_back(u);
        }
    };
    if (options.latitude_prefilter) {
        // Great-circle distance is at least R * |dphi|; the slack absorbs
        // rounding so the prefilter never drops a qualifying pair.
        const double band_deg = (eta_meters / kEarthRadiusMeters) * (180.0 / std::numbers::pi) * (1.0 + 1e-9) + 1e-9;
        std::vector<std::uint32_t> by_lat(n);
        std::iota(by_lat.begin(), by_lat.end(), 0U);
        std::sort(by_lat.begin(), by_lat.end(), [&](std::uint32_t a, std::uint32_t b) {
            return pos[a].lat < pos[b].lat || (pos[a].lat == pos[b].lat && a < b);
        });
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (pos[by_lat[j]].lat - pos[by_lat[i]].lat > band_deg) break;
                consider(by_lat[i], by_lat[j]);
            }
        }
    } else {
        for (std::uint32_t u = 0; u < n; ++u) {
            for (std::uint32_t v = u + 1; v < n; ++v) consider(u, v);
        }
    }
    for (auto& list : adjacency) std::sort(list.begin(), list.end());
    return ProximityGraph(std::move(keys), std::move(adjacency));
}

ComponentPartition connected_components(const ProximityGraph& graph) {
    constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
    ComponentPartition out;
    out.component_of.assign(graph.size(), kUnset);
    std::vector<std::uint32_t> stack;
    // Visiting vertices in ascending order numbers components by their
    // smallest member.
    for (std::uint32_t root = 0; root < graph.size(); ++root) {
        if (out.component_of[root] != kUnset) continue;
        const auto id = static_cast<std::uint32_t>(out.components.size());
        auto& members = out.components.emplace_back();
        out.component_of[root] = id;
        stack.push_back(root);
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            members.push_back(v);
            for (const auto u : graph.neighbors(v)) {
                if (out.component_of[u] == kUnset) {
                    out.component_of[u] = id;
                    stack.push_back(u);
                }
            }
        }
        std::sort(members.begin(), members.end());
    }
    return out;
}

}  // namespace capmine
