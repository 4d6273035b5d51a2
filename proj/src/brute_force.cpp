// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <set>

#include "capmine/error.hpp"
#include "capmine/miner.hpp"

namespace capmine {

namespace {

bool connected(std::uint32_t mask, const std::vector<std::vector<bool>>& close, std::size_t n) {
    const auto first = static_cast<std::uint32_t>(std::countr_zero(mask));
    std::uint32_t seen = 1U << first;
    std::vector<std::uint32_t> stack{first};
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (std::uint32_t u = 0; u < n; ++u) {
            const auto bit = 1U << u;
            if ((mask & bit) && !(seen & bit) && close[v][u]) {
                seen |= bit;
                stack.push_back(u);
            }
        }
    }
    return seen == mask;
}

}  // namespace

MiningResult brute_force_mine(const Dataset& dataset, const MiningParams& params) {
    const std::size_t n = dataset.sensors.size();
    if (n > kBruteForceMaxSensors) {
        throw Error(ErrorCode::TooLarge, std::to_string(n) + " sensors exceed the brute-force limit of " +
                                             std::to_string(kBruteForceMaxSensors));
    }
    validate_params(params, &dataset);

    MiningResult result;
    result.dataset_hash = dataset.content_hash;
    result.params = params;
    result.stats.sensors = n;
    result.stats.attributes = dataset.attributes.size();
    result.stats.timestamps = dataset.grid.count;

    const EventSet events = compute_events(dataset, params);
    for (const auto& list : events) result.stats.events += list.size();

    std::vector<std::vector<bool>> close(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto& a = dataset.sensors[i];
            const auto& b = dataset.sensors[j];
            close[i][j] = haversine({a.lat, a.lon}, {b.lat, b.lon}) <= params.eta_meters;
        }
    }

    // Sorted event timestamps per (sensor, sign).
    auto indices = [&](std::size_t s, Sign sign) {
        std::vector<std::uint32_t> out;
        for (const auto& e : events[s]) {
            if (sign == Sign::any || e.sign == sign) out.push_back(e.index);
        }
        return out;
    };
    std::vector<std::vector<std::uint32_t>> plus(n), minus(n), any(n);
    for (std::size_t s = 0; s < n; ++s) {
        plus[s] = indices(s, Sign::plus);
        minus[s] = indices(s, Sign::minus);
        any[s] = indices(s, Sign::any);
    }

    const bool is_signed = params.direction == DirectionMode::signed_mode;
    std::vector<Cap> caps;
    for (std::uint32_t mask = 1; mask < (1U << n); ++mask) {
        const auto k = static_cast<std::size_t>(std::popcount(mask));
        if (k < 2) continue;
        std::vector<std::size_t> members;
        std::set<std::string> attrs;
        bool repeated = false;
        for (std::size_t s = 0; s < n; ++s) {
            if (!(mask & (1U << s))) continue;
            members.push_back(s);
            repeated |= !attrs.insert(dataset.sensors[s].key.attribute).second;
        }
        if (attrs.size() < 2 || attrs.size() > static_cast<std::size_t>(params.mu)) continue;
        if (params.distinct_attributes && repeated) continue;
        if (!connected(mask, close, n)) continue;

        const std::uint32_t sign_combos = is_signed ? (1U << k) : 1U;
        for (std::uint32_t combo = 0; combo < sign_combos; ++combo) {
            std::vector<std::uint32_t> shared;
            Cap cap;
            for (std::size_t i = 0; i < k; ++i) {
                const auto s = members[i];
                const Sign sign = !is_signed ? Sign::any : ((combo >> i) & 1U) ? Sign::minus : Sign::plus;
                const auto& mine = sign == Sign::plus ? plus[s] : sign == Sign::minus ? minus[s] : any[s];
                if (i == 0) {
                    shared = mine;
                } else {
                    std::vector<std::uint32_t> both;
                    std::set_intersection(shared.begin(), shared.end(), mine.begin(), mine.end(),
                                          std::back_inserter(both));
                    shared = std::move(both);
                }
                cap.members.push_back(CapMember{dataset.sensors[s].key, sign});
            }
            if (shared.size() < static_cast<std::size_t>(params.psi)) continue;
            std::sort(cap.members.begin(), cap.members.end());
            cap.attributes.assign(attrs.begin(), attrs.end());
            cap.support = shared.size();
            cap.co_timestamps = std::move(shared);
            caps.push_back(std::move(cap));
        }
    }

    if (params.maximal) {
        std::vector<Cap> kept;
        for (const auto& c : caps) {
            const bool dominated = std::any_of(caps.begin(), caps.end(), [&](const Cap& d) {
                return d.members.size() > c.members.size() &&
                       std::includes(d.members.begin(), d.members.end(), c.members.begin(), c.members.end());
            });
            if (!dominated) kept.push_back(c);
        }
        caps = std::move(kept);
    }
    sort_caps(caps);
    result.caps = std::move(caps);
    result.stats.caps = result.caps.size();
    return result;
}

}  // namespace capmine
