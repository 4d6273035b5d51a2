// SPDX-License-Identifier: Apache-2.0

// Shared helpers for the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "capmine/ingest.hpp"
#include "capmine/miner.hpp"
#include "capmine/params.hpp"

#ifndef CAPMINE_FIXTURE_DIR
#define CAPMINE_FIXTURE_DIR "tests/fixtures"
#endif

namespace capmine::testing {

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("capmine-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(CAPMINE_FIXTURE_DIR) / rel; }

/// Puts sensors and series into canonical order and fills in the hash.
inline Dataset make_dataset(std::vector<Sensor> sensors, std::vector<std::vector<double>> values, TimeGrid grid,
                            std::string name = "test") {
    Dataset d;
    d.name = std::move(name);
    d.grid = grid;
    std::vector<std::size_t> order(sensors.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sensors[a].key < sensors[b].key; });
    for (auto i : order) {
        d.sensors.push_back(sensors[i]);
        d.series.push_back({sensors[i].key, values[i]});
        if (std::find(d.attributes.begin(), d.attributes.end(), sensors[i].key.attribute) == d.attributes.end())
            d.attributes.push_back(sensors[i].key.attribute);
    }
    std::sort(d.attributes.begin(), d.attributes.end());
    d.content_hash = compute_content_hash(d);
    return d;
}

struct Instance {
    Dataset dataset;
    MiningParams params;
};

struct InstanceLimits {
    std::size_t max_sensors = 12;
    std::size_t max_timestamps = 200;
};

/// Random small dataset with shared shocks, so that caps are common, plus
/// random parameters covering both direction modes and both attribute rules.
inline Instance random_instance(std::mt19937_64& rng, InstanceLimits lim = {}) {
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    auto coin = [&](double p) { return uni(0.0, 1.0) < p; };

    const std::size_t n = pick(2, lim.max_sensors);
    const std::size_t attrs = pick(1, 3);
    const std::size_t T = pick(10, lim.max_timestamps);
    const char* names[] = {"humidity", "temperature", "traffic"};

    std::vector<Sensor> sensors;
    for (std::size_t i = 0; i < n; ++i) {
        Sensor s;
        s.key = {std::to_string(100 + i), names[pick(0, attrs - 1)]};
        s.lat = 43.46 + uni(0.0, 0.006);
        s.lon = -3.80 + uni(0.0, 0.008);
        sensors.push_back(s);
    }

    // A handful of shocks hit random sensor subsets with random signs.
    std::vector<std::vector<double>> jump(n, std::vector<double>(T, 0.0));
    const std::size_t shocks = pick(T / 8, T / 2);
    for (std::size_t k = 0; k < shocks; ++k) {
        const std::size_t t = pick(1, T - 1);
        const double sign = coin(0.5) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (coin(0.6)) jump[i][t] += (coin(0.85) ? sign : -sign) * uni(0.8, 3.0);
    }
    std::vector<std::vector<double>> values(n, std::vector<double>(T));
    for (std::size_t i = 0; i < n; ++i) {
        double level = uni(0.0, 50.0);
        for (std::size_t t = 0; t < T; ++t) {
            level += jump[i][t] + uni(-0.3, 0.3);
            values[i][t] = std::round(level * 100.0) / 100.0;
            if (coin(0.03)) values[i][t] = kNull;
        }
    }

    Instance inst;
    inst.dataset = make_dataset(std::move(sensors), std::move(values), {1456790400, 3600, T});

    MiningParams& p = inst.params;
    if (coin(0.2)) {
        p.epsilon.mode = EpsilonSpec::Mode::relative;
        p.epsilon.relative_fraction = uni(0.01, 0.15);
    } else {
        p.epsilon.absolute.fallback = uni(0.3, 1.5);
        const auto& present = inst.dataset.attributes;
        if (coin(0.4) && std::find(present.begin(), present.end(), "temperature") != present.end())
            p.epsilon.absolute.per_attribute["temperature"] = uni(0.3, 2.0);
    }
    p.eta_meters = uni(50.0, 700.0);
    p.mu = static_cast<int>(pick(2, 4));
    p.psi = static_cast<int>(pick(1, std::min<std::size_t>(10, T - 1)));
    p.distinct_attributes = coin(0.5);
    p.direction = coin(0.5) ? DirectionMode::signed_mode : DirectionMode::unsigned_mode;
    if (coin(0.25)) p.max_error.fallback = uni(0.0, 0.4);
    return inst;
}

/// Member sets of a result, ignoring supports.
inline std::vector<std::vector<CapMember>> member_sets(const std::vector<Cap>& caps) {
    std::vector<std::vector<CapMember>> out;
    for (const auto& c : caps) out.push_back(c.members);
    std::sort(out.begin(), out.end());
    return out;
}

inline bool contains_cap(const std::vector<Cap>& caps, const Cap& cap) {
    return std::find(caps.begin(), caps.end(), cap) != caps.end();
}

inline bool contains_members(const std::vector<Cap>& caps, const std::vector<CapMember>& members) {
    return std::any_of(caps.begin(), caps.end(), [&](const Cap& c) { return c.members == members; });
}

}  // namespace capmine::testing
