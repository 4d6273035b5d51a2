// SPDX-License-Identifier: Apache-2.0

#include "capmine/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "capmine/error.hpp"
#include "capmine/params.hpp"
#include "capmine/result_json.hpp"
#include "capmine/timefmt.hpp"

namespace capmine {

namespace {

// std::mt19937_64 output is fixed by the standard; the distributions are
// not, so the mappings below are spelled out to keep files identical
// across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    bool chance(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

  private:
    std::mt19937_64 engine_;
};

const char* const kAttributeNames[] = {"temperature", "traffic", "humidity", "noise",
                                       "light",       "co2",     "pm10",     "ozone"};

std::string attribute_name(std::size_t i) {
    if (i < std::size(kAttributeNames)) return kAttributeNames[i];
    return "attr" + std::to_string(i);
}

std::string sensor_id(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    return buf;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

// Bounding box of the synthetic city.
constexpr double kLatLo = 43.40, kLatHi = 43.50;
constexpr double kLonLo = -3.90, kLonHi = -3.75;
// Planted members sit within this many degrees of their cluster centre,
// about 22 m in latitude.
constexpr double kClusterSpread = 0.0002;

void check(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidParams, what);
}

}  // namespace

GeneratedDataset generate_dataset(const GenerateOptions& o) {
    check(o.sensors >= 1 && o.sensors <= 99999, "sensors must be in [1, 99999]");
    check(o.attributes >= 1, "attributes must be at least 1");
    check(o.timestamps >= 2, "timestamps must be at least 2");
    check(o.noise >= 0.0 && o.noise <= 1.0, "noise must be in [0, 1]");
    check(o.null_fraction >= 0.0 && o.null_fraction < 1.0, "null fraction must be in [0, 1)");
    check(o.step > 0, "step must be positive");
    if (o.planted_caps > 0) {
        check(o.cap_size >= 2 && o.cap_size <= o.attributes, "cap size must be in [2, attributes]");
        check(o.support >= 1 && o.support <= o.timestamps - 1, "support must be in [1, timestamps - 1]");
    }

    Rng rng(o.seed);
    const std::size_t n = o.sensors;
    const std::size_t T = o.timestamps;

    std::vector<std::size_t> attr_of(n);
    std::vector<std::vector<std::size_t>> by_attr(o.attributes);
    for (std::size_t i = 0; i < n; ++i) {
        attr_of[i] = i % o.attributes;
        by_attr[attr_of[i]].push_back(i);
    }

    std::vector<double> lat(n), lon(n);
    for (std::size_t i = 0; i < n; ++i) {
        lat[i] = rng.uniform(kLatLo, kLatHi);
        lon[i] = rng.uniform(kLonLo, kLonHi);
    }

    // Choose members, signs and timestamps of each planted cap.
    struct Plan {
        std::vector<std::size_t> sensors;
        std::vector<int> signs;
        std::vector<std::uint32_t> times;
    };
    std::vector<Plan> plans;
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < o.planted_caps; ++c) {
        std::vector<std::size_t> attrs(o.attributes);
        for (std::size_t a = 0; a < attrs.size(); ++a) attrs[a] = a;
        rng.shuffle(attrs);
        Plan plan;
        const double clat = rng.uniform(kLatLo, kLatHi);
        const double clon = rng.uniform(kLonLo, kLonHi);
        for (std::size_t m = 0; m < o.cap_size; ++m) {
            std::vector<std::size_t> free;
            for (std::size_t s : by_attr[attrs[m]])
                if (!used[s]) free.push_back(s);
            check(!free.empty(), "not enough sensors for the planted caps");
            const std::size_t s = free[rng.below(free.size())];
            used[s] = true;
            lat[s] = clat + rng.uniform(-kClusterSpread, kClusterSpread);
            lon[s] = clon + rng.uniform(-kClusterSpread, kClusterSpread);
            plan.sensors.push_back(s);
            plan.signs.push_back(rng.chance(0.5) ? 1 : -1);
        }
        std::vector<std::uint32_t> idx(T - 1);
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<std::uint32_t>(k + 1);
        rng.shuffle(idx);
        plan.times.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(o.support));
        std::sort(plan.times.begin(), plan.times.end());
        plans.push_back(std::move(plan));
    }

    // planted[s][t] = forced jump sign at t (0 = none); protected cells never become null.
    std::vector<std::vector<int>> planted(n);
    std::vector<std::vector<bool>> keep(n);
    for (const auto& plan : plans) {
        for (std::size_t m = 0; m < plan.sensors.size(); ++m) {
            const std::size_t s = plan.sensors[m];
            planted[s].assign(T, 0);
            keep[s].assign(T, false);
            for (auto t : plan.times) {
                planted[s][t] = plan.signs[m];
                keep[s][t] = keep[s][t - 1] = true;
            }
        }
    }

    Dataset ds;
    ds.grid = {o.start, o.step, T};
    for (std::size_t a = 0; a < o.attributes; ++a) ds.attributes.push_back(attribute_name(a));
    std::sort(ds.attributes.begin(), ds.attributes.end());

    std::vector<std::pair<SensorKey, std::size_t>> order;
    for (std::size_t i = 0; i < n; ++i) order.push_back({{sensor_id(i), attribute_name(attr_of[i])}, i});
    std::sort(order.begin(), order.end());

    std::vector<std::vector<double>> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& v = values[i];
        v.resize(T);
        const double base = 10.0 + 10.0 * static_cast<double>(attr_of[i]);
        double level = base;
        const bool jitter = o.noise > 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const int forced = planted[i].empty() ? 0 : planted[i][t];
            if (t > 0) {
                if (forced != 0) {
                    level += forced * rng.uniform(2.0, 6.0);
                } else if (o.noise > 0.0 && rng.chance(o.noise)) {
                    level += (rng.chance(0.5) ? 1.0 : -1.0) * rng.uniform(2.0, 6.0);
                }
            }
            const double cell = level + (jitter ? rng.uniform(-0.1, 0.1) : 0.0);
            v[t] = round3(cell);
        }
        if (o.null_fraction > 0.0) {
            for (std::size_t t = 0; t < T; ++t) {
                const bool locked = !keep[i].empty() && keep[i][t];
                if (rng.chance(o.null_fraction) && !locked) v[t] = kNull;
            }
        }
    }

    for (const auto& [key, i] : order) {
        ds.sensors.push_back({key, std::round(lat[i] * 1e5) / 1e5, std::round(lon[i] * 1e5) / 1e5});
        ds.series.push_back({key, std::move(values[i])});
    }
    ds.name = "synthetic";
    ds.content_hash = compute_content_hash(ds);

    GeneratedDataset out;
    out.files = to_csv(ds);

    nlohmann::json caps = nlohmann::json::array();
    for (const auto& plan : plans) {
        PlantedCap pc;
        for (std::size_t m = 0; m < plan.sensors.size(); ++m) {
            const std::size_t s = plan.sensors[m];
            pc.members.push_back({{sensor_id(s), attribute_name(attr_of[s])}, plan.signs[m] > 0 ? Sign::plus : Sign::minus});
        }
        std::sort(pc.members.begin(), pc.members.end());
        pc.timestamps = plan.times;
        nlohmann::json members = nlohmann::json::array();
        for (const auto& m : pc.members)
            members.push_back({{"id", m.sensor.id}, {"attribute", m.sensor.attribute}, {"sign", sign_text(m.sign)}});
        caps.push_back({{"members", members}, {"timestamps", pc.timestamps}, {"support", pc.timestamps.size()}});
        out.planted.push_back(std::move(pc));
    }

    MiningParams suggested;
    suggested.epsilon.absolute.fallback = 1.0;
    suggested.eta_meters = 100.0;
    suggested.mu = static_cast<int>(std::max<std::size_t>(2, o.cap_size));
    suggested.psi = static_cast<int>(std::max<std::size_t>(1, o.support * 4 / 5));

    out.manifest = {{"seed", o.seed},
                    {"sensors", n},
                    {"attributes", o.attributes},
                    {"timestamps", T},
                    {"noise", o.noise},
                    {"null_fraction", o.null_fraction},
                    {"start", format_timestamp(o.start)},
                    {"step_seconds", o.step},
                    {"content_hash", ds.content_hash},
                    {"planted_caps", caps},
                    {"suggested_params", params_to_json(suggested)}};
    out.dataset = std::move(ds);
    return out;
}

}  // namespace capmine
