// SPDX-License-Identifier: Apache-2.0

#include "capmine/result_json.hpp"

#include <algorithm>

#include "capmine/error.hpp"

namespace capmine {

using nlohmann::json;

std::string sign_text(Sign sign) { return std::string(1, static_cast<char>(sign)); }

namespace {

Sign parse_sign(const std::string& s) {
    if (s == "+") return Sign::plus;
    if (s == "-") return Sign::minus;
    if (s == "*") return Sign::any;
    throw Error(ErrorCode::InvalidParams, "bad sign '" + s + "'");
}

}  // namespace

json result_to_json(const MiningResult& r) {
    json caps = json::array();
    for (const auto& cap : r.caps) {
        json members = json::array();
        for (const auto& m : cap.members) {
            members.push_back({{"id", m.sensor.id}, {"attribute", m.sensor.attribute}, {"sign", sign_text(m.sign)}});
        }
        caps.push_back({{"members", std::move(members)}, {"support", cap.support}, {"timestamps", cap.co_timestamps}});
    }
    const auto& s = r.stats;
    return json{
        {"dataset_hash", r.dataset_hash},
        {"params", params_to_json(r.params)},
        {"caps", std::move(caps)},
        {"stats",
         {{"sensors", s.sensors},
          {"attributes", s.attributes},
          {"timestamps", s.timestamps},
          {"events", s.events},
          {"edges", s.edges},
          {"components", s.components},
          {"nodes_visited", s.nodes_visited},
          {"caps", s.caps}}},
    };
}

std::string serialize_result(const MiningResult& result) { return result_to_json(result).dump(); }

MiningResult result_from_json(const json& j) {
    try {
        MiningResult r;
        r.dataset_hash = j.at("dataset_hash").get<std::string>();
        r.params = params_from_json(j.at("params"));
        for (const auto& c : j.at("caps")) {
            Cap cap;
            std::vector<std::string> attrs;
            for (const auto& m : c.at("members")) {
                cap.members.push_back(CapMember{{m.at("id").get<std::string>(), m.at("attribute").get<std::string>()},
                                                parse_sign(m.at("sign").get<std::string>())});
                attrs.push_back(cap.members.back().sensor.attribute);
            }
            std::sort(attrs.begin(), attrs.end());
            attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
            cap.attributes = std::move(attrs);
            cap.support = c.at("support").get<std::size_t>();
            cap.co_timestamps = c.at("timestamps").get<std::vector<std::uint32_t>>();
            r.caps.push_back(std::move(cap));
        }
        const auto& s = j.at("stats");
        r.stats.sensors = s.value("sensors", std::size_t{0});
        r.stats.attributes = s.value("attributes", std::size_t{0});
        r.stats.timestamps = s.value("timestamps", std::size_t{0});
        r.stats.events = s.value("events", std::size_t{0});
        r.stats.edges = s.value("edges", std::size_t{0});
        r.stats.components = s.value("components", std::size_t{0});
        r.stats.nodes_visited = s.value("nodes_visited", std::size_t{0});
        r.stats.caps = s.value("caps", std::size_t{0});
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, std::string("malformed mining result: ") + e.what());
    }
}

json result_to_geojson(const MiningResult& r, const Dataset& dataset) {
    json features = json::array();
    for (std::size_t i = 0; i < r.caps.size(); ++i) {
        const auto& cap = r.caps[i];
        for (const auto& m : cap.members) {
            const auto idx = dataset.find(m.sensor);
            if (!idx) continue;
            const auto& s = dataset.sensors[*idx];
            features.push_back({
                {"type", "Feature"},
                {"geometry", {{"type", "Point"}, {"coordinates", {s.lon, s.lat}}}},
                {"properties",
                 {{"cap", i}, {"id", m.sensor.id}, {"attribute", m.sensor.attribute}, {"sign", sign_text(m.sign)},
                  {"support", cap.support}}},
            });
        }
    }
    return json{{"type", "FeatureCollection"}, {"dataset_hash", r.dataset_hash}, {"features", std::move(features)}};
}

}  // namespace capmine
