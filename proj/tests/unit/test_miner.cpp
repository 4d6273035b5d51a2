// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <random>
#include <set>
#include <vector>

#include "capmine/error.hpp"
#include "capmine/miner.hpp"
#include "capmine/result_json.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace capmine;
using testing::make_dataset;

namespace {

// A series whose +1-epsilon events are exactly `up` (rises of 2).
std::vector<double> rising_at(std::size_t T, const std::vector<std::size_t>& up) {
    std::vector<double> v(T, 0.0);
    double level = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (std::find(up.begin(), up.end(), t) != up.end()) level += 2.0;
        v[t] = level;
    }
    return v;
}

MiningParams basic_params(double eta = 1000.0, int mu = 2, int psi = 3) {
    MiningParams p;
    p.epsilon.absolute.fallback = 1.0;
    p.eta_meters = eta;
    p.mu = mu;
    p.psi = psi;
    return p;
}

Dataset abc_dataset() {
    return make_dataset({{{"A", "temperature"}, 43.4600, -3.8000},
                         {{"B", "traffic"}, 43.4601, -3.8000},
                         {{"C", "traffic"}, 43.4602, -3.8000}},
                        {rising_at(10, {1, 2, 3, 5}), rising_at(10, {1, 2, 3}), rising_at(10, {2, 9})},
                        {0, 60, 10});
}

bool connected(const ProximityGraph& g, const std::vector<std::uint32_t>& vs) {
    std::set<std::uint32_t> seen{vs[0]};
    std::vector<std::uint32_t> stack{vs[0]};
    while (!stack.empty()) {
        const auto v = stack.back();
        stack.pop_back();
        for (auto u : vs)
            if (!seen.count(u) && g.adjacent(u, v)) {
                seen.insert(u);
                stack.push_back(u);
            }
    }
    return seen.size() == vs.size();
}

}  // namespace

TEST_SUITE("miner") {
    TEST_CASE("coevolution support") {
        EventSet ev{{{1, Sign::plus}, {2, Sign::plus}, {3, Sign::plus}, {5, Sign::plus}},
                    {{1, Sign::plus}, {2, Sign::plus}, {3, Sign::plus}},
                    {{1, Sign::minus}, {4, Sign::plus}}};
        const std::vector<MemberRef> one{{0, Sign::plus}};
        CHECK(coevolution_support(ev, one, DirectionMode::signed_mode).co_timestamps ==
              std::vector<std::uint32_t>{1, 2, 3, 5});
        const std::vector<MemberRef> ab{{0, Sign::plus}, {1, Sign::plus}};
        const auto s = coevolution_support(ev, ab, DirectionMode::signed_mode);
        CHECK(s.count == 3);
        CHECK(s.co_timestamps == std::vector<std::uint32_t>{1, 2, 3});
        const std::vector<MemberRef> ac{{0, Sign::plus}, {2, Sign::plus}};
        CHECK(coevolution_support(ev, ac, DirectionMode::signed_mode).count == 0);
        CHECK(coevolution_support(ev, ac, DirectionMode::unsigned_mode).count == 1);
        const std::vector<MemberRef> bad{{7, Sign::plus}};
        try {
            coevolution_support(ev, bad, DirectionMode::signed_mode);
            FAIL("expected UnknownSensor");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnknownSensor);
        }
    }

    TEST_CASE("three-sensor example gives exactly one cap") {
        const Dataset d = abc_dataset();
        const auto r = mine(d, basic_params());
        REQUIRE(r.caps.size() == 1);
        const Cap& c = r.caps[0];
        CHECK(c.members == std::vector<CapMember>{{{"A", "temperature"}, Sign::plus}, {{"B", "traffic"}, Sign::plus}});
        CHECK(c.attributes == std::vector<std::string>{"temperature", "traffic"});
        CHECK(c.support == 3);
        CHECK(c.co_timestamps == std::vector<std::uint32_t>{1, 2, 3});
        CHECK(r.stats.caps == 1);
        CHECK(r.stats.sensors == 3);
        CHECK(r.stats.events == 9);
        CHECK(r.stats.edges == 3);
        CHECK(r.stats.components == 1);
        CHECK(r.dataset_hash == d.content_hash);
        CHECK(brute_force_mine(d, basic_params()).caps == r.caps);
    }

    TEST_CASE("degenerate inputs") {
        const Dataset d = abc_dataset();
        // Unreachable support.
        const auto g = build_proximity_graph(d.sensors, 1000.0);
        const auto ev = compute_events(d, basic_params());
        const auto comp = connected_components(g);
        CHECK(enumerate_caps(g, ev, basic_params(1000.0, 2, 10), comp.components[0]).empty());
        CHECK_THROWS_AS(mine(d, basic_params(1000.0, 2, 10)), Error);

        // One attribute with distinct attributes.
        const Dataset mono = make_dataset({{{"A", "x"}, 0, 0}, {{"B", "x"}, 0, 0}},
                                          {rising_at(10, {1, 2, 3}), rising_at(10, {1, 2, 3})}, {0, 60, 10});
        CHECK(mine(mono, basic_params(10.0, 3, 1)).caps.empty());
        auto repeated = basic_params(10.0, 3, 1);
        repeated.distinct_attributes = false;
        CHECK(mine(mono, repeated).caps.empty());  // still a single attribute

        // No edges.
        CHECK(mine(d, basic_params(0.0)).caps.empty());

        // Empty dataset.
        const Dataset empty = make_dataset({}, {}, {0, 1, 0});
        const auto r = mine(empty, basic_params());
        CHECK(r.caps.empty());
        CHECK(r.stats == MiningStats{});
    }

    TEST_CASE("allowing repeated attributes") {
        const Dataset d = abc_dataset();
        auto p = basic_params(1000.0, 2, 1);
        p.distinct_attributes = false;
        const auto r = mine(d, p);
        CHECK(testing::contains_members(
            r.caps, {{{"A", "temperature"}, Sign::plus}, {{"B", "traffic"}, Sign::plus}, {{"C", "traffic"}, Sign::plus}}));
        for (const auto& c : r.caps) CHECK(c.attributes.size() == 2);
        CHECK(brute_force_mine(d, p).caps == r.caps);
    }

    TEST_CASE("unsigned members carry the any sign") {
        const Dataset d = abc_dataset();
        auto p = basic_params();
        p.direction = DirectionMode::unsigned_mode;
        const auto r = mine(d, p);
        REQUIRE(r.caps.size() == 1);
        for (const auto& m : r.caps[0].members) CHECK(m.sign == Sign::any);
    }

    TEST_CASE("invariants on random instances") {
        std::mt19937_64 rng(21);
        for (int it = 0; it < 40; ++it) {
            const auto inst = testing::random_instance(rng);
            const auto& d = inst.dataset;
            const auto& p = inst.params;
            const MiningResult r = mine(d, p);
            const auto g = build_proximity_graph(d.sensors, p.eta_meters);
            const auto events = compute_events(d, p);

            std::set<std::vector<CapMember>> seen;
            for (const auto& c : r.caps) {
                CHECK(seen.insert(c.members).second);
                CHECK(c.members.size() >= 2);
                CHECK(c.support >= static_cast<std::size_t>(p.psi));
                CHECK(c.support == c.co_timestamps.size());
                CHECK(c.attributes.size() >= 2);
                CHECK(c.attributes.size() <= static_cast<std::size_t>(p.mu));
                std::vector<std::uint32_t> vs;
                std::vector<MemberRef> refs;
                std::set<std::string> attrs;
                for (const auto& m : c.members) {
                    const auto idx = d.find(m.sensor);
                    REQUIRE(idx);
                    vs.push_back(static_cast<std::uint32_t>(*idx));
                    refs.push_back({static_cast<std::uint32_t>(*idx), m.sign});
                    attrs.insert(m.sensor.attribute);
                }
                if (p.distinct_attributes) CHECK(attrs.size() == c.members.size());
                CHECK(connected(g, vs));
                CHECK(coevolution_support(events, refs, p.direction).co_timestamps == c.co_timestamps);
                // Every non-empty subset supports at least as many timestamps.
                for (std::uint32_t mask = 1; mask < (1u << refs.size()); ++mask) {
                    std::vector<MemberRef> sub;
                    for (std::size_t i = 0; i < refs.size(); ++i)
                        if (mask & (1u << i)) sub.push_back(refs[i]);
                    CHECK(coevolution_support(events, sub, p.direction).count >= c.support);
                }
            }
            for (std::size_t i = 1; i < r.caps.size(); ++i) {
                const auto& a = r.caps[i - 1];
                const auto& b = r.caps[i];
                CHECK((a.support > b.support || (a.support == b.support && a.members < b.members)));
            }
        }
    }

    TEST_CASE("each connected set is visited once") {
        std::mt19937_64 rng(22);
        for (int it = 0; it < 30; ++it) {
            auto inst = testing::random_instance(rng);
            inst.params.psi = 1;
            inst.params.mu = 3;
            const auto& d = inst.dataset;
            const auto g = build_proximity_graph(d.sensors, inst.params.eta_meters);
            const auto events = compute_events(d, inst.params);
            std::map<std::pair<std::vector<std::uint32_t>, std::vector<Sign>>, int> visits;
            EnumerationHooks hooks;
            hooks.on_visit = [&](std::span<const std::uint32_t> vs, std::span<const Sign> signs) {
                std::vector<std::pair<std::uint32_t, Sign>> pairs;
                for (std::size_t i = 0; i < vs.size(); ++i) pairs.push_back({vs[i], signs[i]});
                std::sort(pairs.begin(), pairs.end());
                CHECK(pairs.front().first == vs[0]);  // rooted at the minimum vertex
                std::vector<std::uint32_t> key;
                std::vector<Sign> sk;
                for (auto& [v, s] : pairs) {
                    key.push_back(v);
                    sk.push_back(s);
                }
                ++visits[{key, sk}];
            };
            for (const auto& comp : connected_components(g).components) enumerate_caps(g, events, inst.params, comp, hooks);
            for (const auto& [k, n] : visits) CHECK(n == 1);
        }
    }

    TEST_CASE("thread count does not change the result") {
        std::mt19937_64 rng(23);
        for (int it = 0; it < 10; ++it) {
            const auto inst = testing::random_instance(rng);
            MineOptions one;
            one.threads = 1;
            MineOptions many;
            many.threads = 4;
            std::size_t last_total = 0, calls = 0;
            many.on_progress = [&](std::size_t, std::size_t total) {
                last_total = total;
                ++calls;
            };
            const auto a = serialize_result(mine(inst.dataset, inst.params, one));
            const auto b = serialize_result(mine(inst.dataset, inst.params, many));
            CHECK(a == b);
            CHECK(calls == last_total);
        }
    }

    TEST_CASE("maximal filter") {
        const CapMember a{{"a", "x"}, Sign::plus}, b{{"b", "y"}, Sign::plus}, c{{"c", "z"}, Sign::minus};
        std::vector<Cap> caps{{{a, b}, {"x", "y"}, 5, {}}, {{a, b, c}, {"x", "y", "z"}, 3, {}}, {{b, c}, {"y", "z"}, 4, {}},
                              {{a, c}, {"x", "z"}, 3, {}}};
        const auto m = filter_maximal(caps);
        REQUIRE(m.size() == 1);
        CHECK(m[0].members.size() == 3);
        const CapMember aneg{{"a", "x"}, Sign::minus};
        std::vector<Cap> signs{{{aneg, b}, {"x", "y"}, 5, {}}, {{a, b, c}, {"x", "y", "z"}, 3, {}}};
        CHECK(filter_maximal(signs).size() == 2);  // a different sign is a different member
    }

    TEST_CASE("brute force guard") {
        std::vector<Sensor> s;
        std::vector<std::vector<double>> v;
        for (int i = 0; i < 17; ++i) {
            s.push_back({{std::to_string(10 + i), "a"}, 0, 0});
            v.push_back({0, 1});
        }
        const Dataset d = make_dataset(s, v, {0, 1, 2});
        CHECK_THROWS_AS(brute_force_mine(d, basic_params(1.0, 2, 1)), Error);
    }

    TEST_CASE("small oracle sweep") {
        std::mt19937_64 rng(24);
        for (int it = 0; it < 40; ++it) {
            auto inst = testing::random_instance(rng, {8, 80});
            if (it % 2) inst.params.maximal = true;
            const auto fast = mine(inst.dataset, inst.params);
            const auto slow = brute_force_mine(inst.dataset, inst.params);
            CHECK(fast.caps == slow.caps);
        }
    }
}
