// SPDX-License-Identifier: Apache-2.0

#include "capmine/miner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <map>
#include <thread>

#include "capmine/error.hpp"

namespace capmine {

namespace {

using Words = std::vector<std::uint64_t>;

Words to_bits(const std::vector<Event>& events, std::size_t words, Sign which) {
    Words bits(words, 0);
    for (const auto& e : events) {
        if (which == Sign::any || e.sign == which) bits[e.index >> 6] |= std::uint64_t{1} << (e.index & 63);
    }
    return bits;
}

std::size_t popcount(const Words& w) {
    std::size_t n = 0;
    for (const auto x : w) n += static_cast<std::size_t>(std::popcount(x));
    return n;
}

std::vector<std::uint32_t> bit_indices(const Words& w) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::uint64_t x = w[i];
        while (x != 0) {
            out.push_back(static_cast<std::uint32_t>(i * 64 + static_cast<std::size_t>(std::countr_zero(x))));
            x &= x - 1;
        }
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

/// Immutable inputs shared by all search workers.
struct SearchSpace {
    const ProximityGraph& graph;
    const MiningParams& params;
    std::vector<std::uint32_t> attribute_of;  // per vertex, dense ids
    std::vector<std::string> attribute_names;
    std::vector<Words> plus;
    std::vector<Words> minus;
    std::vector<Words> any;
    std::size_t words = 0;

    SearchSpace(const ProximityGraph& g, const EventSet& events, const MiningParams& p, std::size_t timestamps)
        : graph(g), params(p), words((timestamps + 63) / 64) {
        std::map<std::string, std::uint32_t> ids;
        for (const auto& key : g.keys()) ids.emplace(key.attribute, 0);
        for (auto& [name, id] : ids) {
            id = static_cast<std::uint32_t>(attribute_names.size());
            attribute_names.push_back(name);
        }
        attribute_of.reserve(g.size());
        for (const auto& key : g.keys()) attribute_of.push_back(ids.at(key.attribute));
        const bool is_signed = p.direction == DirectionMode::signed_mode;
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (is_signed) {
                plus.push_back(to_bits(events[v], words, Sign::plus));
                minus.push_back(to_bits(events[v], words, Sign::minus));
            } else {
                any.push_back(to_bits(events[v], words, Sign::any));
            }
        }
    }

    [[nodiscard]] const Words& bits(std::uint32_t v, Sign s) const {
        switch (s) {
            case Sign::plus: return plus[v];
            case Sign::minus: return minus[v];
            case Sign::any: break;
        }
        return any[v];
    }
};

/// Depth-first search over the connected vertex sets rooted at one vertex.
///
/// Sets are grown with exclusive-neighbourhood extension: a vertex joins the
/// candidate list only when it is larger than the root and not already in
/// or adjacent to the current set. Every connected set whose minimum vertex
/// is the root is reached along exactly one path, and every node's subtree
/// holds only supersets of it, so the support, mu and distinct-attribute
/// tests can cut whole subtrees.
class RootSearch {
  public:
    RootSearch(const SearchSpace& space, const EnumerationHooks& hooks)
        : space_(space), hooks_(hooks), mark_(space.graph.size(), 0), attr_count_(space.attribute_names.size(), 0) {}

    void run(std::uint32_t root, std::vector<Cap>& out) {
        out_ = &out;
        root_ = root;
        const auto& g = space_.graph;
        ++mark_[root];
        for (const auto u : g.neighbors(root)) ++mark_[u];
        std::vector<std::uint32_t> ext;
        for (const auto u : g.neighbors(root)) {
            if (u > root) ext.push_back(u);
        }
        push_vertex(root);
        for (const Sign s : signs()) {
            const Words& b = space_.bits(root, s);
            if (popcount(b) < static_cast<std::size_t>(space_.params.psi)) continue;
            stack_bits_.resize(1);
            stack_bits_[0] = b;
            signs_.push_back(s);
            visit();
            extend(ext, 1);
            signs_.pop_back();
        }
        pop_vertex();
        --mark_[root];
        for (const auto u : g.neighbors(root)) --mark_[u];
    }

    [[nodiscard]] std::size_t visited() const noexcept { return visited_; }

  private:
    [[nodiscard]] std::span<const Sign> signs() const noexcept {
        static constexpr Sign kSigned[] = {Sign::plus, Sign::minus};
        static constexpr Sign kUnsigned[] = {Sign::any};
        if (space_.params.direction == DirectionMode::signed_mode) return kSigned;
        return kUnsigned;
    }

    void push_vertex(std::uint32_t v) {
        set_.push_back(v);
        if (attr_count_[space_.attribute_of[v]]++ == 0) ++distinct_;
    }

    void pop_vertex() {
        const auto v = set_.back();
        set_.pop_back();
        if (--attr_count_[space_.attribute_of[v]] == 0) --distinct_;
    }

    void visit() {
        ++visited_;
        if (hooks_.on_visit) hooks_.on_visit(set_, signs_);
        if (set_.size() < 2 || distinct_ < 2) return;
        Cap cap;
        const auto& g = space_.graph;
        for (std::size_t i = 0; i < set_.size(); ++i) cap.members.push_back(CapMember{g.key(set_[i]), signs_[i]});
        std::sort(cap.members.begin(), cap.members.end());
        for (std::size_t a = 0; a < attr_count_.size(); ++a) {
            if (attr_count_[a] > 0) cap.attributes.push_back(space_.attribute_names[a]);
        }
        cap.co_timestamps = bit_indices(stack_bits_[set_.size() - 1]);
        cap.support = cap.co_timestamps.size();
        out_->push_back(std::move(cap));
    }

    void extend(std::vector<std::uint32_t> ext, std::size_t depth) {
        const auto& g = space_.graph;
        const auto& p = space_.params;
        const auto psi = static_cast<std::size_t>(p.psi);
        while (!ext.empty()) {
            const auto w = ext.back();
            ext.pop_back();
            const auto a = space_.attribute_of[w];
            if (p.distinct_attributes && attr_count_[a] > 0) continue;
            if (attr_count_[a] == 0 && distinct_ + 1 > static_cast<std::size_t>(p.mu)) continue;

            if (stack_bits_.size() <= depth) stack_bits_.resize(depth + 1);
            std::vector<std::uint32_t> child_ext;
            bool have_child_ext = false;
            for (const Sign s : signs()) {
                const Words& parent = stack_bits_[depth - 1];
                const Words& mine = space_.bits(w, s);
                Words& child = stack_bits_[depth];
                child.resize(parent.size());
                std::size_t count = 0;
                for (std::size_t i = 0; i < parent.size(); ++i) {
                    child[i] = parent[i] & mine[i];
                    count += static_cast<std::size_t>(std::popcount(child[i]));
                }
                if (count < psi) continue;
                if (!have_child_ext) {
                    child_ext = ext;
                    for (const auto u : g.neighbors(w)) {
                        if (u > root_ && mark_[u] == 0) child_ext.push_back(u);
                    }
                    have_child_ext = true;
                }
                ++mark_[w];
                for (const auto u : g.neighbors(w)) ++mark_[u];
                push_vertex(w);
                signs_.push_back(s);
                visit();
                extend(child_ext, depth + 1);
                signs_.pop_back();
                pop_vertex();
                --mark_[w];
                for (const auto u : g.neighbors(w)) --mark_[u];
            }
        }
    }

    const SearchSpace& space_;
    const EnumerationHooks& hooks_;
    std::vector<std::uint32_t> mark_;  // > 0 for vertices in or adjacent to the set
    std::vector<std::size_t> attr_count_;
    std::size_t distinct_ = 0;
    std::vector<std::uint32_t> set_;
    std::vector<Sign> signs_;
    std::vector<Words> stack_bits_;  // shared timestamps at each depth
    std::vector<Cap>* out_ = nullptr;
    std::uint32_t root_ = 0;
    std::size_t visited_ = 0;
};

std::size_t timestamps_spanned(const EventSet& events) {
    std::size_t t = 0;
    for (const auto& list : events) {
        for (const auto& e : list) t = std::max<std::size_t>(t, e.index + 1);
    }
    return t;
}

}  // namespace

EventSet compute_events(const Dataset& dataset, const MiningParams& params) {
    EventSet out(dataset.sensors.size());
    parallel_for(dataset.sensors.size(), 1, [&](std::size_t i) {
        const auto& attribute = dataset.sensors[i].key.attribute;
        const auto& raw = dataset.series[i].values;
        const double max_error = params.max_error.resolve(attribute).value_or(0.0);
        std::vector<double> smoothed;
        std::span<const double> values = raw;
        if (max_error > 0.0) {
            smoothed = reconstruct(segment_series(raw, max_error), raw.size());
            values = smoothed;
        }
        double epsilon = 0.0;
        if (params.epsilon.mode == EpsilonSpec::Mode::relative) {
            double lo = 0.0;
            double hi = 0.0;
            bool any = false;
            for (const double v : raw) {
                if (is_null(v)) continue;
                lo = any ? std::min(lo, v) : v;
                hi = any ? std::max(hi, v) : v;
                any = true;
            }
            epsilon = params.epsilon.relative_fraction * (hi - lo);
        } else {
            const auto e = params.epsilon.absolute.resolve(attribute);
            if (!e) throw Error(ErrorCode::InvalidParams, "epsilon has no value for attribute '" + attribute + "'");
            epsilon = *e;
        }
        out[i] = extract_events(values, epsilon);
    });
    return out;
}

Support coevolution_support(const EventSet& events, std::span<const MemberRef> members, DirectionMode mode) {
    Support out;
    bool first = true;
    for (const auto& m : members) {
        if (m.sensor >= events.size()) {
            throw Error(ErrorCode::UnknownSensor, "sensor index " + std::to_string(m.sensor) + " has no events");
        }
        std::vector<std::uint32_t> mine;
        for (const auto& e : events[m.sensor]) {
            if (mode == DirectionMode::unsigned_mode || e.sign == m.sign) mine.push_back(e.index);
        }
        if (first) {
            out.co_timestamps = std::move(mine);
            first = false;
            continue;
        }
        std::vector<std::uint32_t> both;
        std::set_intersection(out.co_timestamps.begin(), out.co_timestamps.end(), mine.begin(), mine.end(),
                              std::back_inserter(both));
        out.co_timestamps = std::move(both);
    }
    out.count = out.co_timestamps.size();
    return out;
}

void sort_caps(std::vector<Cap>& caps) {
    std::sort(caps.begin(), caps.end(), [](const Cap& a, const Cap& b) {
        if (a.support != b.support) return a.support > b.support;
        return a.members < b.members;
    });
}

std::vector<Cap> filter_maximal(std::vector<Cap> caps) {
    // Candidates for a strict superset of `c` must contain c's first member.
    std::map<CapMember, std::vector<std::size_t>> containing;
    for (std::size_t i = 0; i < caps.size(); ++i) {
        for (const auto& m : caps[i].members) containing[m].push_back(i);
    }
    std::vector<Cap> out;
    for (std::size_t i = 0; i < caps.size(); ++i) {
        const auto& c = caps[i];
        bool dominated = false;
        if (!c.members.empty()) {
            for (const auto j : containing[c.members.front()]) {
                const auto& d = caps[j];
                if (d.members.size() > c.members.size() &&
                    std::includes(d.members.begin(), d.members.end(), c.members.begin(), c.members.end())) {
                    dominated = true;
                    break;
                }
            }
        }
        if (!dominated) out.push_back(c);
    }
    return out;
}

std::vector<Cap> enumerate_caps(const ProximityGraph& graph, const EventSet& events, const MiningParams& params,
                                std::span<const std::uint32_t> component, const EnumerationHooks& hooks) {
    if (events.size() != graph.size()) {
        throw Error(ErrorCode::UnknownSensor, "event set does not cover every graph vertex");
    }
    const SearchSpace space(graph, events, params, timestamps_spanned(events));
    std::vector<Cap> caps;
    RootSearch search(space, hooks);
    for (const auto root : component) search.run(root, caps);
    sort_caps(caps);
    return caps;
}

MiningResult mine(const Dataset& dataset, const MiningParams& params, const MineOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    validate_params(params, &dataset);

    MiningResult result;
    result.dataset_hash = dataset.content_hash;
    result.params = params;
    result.stats.sensors = dataset.sensors.size();
    result.stats.attributes = dataset.attributes.size();
    result.stats.timestamps = dataset.grid.count;

    const EventSet events = compute_events(dataset, params);
    for (const auto& list : events) result.stats.events += list.size();

    const ProximityGraph graph = build_proximity_graph(dataset.sensors, params.eta_meters);
    const ComponentPartition parts = connected_components(graph);
    result.stats.edges = graph.edge_count();
    result.stats.components = parts.components.size();

    const SearchSpace space(graph, events, params, dataset.grid.count);
    const std::size_t n = graph.size();
    std::vector<std::vector<Cap>> per_root(n);
    std::vector<std::size_t> visited(n, 0);
    std::vector<std::atomic<std::size_t>> remaining(parts.components.size());
    for (std::size_t c = 0; c < parts.components.size(); ++c) remaining[c] = parts.components[c].size();
    std::atomic<std::size_t> finished{0};
    const EnumerationHooks no_hooks;

    parallel_for(n, options.threads, [&](std::size_t v) {
        RootSearch search(space, no_hooks);
        search.run(static_cast<std::uint32_t>(v), per_root[v]);
        visited[v] = search.visited();
        if (--remaining[parts.component_of[v]] == 0) {
            const auto done = ++finished;
            if (options.on_progress) options.on_progress(done, parts.components.size());
        }
    });

    for (std::size_t v = 0; v < n; ++v) {
        result.stats.nodes_visited += visited[v];
        for (auto& cap : per_root[v]) result.caps.push_back(std::move(cap));
    }
    if (params.maximal) result.caps = filter_maximal(std::move(result.caps));
    sort_caps(result.caps);
    result.stats.caps = result.caps.size();
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace capmine
