// SPDX-License-Identifier: Apache-2.0

#include "capmine/segmentation.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "capmine/error.hpp"
#include "capmine/ingest.hpp"

namespace capmine {

LineFit fit_line(std::span<const double> values, std::size_t first, std::size_t last) {
    const std::size_t n = last - first + 1;
    LineFit fit;
    fit.segment.start_index = first;
    fit.segment.end_index = last;
    if (n == 1) {
        fit.segment.intercept = values[first];
        return fit;
    }
    const double mean_x = static_cast<double>(n - 1) / 2.0;
    double mean_y = 0.0;
    for (std::size_t i = first; i <= last; ++i) mean_y += values[i];
    mean_y /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
        const double dx = static_cast<double>(i - first) - mean_x;
        sxy += dx * (values[i] - mean_y);
        sxx += dx * dx;
    }
    fit.segment.slope = sxy / sxx;
    fit.segment.intercept = mean_y - fit.segment.slope * mean_x;
    for (std::size_t i = first; i <= last; ++i) {
        const double r = std::fabs(fit.segment.at(i) - values[i]);
        if (r > fit.max_residual) fit.max_residual = r;
    }
    return fit;
}

namespace {

void segment_run(std::span<const double> values, std::size_t first, std::size_t last, double max_error,
                 std::vector<Segment>& out) {
    const std::size_t n = last - first + 1;
    struct Node {
        Segment seg;
        std::size_t prev;
        std::size_t next;
        double merge_cost;  // cost of merging with `next`
        Segment merged;
        bool alive;
    };
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<Node> nodes(n);
    for (std::size_t k = 0; k < n; ++k) {
        nodes[k].seg = Segment{first + k, first + k, 0.0, values[first + k]};
        nodes[k].prev = k == 0 ? kNone : k - 1;
        nodes[k].next = k + 1 == n ? kNone : k + 1;
        nodes[k].alive = true;
    }
    // (cost, start index, node): start indices are unique among live nodes.
    std::set<std::tuple<double, std::size_t, std::size_t>> queue;
    auto refresh = [&](std::size_t k) {
        Node& node = nodes[k];
        if (node.next == kNone) return;
        const auto fit = fit_line(values, node.seg.start_index, nodes[node.next].seg.end_index);
        node.merge_cost = fit.max_residual;
        node.merged = fit.segment;
        queue.emplace(node.merge_cost, node.seg.start_index, k);
    };
    auto forget = [&](std::size_t k) {
        const Node& node = nodes[k];
        if (node.next != kNone) queue.erase({node.merge_cost, node.seg.start_index, k});
    };
    for (std::size_t k = 0; k + 1 < n; ++k) refresh(k);

    while (!queue.empty()) {
        const auto [cost, start, k] = *queue.begin();
        if (!(cost <= max_error)) break;
        queue.erase(queue.begin());
        Node& left = nodes[k];
        const std::size_t r = left.next;
        Node& right = nodes[r];
        forget(r);
        if (left.prev != kNone) forget(left.prev);
        left.seg = left.merged;
        left.next = right.next;
        if (right.next != kNone) nodes[right.next].prev = k;
        right.alive = false;
        refresh(k);
        if (left.prev != kNone) refresh(left.prev);
    }
    for (std::size_t k = 0; k != kNone; k = nodes[k].next) out.push_back(nodes[k].seg);
}

}  // namespace

std::vector<Segment> segment_series(std::span<const double> values, double max_error) {
    if (!(max_error >= 0.0)) throw Error(ErrorCode::InvalidParams, "max_error must be >= 0");
    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < values.size()) {
        if (is_null(values[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < values.size() && !is_null(values[j + 1])) ++j;
        segment_run(values, i, j, max_error, out);
        i = j + 1;
    }
    return out;
}

std::vector<double> reconstruct(std::span<const Segment> segments, std::size_t length) {
    std::vector<double> out(length, kNull);
    std::vector<bool> covered(length, false);
    for (const auto& seg : segments) {
        if (seg.start_index > seg.end_index || seg.end_index >= length) {
            throw Error(ErrorCode::OverlappingSegments, "segment [" + std::to_string(seg.start_index) + ", " +
                                                            std::to_string(seg.end_index) + "] outside series of length " +
                                                            std::to_string(length));
        }
        for (std::size_t i = seg.start_index; i <= seg.end_index; ++i) {
            if (covered[i]) {
                throw Error(ErrorCode::OverlappingSegments, "index " + std::to_string(i) + " covered twice");
            }
            covered[i] = true;
            out[i] = seg.at(i);
        }
    }
    return out;
}

std::vector<Event> extract_events(std::span<const double> values, double epsilon) {
    if (!(epsilon >= 0.0)) throw Error(ErrorCode::NegativeEpsilon, "epsilon must be >= 0");
    std::vector<Event> out;
    for (std::size_t t = 1; t < values.size(); ++t) {
        const double a = values[t - 1];
        const double b = values[t];
        if (is_null(a) || is_null(b)) continue;
        const double delta = b - a;
        if (delta == 0.0) continue;
        if (delta >= epsilon) {
            out.push_back(Event{static_cast<std::uint32_t>(t), Sign::plus});
        } else if (delta <= -epsilon) {
            out.push_back(Event{static_cast<std::uint32_t>(t), Sign::minus});
        }
    }
    return out;
}

}  // namespace capmine
