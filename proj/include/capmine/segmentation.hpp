// SPDX-License-Identifier: Apache-2.0

// Piecewise-linear smoothing and evolving-event extraction.
//
// Value arrays use kNull (NaN) for missing cells. Null cells split a series
// into runs that are segmented independently.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace capmine {

enum class Sign : char { plus = '+', minus = '-', any = '*' };

struct Segment {
    std::size_t start_index = 0;
    std::size_t end_index = 0;  // inclusive
    double slope = 0.0;         // value units per grid step
    double intercept = 0.0;     // fitted value at start_index

    [[nodiscard]] double at(std::size_t index) const noexcept {
        return intercept + slope * static_cast<double>(index - start_index);
    }
    bool operator==(const Segment&) const = default;
};

/// Bottom-up merge: starts from single-point segments and repeatedly merges
/// the adjacent pair whose least-squares line has the smallest maximum
/// absolute residual, while that residual stays <= max_error. Ties go to the
/// pair with the lower start index. The residual is evaluated with
/// Segment::at, so reconstruct() honours the bound exactly.
std::vector<Segment> segment_series(std::span<const double> values, double max_error);

/// Least-squares line over values[first..last] (all non-null) together with
/// its maximum absolute residual.
struct LineFit {
    Segment segment;
    double max_residual = 0.0;
};
LineFit fit_line(std::span<const double> values, std::size_t first, std::size_t last);

std::vector<double> reconstruct(std::span<const Segment> segments, std::size_t length);

struct Event {
    std::uint32_t index = 0;
    Sign sign = Sign::plus;
    bool operator==(const Event&) const = default;
};

/// (t, +) when values[t] - values[t-1] >= epsilon, (t, -) when <= -epsilon;
/// nothing when either side is null. A zero delta is never an event.
std::vector<Event> extract_events(std::span<const double> values, double epsilon);

}  // namespace capmine
