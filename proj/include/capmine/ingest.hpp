// SPDX-License-Identifier: Apache-2.0

// Parsing and assembly of the three-file CSV interchange format:
//
//   data.csv       id,attribute,time,data      (time: YYYY-MM-DD HH:MM:SS, UTC; data: decimal or `null`)
//   location.csv   id,attribute,lat,lon
//   attribute.csv  one attribute name per line, no header
//
// A sensor is identified by the pair (id, attribute); the same id may carry
// several attributes. Measurements are laid out on a uniform time grid with
// missing cells stored as null.

#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capmine/timefmt.hpp"

namespace capmine {

/// Null marker inside value arrays. Non-null values are always finite.
inline constexpr double kNull = std::numeric_limits<double>::quiet_NaN();
inline bool is_null(double v) noexcept { return std::isnan(v); }

inline constexpr std::size_t kDefaultLinesPerChunk = 10000;

struct SensorKey {
    std::string id;
    std::string attribute;

    auto operator<=>(const SensorKey&) const = default;
    bool operator==(const SensorKey&) const = default;
};

struct Sensor {
    SensorKey key;
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const Sensor&) const = default;
};

struct TimeGrid {
    EpochSeconds start = 0;
    std::int64_t step = 1;
    std::size_t count = 0;

    [[nodiscard]] EpochSeconds at(std::size_t index) const noexcept {
        return start + static_cast<EpochSeconds>(index) * step;
    }
    bool operator==(const TimeGrid&) const = default;
};

struct Series {
    SensorKey sensor;
    std::vector<double> values;  // length == grid.count, kNull for missing
};

struct Record {
    std::string id;
    std::string attribute;
    EpochSeconds time = 0;
    double value = kNull;
};

struct DatasetSummary {
    std::string name;
    std::string content_hash;
    std::size_t sensor_count = 0;
    std::size_t attribute_count = 0;
    std::size_t timestamp_count = 0;
};

/// Canonical in-memory dataset. Attributes and sensors are sorted
/// ((id, attribute) order for sensors) and `series[i]` belongs to
/// `sensors[i]`, so equal content always yields an equal object.
struct Dataset {
    std::string name;
    std::vector<std::string> attributes;
    std::vector<Sensor> sensors;
    TimeGrid grid;
    std::vector<Series> series;
    std::string content_hash;

    [[nodiscard]] std::optional<std::size_t> find(const SensorKey& key) const;
    [[nodiscard]] DatasetSummary summary() const;
};

/// Equality of content (name ignored); null cells compare equal.
bool same_content(const Dataset& a, const Dataset& b);

/// Three CSV files as text.
struct DatasetFiles {
    std::string attribute_csv;
    std::string location_csv;
    std::string data_csv;
};

std::vector<std::string> parse_attribute_csv(std::string_view bytes);

std::vector<Sensor> parse_location_csv(std::string_view bytes, std::span<const std::string> attributes);

/// `first_line` is the 1-based file line of the chunk's first line and is
/// only used for diagnostics.
std::vector<Record> parse_data_chunk(std::string_view bytes, bool header_expected, std::size_t first_line = 1);

TimeGrid infer_time_grid(std::span<const Record> records);

Dataset assemble_dataset(std::string name, std::string_view attribute_bytes, std::string_view location_bytes,
                         std::span<const std::string> data_chunks);

/// Splits after every `lines_per_chunk` newline characters; concatenating
/// the result reproduces the input exactly.
std::vector<std::string> chunk_file(std::string_view bytes, std::size_t lines_per_chunk = kDefaultLinesPerChunk);

/// Number of lines, counting a trailing fragment without a newline.
std::size_t count_lines(std::string_view bytes) noexcept;

std::string compute_content_hash(const Dataset& dataset);

/// Writes every grid cell (nulls included) so the output reparses to an
/// equal dataset.
DatasetFiles to_csv(const Dataset& dataset);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

namespace detail {
/// Grid inference from sorted, distinct timestamps.
TimeGrid grid_from_sorted(std::span<const EpochSeconds> distinct_sorted);
}  // namespace detail

}  // namespace capmine
