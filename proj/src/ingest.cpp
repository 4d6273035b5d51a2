// SPDX-License-Identifier: Apache-2.0

#include "capmine/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "capmine/digest.hpp"
#include "capmine/error.hpp"

namespace capmine {

namespace {

constexpr std::string_view kDataHeader = "id,attribute,time,data";
constexpr std::string_view kLocationHeader = "id,attribute,lat,lon";
constexpr std::size_t kMaxGridCount = 10'000'000;
// Total sensors x grid cells, about 2 GiB of doubles.
constexpr std::size_t kMaxDatasetCells = 256'000'000;

/// Iterates lines with their 1-based numbers. Strips a trailing CR and a
/// leading UTF-8 BOM on the first line.
class LineCursor {
  public:
    LineCursor(std::string_view bytes, std::size_t first_line) : rest_(bytes), next_line_(first_line) {
        if (rest_.starts_with("\xEF\xBB\xBF")) rest_.remove_prefix(3);
    }

    bool next(std::string_view& line, std::size_t& number) {
        if (rest_.empty()) return false;
        const auto nl = rest_.find('\n');
        if (nl == std::string_view::npos) {
            line = rest_;
            rest_ = {};
        } else {
            line = rest_.substr(0, nl);
            rest_.remove_prefix(nl + 1);
        }
        if (line.ends_with('\r')) line.remove_suffix(1);
        number = next_line_++;
        return true;
    }

  private:
    std::string_view rest_;
    std::size_t next_line_;
};

template <std::size_t N>
void split_fields(std::string_view line, std::array<std::string_view, N>& out, const char* file, std::size_t number) {
    if (line.find('"') != std::string_view::npos) {
        throw Error(ErrorCode::QuotedField, "quoted fields are not supported", file, number);
    }
    std::size_t field = 0;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (field == N) {
            throw Error(ErrorCode::BadRow, "expected " + std::to_string(N) + " fields", file, number);
        }
        if (comma == std::string_view::npos) {
            out[field++] = line.substr(pos);
            break;
        }
        out[field++] = line.substr(pos, comma - pos);
        pos = comma + 1;
    }
    if (field != N) throw Error(ErrorCode::BadRow, "expected " + std::to_string(N) + " fields", file, number);
}

std::optional<double> parse_real(std::string_view text) noexcept {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct RawRecord {
    std::string_view id;
    std::string_view attribute;
    EpochSeconds time;
    double value;
    std::size_t line;
};

template <typename Visit>
void visit_data_chunk(std::string_view bytes, bool header_expected, std::size_t first_line, Visit&& visit) {
    LineCursor cursor(bytes, first_line);
    std::string_view line;
    std::size_t number = 0;
    bool need_header = header_expected;
    std::array<std::string_view, 4> f;
    while (cursor.next(line, number)) {
        if (line.empty()) continue;
        if (need_header) {
            if (line != kDataHeader) {
                throw Error(ErrorCode::BadHeader, "expected header '" + std::string(kDataHeader) + "'", "data.csv",
                            number);
            }
            need_header = false;
            continue;
        }
        split_fields(line, f, "data.csv", number);
        if (f[0].empty() || f[1].empty()) throw Error(ErrorCode::BadRow, "empty id or attribute", "data.csv", number);
        const auto t = parse_timestamp(f[2]);
        if (!t) {
            throw Error(ErrorCode::BadTimestamp, "expected YYYY-MM-DD HH:MM:SS, got '" + std::string(f[2]) + "'",
                        "data.csv", number);
        }
        double value = kNull;
        if (f[3] != "null") {
            const auto v = parse_real(f[3]);
            if (!v) throw Error(ErrorCode::BadValue, "not a number: '" + std::string(f[3]) + "'", "data.csv", number);
            value = *v;
        }
        visit(RawRecord{f[0], f[1], *t, value, number});
    }
    if (need_header) throw Error(ErrorCode::BadHeader, "missing header", "data.csv", first_line);
}

std::string key_string(std::string_view id, std::string_view attribute) {
    std::string k;
    k.reserve(id.size() + attribute.size() + 1);
    k.append(id);
    k.push_back('\x1f');
    k.append(attribute);
    return k;
}

}  // namespace

std::string format_number(double v) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::optional<std::size_t> Dataset::find(const SensorKey& key) const {
    const auto it = std::lower_bound(sensors.begin(), sensors.end(), key,
                                     [](const Sensor& s, const SensorKey& k) { return s.key < k; });
    if (it == sensors.end() || it->key != key) return std::nullopt;
    return static_cast<std::size_t>(it - sensors.begin());
}

DatasetSummary Dataset::summary() const {
    return DatasetSummary{name, content_hash, sensors.size(), attributes.size(), grid.count};
}

bool same_content(const Dataset& a, const Dataset& b) {
    if (a.attributes != b.attributes || a.sensors != b.sensors || !(a.grid == b.grid) ||
        a.series.size() != b.series.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.series.size(); ++i) {
        const auto& x = a.series[i];
        const auto& y = b.series[i];
        if (x.sensor != y.sensor || x.values.size() != y.values.size()) return false;
        for (std::size_t k = 0; k < x.values.size(); ++k) {
            const bool nx = is_null(x.values[k]);
            if (nx != is_null(y.values[k])) return false;
            if (!nx && x.values[k] != y.values[k]) return false;
        }
    }
    return true;
}

std::vector<std::string> parse_attribute_csv(std::string_view bytes) {
    LineCursor cursor(bytes, 1);
    std::string_view line;
    std::size_t number = 0;
    std::vector<std::string> out;
    std::vector<std::string> seen;
    while (cursor.next(line, number)) {
        if (line.empty()) continue;
        if (line.find('"') != std::string_view::npos) {
            throw Error(ErrorCode::QuotedField, "quoted fields are not supported", "attribute.csv", number);
        }
        if (line.find(',') != std::string_view::npos) {
            throw Error(ErrorCode::BadRow, "attribute names cannot contain ','", "attribute.csv", number);
        }
        std::string name(line);
        const auto it = std::lower_bound(seen.begin(), seen.end(), name);
        if (it != seen.end() && *it == name) {
            throw Error(ErrorCode::DuplicateAttribute, "'" + name + "' listed twice", "attribute.csv", number);
        }
        seen.insert(it, name);
        out.push_back(std::move(name));
    }
    if (out.empty()) throw Error(ErrorCode::EmptyFile, "no attributes listed", "attribute.csv");
    return out;
}

std::vector<Sensor> parse_location_csv(std::string_view bytes, std::span<const std::string> attributes) {
    std::vector<std::string> known(attributes.begin(), attributes.end());
    std::sort(known.begin(), known.end());

    LineCursor cursor(bytes, 1);
    std::string_view line;
    std::size_t number = 0;
    bool need_header = true;
    std::vector<Sensor> out;
    std::vector<SensorKey> seen;
    std::array<std::string_view, 4> f;
    while (cursor.next(line, number)) {
        if (line.empty()) continue;
        if (need_header) {
            if (line != kLocationHeader) {
                throw Error(ErrorCode::BadHeader, "expected header '" + std::string(kLocationHeader) + "'",
                            "location.csv", number);
            }
            need_header = false;
            continue;
        }
        split_fields(line, f, "location.csv", number);
        if (f[0].empty() || f[1].empty()) {
            throw Error(ErrorCode::BadRow, "empty id or attribute", "location.csv", number);
        }
        if (!std::binary_search(known.begin(), known.end(), f[1])) {
            throw Error(ErrorCode::UnknownAttribute, "'" + std::string(f[1]) + "' is not in attribute.csv",
                        "location.csv", number);
        }
        const auto lat = parse_real(f[2]);
        const auto lon = parse_real(f[3]);
        if (!lat || !lon) throw Error(ErrorCode::BadValue, "coordinates must be numeric", "location.csv", number);
        if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
            throw Error(ErrorCode::CoordinateOutOfRange,
                        "(" + std::string(f[2]) + ", " + std::string(f[3]) + ") outside [-90,90]x[-180,180]",
                        "location.csv", number);
        }
        SensorKey key{std::string(f[0]), std::string(f[1])};
        const auto it = std::lower_bound(seen.begin(), seen.end(), key);
        if (it != seen.end() && *it == key) {
            throw Error(ErrorCode::DuplicateSensor, "(" + key.id + ", " + key.attribute + ") listed twice",
                        "location.csv", number);
        }
        seen.insert(it, key);
        out.push_back(Sensor{std::move(key), *lat, *lon});
    }
    if (need_header) throw Error(ErrorCode::BadHeader, "missing header", "location.csv", 1);
    return out;
}

std::vector<Record> parse_data_chunk(std::string_view bytes, bool header_expected, std::size_t first_line) {
    std::vector<Record> out;
    visit_data_chunk(bytes, header_expected, first_line, [&](const RawRecord& r) {
        out.push_back(Record{std::string(r.id), std::string(r.attribute), r.time, r.value});
    });
    return out;
}

TimeGrid detail::grid_from_sorted(std::span<const EpochSeconds> ts) {
    if (ts.size() < 2) throw Error(ErrorCode::SingleTimestamp, "at least two distinct timestamps are required");
    std::int64_t step = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) step = std::gcd(step, ts[i] - ts[i - 1]);
    const auto span = ts.back() - ts.front();
    const auto count = static_cast<std::size_t>(span / step) + 1;
    if (count > kMaxGridCount) {
        throw Error(ErrorCode::IrregularGrid, "inferred step of " + std::to_string(step) + " s needs " +
                                                  std::to_string(count) + " grid cells (limit " +
                                                  std::to_string(kMaxGridCount) + ")");
    }
    for (const auto t : ts) {
        if ((t - ts.front()) % step != 0) {
            throw Error(ErrorCode::IrregularGrid, "timestamp " + format_timestamp(t) + " is off the grid");
        }
    }
    return TimeGrid{ts.front(), step, count};
}

TimeGrid infer_time_grid(std::span<const Record> records) {
    std::vector<EpochSeconds> ts;
    ts.reserve(records.size());
    for (const auto& r : records) ts.push_back(r.time);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return detail::grid_from_sorted(ts);
}

Dataset assemble_dataset(std::string name, std::string_view attribute_bytes, std::string_view location_bytes,
                         std::span<const std::string> data_chunks) {
    Dataset ds;
    ds.name = std::move(name);
    ds.attributes = parse_attribute_csv(attribute_bytes);
    ds.sensors = parse_location_csv(location_bytes, ds.attributes);
    std::sort(ds.attributes.begin(), ds.attributes.end());
    std::sort(ds.sensors.begin(), ds.sensors.end(), [](const Sensor& a, const Sensor& b) { return a.key < b.key; });

    std::unordered_map<std::string, std::uint32_t> index;
    index.reserve(ds.sensors.size() * 2);
    for (std::uint32_t i = 0; i < ds.sensors.size(); ++i) {
        index.emplace(key_string(ds.sensors[i].key.id, ds.sensors[i].key.attribute), i);
    }

    struct Cell {
        std::uint32_t sensor;
        EpochSeconds time;
        double value;
        std::size_t line;
    };
    std::vector<Cell> cells;
    std::size_t line = 1;
    std::string probe;
    for (std::size_t c = 0; c < data_chunks.size(); ++c) {
        const std::string& chunk = data_chunks[c];
        visit_data_chunk(chunk, c == 0, line, [&](const RawRecord& r) {
            probe.clear();
            probe.append(r.id);
            probe.push_back('\x1f');
            probe.append(r.attribute);
            const auto it = index.find(probe);
            if (it == index.end()) {
                throw Error(ErrorCode::OrphanRecord,
                            "sensor (" + std::string(r.id) + ", " + std::string(r.attribute) +
                                ") is not in location.csv",
                            "data.csv", r.line);
            }
            cells.push_back(Cell{it->second, r.time, r.value, r.line});
        });
        line += count_lines(chunk);
    }
    if (data_chunks.empty()) throw Error(ErrorCode::BadHeader, "missing header", "data.csv", 1);

    std::vector<EpochSeconds> ts;
    ts.reserve(cells.size());
    for (const auto& cell : cells) ts.push_back(cell.time);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (ts.empty()) {
        ds.grid = TimeGrid{0, 1, 0};
    } else if (ts.size() == 1) {
        ds.grid = TimeGrid{ts.front(), 1, 1};
    } else {
        ds.grid = detail::grid_from_sorted(ts);
    }

    if (!ds.sensors.empty() && ds.grid.count > kMaxDatasetCells / ds.sensors.size()) {
        throw Error(ErrorCode::TooLarge, std::to_string(ds.sensors.size()) + " sensors x " +
                                             std::to_string(ds.grid.count) + " grid cells exceed the limit of " +
                                             std::to_string(kMaxDatasetCells) + " cells");
    }
    ds.series.reserve(ds.sensors.size());
    for (const auto& s : ds.sensors) ds.series.push_back(Series{s.key, std::vector<double>(ds.grid.count, kNull)});
    for (const auto& cell : cells) {
        const auto k = static_cast<std::size_t>((cell.time - ds.grid.start) / ds.grid.step);
        double& slot = ds.series[cell.sensor].values[k];
        if (is_null(cell.value)) continue;
        if (!is_null(slot) && slot != cell.value) {
            const auto& key = ds.sensors[cell.sensor].key;
            throw Error(ErrorCode::ConflictingValue,
                        "(" + key.id + ", " + key.attribute + ") at " + format_timestamp(cell.time) + " has values " +
                            format_number(slot) + " and " + format_number(cell.value),
                        "data.csv", cell.line);
        }
        slot = cell.value;
    }
    ds.content_hash = compute_content_hash(ds);
    return ds;
}

std::vector<std::string> chunk_file(std::string_view bytes, std::size_t lines_per_chunk) {
    if (lines_per_chunk == 0) throw Error(ErrorCode::InvalidParams, "lines_per_chunk must be at least 1");
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t end = pos;
        std::size_t lines = 0;
        while (lines < lines_per_chunk) {
            const auto nl = bytes.find('\n', end);
            if (nl == std::string_view::npos) {
                end = bytes.size();
                break;
            }
            end = nl + 1;
            ++lines;
        }
        out.emplace_back(bytes.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

std::size_t count_lines(std::string_view bytes) noexcept {
    const auto n = static_cast<std::size_t>(std::count(bytes.begin(), bytes.end(), '\n'));
    return (!bytes.empty() && bytes.back() != '\n') ? n + 1 : n;
}

std::string compute_content_hash(const Dataset& ds) {
    Sha256 h;
    std::string buf;
    buf.reserve(1 << 16);
    auto flush = [&] {
        h.update(buf);
        buf.clear();
    };
    buf += "capmine-dataset-v1\nattributes\n";
    for (const auto& a : ds.attributes) {
        buf += a;
        buf += '\n';
    }
    buf += "sensors\n";
    for (const auto& s : ds.sensors) {
        buf += s.key.id + ',' + s.key.attribute + ',' + format_number(s.lat) + ',' + format_number(s.lon) + '\n';
    }
    buf += "grid " + std::to_string(ds.grid.start) + ' ' + std::to_string(ds.grid.step) + ' ' +
           std::to_string(ds.grid.count) + "\ndata\n";
    for (const auto& series : ds.series) {
        for (std::size_t k = 0; k < series.values.size(); ++k) {
            const double v = series.values[k];
            if (is_null(v)) continue;
            buf += series.sensor.id;
            buf += ',';
            buf += series.sensor.attribute;
            buf += ',';
            buf += std::to_string(k);
            buf += ',';
            buf += format_number(v);
            buf += '\n';
            if (buf.size() > (1 << 15)) flush();
        }
    }
    flush();
    return h.hex_digest();
}

DatasetFiles to_csv(const Dataset& ds) {
    DatasetFiles out;
    for (const auto& a : ds.attributes) out.attribute_csv += a + '\n';
    out.location_csv = std::string(kLocationHeader) + '\n';
    for (const auto& s : ds.sensors) {
        out.location_csv +=
            s.key.id + ',' + s.key.attribute + ',' + format_number(s.lat) + ',' + format_number(s.lon) + '\n';
    }
    out.data_csv = std::string(kDataHeader) + '\n';
    std::vector<std::string> times(ds.grid.count);
    for (std::size_t k = 0; k < ds.grid.count; ++k) times[k] = format_timestamp(ds.grid.at(k));
    for (const auto& series : ds.series) {
        for (std::size_t k = 0; k < series.values.size(); ++k) {
            out.data_csv += series.sensor.id;
            out.data_csv += ',';
            out.data_csv += series.sensor.attribute;
            out.data_csv += ',';
            out.data_csv += times[k];
            out.data_csv += ',';
            out.data_csv += is_null(series.values[k]) ? std::string("null") : format_number(series.values[k]);
            out.data_csv += '\n';
        }
    }
    return out;
}

}  // namespace capmine
