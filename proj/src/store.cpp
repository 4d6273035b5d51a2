// SPDX-License-Identifier: Apache-2.0

#include "capmine/store.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "capmine/error.hpp"
#include "capmine/result_json.hpp"

namespace capmine {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_hex(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

[[noreturn]] void sql_fail(sqlite3* db, int rc, const std::string& what) {
    const auto code = (rc == SQLITE_FULL) ? ErrorCode::StorageFull : ErrorCode::IoFailure;
    throw Error(code, what + ": " + (db != nullptr ? sqlite3_errmsg(db) : sqlite3_errstr(rc)));
}

class Statement {
  public:
    Statement(sqlite3* db, const char* sql) : db_(db) {
        const int rc = sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr);
        if (rc != SQLITE_OK) sql_fail(db, rc, "prepare");
    }
    ~Statement() { sqlite3_finalize(stmt_); }
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;

    Statement& bind(int i, std::string_view text) {
        check(sqlite3_bind_text(stmt_, i, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Statement& bind(int i, std::int64_t v) {
        check(sqlite3_bind_int64(stmt_, i, v));
        return *this;
    }
    Statement& bind_blob(int i, const void* data, std::size_t size) {
        check(sqlite3_bind_blob64(stmt_, i, data, size, SQLITE_TRANSIENT));
        return *this;
    }

    /// True while a row is available.
    bool step() {
        const int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        sql_fail(db_, rc, "step");
    }

    [[nodiscard]] std::string text(int col) const {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
        return p == nullptr ? std::string{} : std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)));
    }
    [[nodiscard]] std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
    [[nodiscard]] std::string_view blob(int col) const {
        const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt_, col));
        return {p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))};
    }

  private:
    void check(int rc) {
        if (rc != SQLITE_OK) sql_fail(db_, rc, "bind");
    }
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    const int rc = sqlite3_exec(db, sql, nullptr, nullptr, &err);
    if (rc != SQLITE_OK) {
        std::string msg = err != nullptr ? err : "";
        sqlite3_free(err);
        throw Error(rc == SQLITE_FULL ? ErrorCode::StorageFull : ErrorCode::IoFailure, msg);
    }
}

class Transaction {
  public:
    explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
    ~Transaction() {
        if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
        exec(db_, "COMMIT");
        done_ = true;
    }

  private:
    sqlite3* db_;
    bool done_ = false;
};

json dataset_meta(const Dataset& d) {
    json sensors = json::array();
    for (const auto& s : d.sensors) sensors.push_back(json::array({s.key.id, s.key.attribute, s.lat, s.lon}));
    return json{{"attributes", d.attributes},
                {"sensors", std::move(sensors)},
                {"grid", {{"start", d.grid.start}, {"step", d.grid.step}, {"count", d.grid.count}}}};
}

Dataset dataset_from_meta(const json& meta, std::string_view values, std::string hash) {
    Dataset d;
    d.attributes = meta.at("attributes").get<std::vector<std::string>>();
    for (const auto& s : meta.at("sensors")) {
        d.sensors.push_back(Sensor{{s.at(0).get<std::string>(), s.at(1).get<std::string>()},
                                   s.at(2).get<double>(), s.at(3).get<double>()});
    }
    const auto& g = meta.at("grid");
    d.grid = TimeGrid{g.at("start").get<EpochSeconds>(), g.at("step").get<std::int64_t>(),
                      g.at("count").get<std::size_t>()};
    const std::size_t cells = d.grid.count * d.sensors.size();
    if (values.size() != cells * sizeof(double)) throw Error(ErrorCode::IoFailure, "truncated dataset blob");
    for (std::size_t i = 0; i < d.sensors.size(); ++i) {
        Series s{d.sensors[i].key, std::vector<double>(d.grid.count)};
        if (d.grid.count > 0) {
            std::memcpy(s.values.data(), values.data() + i * d.grid.count * sizeof(double),
                        d.grid.count * sizeof(double));
        }
        d.series.push_back(std::move(s));
    }
    d.content_hash = std::move(hash);
    return d;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

std::string CacheKey::to_string() const { return dataset_hash + "-" + params_digest; }

std::optional<CacheKey> CacheKey::parse(std::string_view text) {
    const auto dash = text.find('-');
    if (dash == std::string_view::npos) return std::nullopt;
    CacheKey k{std::string(text.substr(0, dash)), std::string(text.substr(dash + 1))};
    if (!is_hex(k.dataset_hash) || !is_hex(k.params_digest)) return std::nullopt;
    return k;
}

CacheKey make_cache_key(const std::string& dataset_hash, const MiningParams& params) {
    return CacheKey{dataset_hash, params_digest(params)};
}

json dataset_to_json(const Dataset& d) {
    json series = json::array();
    for (const auto& s : d.series) {
        json values = json::array();
        for (const double v : s.values) values.push_back(is_null(v) ? json(nullptr) : json(v));
        series.push_back(std::move(values));
    }
    json out = dataset_meta(d);
    out["name"] = d.name;
    out["content_hash"] = d.content_hash;
    out["series"] = std::move(series);
    return out;
}

Dataset dataset_from_json(const json& j) {
    try {
        const std::size_t count = j.at("grid").at("count").get<std::size_t>();
        const auto& series = j.at("series");
        std::string blob;
        blob.reserve(series.size() * count * sizeof(double));
        for (const auto& s : series) {
            if (s.size() != count) throw Error(ErrorCode::IoFailure, "series length does not match grid");
            for (const auto& v : s) {
                const double x = v.is_null() ? kNull : v.get<double>();
                blob.append(reinterpret_cast<const char*>(&x), sizeof x);
            }
        }
        Dataset d = dataset_from_meta(j, blob, j.at("content_hash").get<std::string>());
        d.name = j.value("name", std::string{});
        return d;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, std::string("malformed dataset: ") + e.what());
    }
}

struct Store::Db {
    sqlite3* handle = nullptr;
    ~Db() { sqlite3_close_v2(handle); }
};

Store::Store(const fs::path& directory, StoreOptions options) : db_(std::make_unique<Db>()), options_(options) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory.string() + ": " + ec.message());
    const auto path = (directory / "store.db").string();
    const int rc = sqlite3_open_v2(path.c_str(), &db_->handle,
                                   SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr);
    if (rc != SQLITE_OK) sql_fail(db_->handle, rc, "open " + path);
    sqlite3_busy_timeout(db_->handle, 5000);
    exec(db_->handle, "PRAGMA journal_mode=WAL");
    exec(db_->handle, "PRAGMA synchronous=FULL");
    exec(db_->handle,
         "CREATE TABLE IF NOT EXISTS blobs(hash TEXT PRIMARY KEY, meta TEXT NOT NULL, vals BLOB NOT NULL);"
         "CREATE TABLE IF NOT EXISTS datasets(name TEXT PRIMARY KEY, hash TEXT NOT NULL, created_at TEXT NOT NULL,"
         " sensor_count INTEGER NOT NULL);"
         "CREATE TABLE IF NOT EXISTS cache(dataset_hash TEXT NOT NULL, params_digest TEXT NOT NULL,"
         " body TEXT NOT NULL, last_used INTEGER NOT NULL, PRIMARY KEY(dataset_hash, params_digest));");
}

Store::~Store() = default;

void Store::put_blob(const Dataset& d) {
    const std::string meta = dataset_meta(d).dump();
    std::string values;
    values.reserve(d.series.size() * d.grid.count * sizeof(double));
    for (const auto& s : d.series) {
        values.append(reinterpret_cast<const char*>(s.values.data()), s.values.size() * sizeof(double));
    }
    if (options_.max_bytes != 0) {
        Statement pages(db_->handle, "SELECT page_count * page_size FROM pragma_page_count(), pragma_page_size()");
        pages.step();
        const auto used = static_cast<std::size_t>(pages.integer(0));
        if (used + meta.size() + values.size() > options_.max_bytes) {
            throw Error(ErrorCode::StorageFull, "store limit of " + std::to_string(options_.max_bytes) + " bytes");
        }
    }
    Statement ins(db_->handle, "INSERT OR IGNORE INTO blobs(hash, meta, vals) VALUES(?, ?, ?)");
    ins.bind(1, d.content_hash).bind(2, meta).bind_blob(3, values.data(), values.size());
    ins.step();
}

std::string Store::put_dataset(const std::string& name, const Dataset& dataset) {
    std::lock_guard lock(mutex_);
    Transaction tx(db_->handle);
    put_blob(dataset);
    Statement up(db_->handle,
                 "INSERT OR REPLACE INTO datasets(name, hash, created_at, sensor_count) VALUES(?, ?, ?, ?)");
    up.bind(1, name).bind(2, dataset.content_hash).bind(3, now_iso8601());
    up.bind(4, static_cast<std::int64_t>(dataset.sensors.size()));
    up.step();
    tx.commit();
    return dataset.content_hash;
}

std::optional<StoredDataset> Store::describe_dataset(const std::string& name) const {
    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT name, hash, created_at, sensor_count FROM datasets WHERE name = ?");
    q.bind(1, name);
    if (!q.step()) return std::nullopt;
    return StoredDataset{q.text(0), q.text(1), q.text(2), static_cast<std::size_t>(q.integer(3))};
}

Dataset Store::get_dataset_by_hash(const std::string& content_hash) const {
    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT meta, vals FROM blobs WHERE hash = ?");
    q.bind(1, content_hash);
    if (!q.step()) throw Error(ErrorCode::NotFound, "no dataset with hash " + content_hash);
    try {
        return dataset_from_meta(json::parse(q.text(0)), q.blob(1), content_hash);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoFailure, std::string("corrupt dataset metadata: ") + e.what());
    }
}

Dataset Store::get_dataset(const std::string& name) const {
    const auto info = describe_dataset(name);
    if (!info) throw Error(ErrorCode::NotFound, "no dataset named '" + name + "'");
    Dataset d = get_dataset_by_hash(info->content_hash);
    d.name = name;
    return d;
}

std::vector<StoredDataset> Store::list_datasets() const {
    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT name, hash, created_at, sensor_count FROM datasets ORDER BY name");
    std::vector<StoredDataset> out;
    while (q.step()) out.push_back({q.text(0), q.text(1), q.text(2), static_cast<std::size_t>(q.integer(3))});
    return out;
}

std::optional<std::string> Store::get_cached(const CacheKey& key) const {
    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT body FROM cache WHERE dataset_hash = ? AND params_digest = ?");
    q.bind(1, key.dataset_hash).bind(2, key.params_digest);
    if (!q.step()) return std::nullopt;
    std::string body = q.text(0);
    if (options_.max_cache_entries != 0) {
        Statement touch(db_->handle,
                        "UPDATE cache SET last_used = (SELECT COALESCE(MAX(last_used), 0) + 1 FROM cache)"
                        " WHERE dataset_hash = ? AND params_digest = ?");
        touch.bind(1, key.dataset_hash).bind(2, key.params_digest);
        touch.step();
    }
    return body;
}

void Store::put_cached(const CacheKey& key, const MiningResult& result) {
    if (result.dataset_hash != key.dataset_hash) {
        throw Error(ErrorCode::KeyMismatch,
                    "result for dataset " + result.dataset_hash + " cannot be cached under " + key.dataset_hash);
    }
    put_cached_body(key, serialize_result(result));
}

void Store::put_cached_body(const CacheKey& key, std::string_view body) {
    std::lock_guard lock(mutex_);
    if (options_.max_bytes != 0) {
        Statement pages(db_->handle, "SELECT page_count * page_size FROM pragma_page_count(), pragma_page_size()");
        pages.step();
        if (static_cast<std::size_t>(pages.integer(0)) + body.size() > options_.max_bytes) {
            throw Error(ErrorCode::StorageFull, "store limit of " + std::to_string(options_.max_bytes) + " bytes");
        }
    }
    Transaction tx(db_->handle);
    Statement ins(db_->handle,
                  "INSERT OR IGNORE INTO cache(dataset_hash, params_digest, body, last_used)"
                  " VALUES(?, ?, ?, (SELECT COALESCE(MAX(last_used), 0) + 1 FROM cache))");
    ins.bind(1, key.dataset_hash).bind(2, key.params_digest).bind(3, body);
    ins.step();
    if (options_.max_cache_entries != 0) {
        Statement evict(db_->handle,
                        "DELETE FROM cache WHERE rowid IN (SELECT rowid FROM cache ORDER BY last_used DESC"
                        " LIMIT -1 OFFSET ?)");
        evict.bind(1, static_cast<std::int64_t>(options_.max_cache_entries));
        evict.step();
    }
    tx.commit();
}

std::size_t Store::cache_entry_count() const {
    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT COUNT(*) FROM cache");
    q.step();
    return static_cast<std::size_t>(q.integer(0));
}

void Store::export_to(const fs::path& directory) const {
    std::error_code ec;
    fs::create_directories(directory / "datasets", ec);
    fs::create_directories(directory / "results", ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory.string() + ": " + ec.message());

    json names = json::array();
    for (const auto& d : list_datasets()) {
        names.push_back({{"name", d.name}, {"content_hash", d.content_hash}, {"created_at", d.created_at}});
    }
    write_file(directory / "datasets.json", names.dump(2));

    std::vector<std::string> hashes;
    {
        std::lock_guard lock(mutex_);
        Statement q(db_->handle, "SELECT hash FROM blobs ORDER BY hash");
        while (q.step()) hashes.push_back(q.text(0));
    }
    for (const auto& h : hashes) {
        write_file(directory / "datasets" / (h + ".json"), dataset_to_json(get_dataset_by_hash(h)).dump());
    }

    std::lock_guard lock(mutex_);
    Statement q(db_->handle, "SELECT dataset_hash, params_digest, body FROM cache ORDER BY dataset_hash, params_digest");
    while (q.step()) {
        const CacheKey key{q.text(0), q.text(1)};
        write_file(directory / "results" / (key.to_string() + ".json"), q.text(2));
    }
}

void Store::import_from(const fs::path& directory) {
    if (fs::is_directory(directory / "datasets")) {
        for (const auto& entry : fs::directory_iterator(directory / "datasets")) {
            if (entry.path().extension() != ".json") continue;
            Dataset d;
            try {
                d = dataset_from_json(json::parse(read_file(entry.path())));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::IoFailure, entry.path().string() + ": " + e.what());
            }
            const auto recomputed = compute_content_hash(d);
            if (recomputed != d.content_hash || entry.path().stem() != recomputed) {
                throw Error(ErrorCode::IoFailure, entry.path().string() + ": content hash mismatch");
            }
            std::lock_guard lock(mutex_);
            Transaction tx(db_->handle);
            put_blob(d);
            tx.commit();
        }
    }
    if (fs::exists(directory / "datasets.json")) {
        json names;
        try {
            names = json::parse(read_file(directory / "datasets.json"));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::IoFailure, std::string("datasets.json: ") + e.what());
        }
        std::lock_guard lock(mutex_);
        Transaction tx(db_->handle);
        for (const auto& n : names) {
            const auto hash = n.at("content_hash").get<std::string>();
            Statement meta(db_->handle, "SELECT meta FROM blobs WHERE hash = ?");
            meta.bind(1, hash);
            if (!meta.step()) throw Error(ErrorCode::IoFailure, "datasets.json references missing dataset " + hash);
            const auto sensors = json::parse(meta.text(0)).at("sensors").size();
            Statement up(db_->handle,
                         "INSERT OR REPLACE INTO datasets(name, hash, created_at, sensor_count) VALUES(?, ?, ?, ?)");
            up.bind(1, n.at("name").get<std::string>()).bind(2, hash).bind(3, n.value("created_at", now_iso8601()));
            up.bind(4, static_cast<std::int64_t>(sensors));
            up.step();
        }
        tx.commit();
    }
    if (fs::is_directory(directory / "results")) {
        for (const auto& entry : fs::directory_iterator(directory / "results")) {
            if (entry.path().extension() != ".json") continue;
            const auto key = CacheKey::parse(entry.path().stem().string());
            if (!key) throw Error(ErrorCode::IoFailure, entry.path().string() + ": not a result key");
            put_cached_body(*key, read_file(entry.path()));
        }
    }
}

}  // namespace capmine
