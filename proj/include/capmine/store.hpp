// SPDX-License-Identifier: Apache-2.0

// Durable storage for datasets and cached mining results.
//
// Results are keyed by (dataset content hash, params digest), so a renamed
// but identical upload still hits and a changed upload under an old name can
// never be served results computed on the previous content. Names resolve
// to content hashes one layer up (StoredDataset).

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capmine/ingest.hpp"
#include "capmine/miner.hpp"
#include "json.hpp"

namespace capmine {

struct CacheKey {
    std::string dataset_hash;
    std::string params_digest;

    /// "<dataset_hash>-<params_digest>"
    [[nodiscard]] std::string to_string() const;
    static std::optional<CacheKey> parse(std::string_view text);
    bool operator==(const CacheKey&) const = default;
};

CacheKey make_cache_key(const std::string& dataset_hash, const MiningParams& params);

struct StoredDataset {
    std::string name;
    std::string content_hash;
    std::string created_at;  // ISO-8601 UTC
    std::size_t sensor_count = 0;
};

struct StoreOptions {
    /// 0 = never evict. Otherwise least-recently-used entries beyond the cap
    /// are dropped on insert.
    std::size_t max_cache_entries = 0;
    /// 0 = unlimited. Writes that would grow the database past this fail
    /// with StorageFull.
    std::size_t max_bytes = 0;
};

/// SQLite-backed store in `<directory>/store.db`. Thread-safe; every write
/// is a single transaction, so a put is either fully visible or absent.
class Store {
  public:
    explicit Store(const std::filesystem::path& directory, StoreOptions options = {});
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    /// Replaces any dataset previously stored under the same name.
    std::string put_dataset(const std::string& name, const Dataset& dataset);
    [[nodiscard]] Dataset get_dataset(const std::string& name) const;
    [[nodiscard]] Dataset get_dataset_by_hash(const std::string& content_hash) const;
    [[nodiscard]] std::optional<StoredDataset> describe_dataset(const std::string& name) const;
    /// Sorted by name.
    [[nodiscard]] std::vector<StoredDataset> list_datasets() const;

    /// The serialized MiningResult exactly as stored, or nullopt on a miss.
    [[nodiscard]] std::optional<std::string> get_cached(const CacheKey& key) const;
    /// Requires result.dataset_hash == key.dataset_hash (KeyMismatch).
    /// Idempotent for identical (key, result).
    void put_cached(const CacheKey& key, const MiningResult& result);
    [[nodiscard]] std::size_t cache_entry_count() const;

    /// Writes datasets.json, datasets/<hash>.json and results/<key>.json.
    void export_to(const std::filesystem::path& directory) const;
    void import_from(const std::filesystem::path& directory);

  private:
    void put_cached_body(const CacheKey& key, std::string_view body);
    void put_blob(const Dataset& dataset);

    struct Db;
    std::unique_ptr<Db> db_;
    StoreOptions options_;
    mutable std::mutex mutex_;
};

/// Self-contained JSON form used for export (values as numbers or null).
nlohmann::json dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const nlohmann::json& json);

}  // namespace capmine
