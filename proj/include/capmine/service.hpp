// SPDX-License-Identifier: Apache-2.0

// HTTP API over ingest, mining, caching and data access.

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "capmine/store.hpp"

namespace capmine {

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;
    std::filesystem::path data_dir = "capmine-data";
    /// Mining worker threads. 0 picks hardware_concurrency.
    std::size_t workers = 0;
    /// Threads given to each individual mine run. 0 picks hardware_concurrency.
    std::size_t mine_threads = 0;
    /// Datasets with more sensors than this are mined as background jobs
    /// even when the request does not ask for it. 0 disables the switch.
    std::size_t async_threshold = 0;
    std::string cors_origin = "*";
    /// Per upload session. 0 = unlimited.
    std::size_t max_upload_bytes = 0;
    std::size_t lines_per_chunk = kDefaultLinesPerChunk;
    /// Served under / when non-empty (the built web UI).
    std::filesystem::path static_dir;
    StoreOptions store;
    /// Decoded datasets kept in memory.
    std::size_t dataset_cache = 4;
};

/// Reads CAPMINE_PORT, CAPMINE_DATA_DIR, CAPMINE_WORKERS,
/// CAPMINE_ASYNC_THRESHOLD, CAPMINE_CORS_ORIGIN, CAPMINE_MAX_UPLOAD_BYTES
/// and CAPMINE_STATIC_DIR over the given defaults.
ServiceConfig config_from_env(ServiceConfig base = {});

class Service {
  public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds config.port (or any free port when it is 0) and returns the
    /// bound port, or -1.
    int bind();
    /// Serves until stop(). Requires bind().
    bool listen();
    /// bind() + listen().
    bool run();
    void stop();
    /// Blocks until the listener accepts connections.
    void wait_until_ready() const;

    [[nodiscard]] Store& store();
    [[nodiscard]] const ServiceConfig& config() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace capmine
