// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capmine/ingest.hpp"

namespace capmine {

enum class FileKind { data, location, attribute };

std::string_view file_kind_name(FileKind kind) noexcept;
std::optional<FileKind> parse_file_kind(std::string_view name) noexcept;

enum class SessionState { open, committed, aborted };

std::string_view session_state_name(SessionState state) noexcept;

struct ChunkRef {
    FileKind file;
    std::size_t seq;
    bool operator==(const ChunkRef&) const = default;
};

/// Collects the chunks of one dataset upload. Sequence numbers are 0-based
/// per file; every chunk but the last of a file must hold exactly
/// `lines_per_chunk` newline-terminated lines. Not thread-safe: callers
/// serialize access per session.
class UploadSession {
  public:
    struct Limits {
        std::size_t lines_per_chunk = kDefaultLinesPerChunk;
        std::size_t max_bytes = 0;  // 0 = unlimited
    };

    UploadSession(std::string dataset_name, std::map<FileKind, std::size_t> expected_chunks, Limits limits);

    /// Re-sending a sequence number replaces the earlier copy.
    void add_chunk(FileKind file, std::size_t seq, std::string bytes);

    [[nodiscard]] std::vector<ChunkRef> missing() const;

    /// Assembles the dataset. Fails with MissingChunks while any chunk is
    /// absent; a failed parse leaves the session open.
    Dataset commit();

    void abort() noexcept { state_ = SessionState::aborted; }

    [[nodiscard]] SessionState state() const noexcept { return state_; }
    [[nodiscard]] const std::string& dataset_name() const noexcept { return name_; }
    [[nodiscard]] const std::map<FileKind, std::size_t>& expected() const noexcept { return expected_; }
    [[nodiscard]] std::size_t received_count() const noexcept { return chunks_.size(); }
    [[nodiscard]] std::size_t received_bytes() const noexcept { return bytes_; }
    [[nodiscard]] const Limits& limits() const noexcept { return limits_; }

  private:
    std::string name_;
    std::map<FileKind, std::size_t> expected_;
    Limits limits_;
    std::map<std::pair<FileKind, std::size_t>, std::string> chunks_;
    std::size_t bytes_ = 0;
    SessionState state_ = SessionState::open;
};

}  // namespace capmine
