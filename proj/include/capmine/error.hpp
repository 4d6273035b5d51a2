// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace capmine {

enum class ErrorCode {
    // ingest
    EmptyFile,
    DuplicateAttribute,
    BadHeader,
    BadRow,
    QuotedField,
    UnknownAttribute,
    CoordinateOutOfRange,
    DuplicateSensor,
    BadTimestamp,
    BadValue,
    SingleTimestamp,
    IrregularGrid,
    OrphanRecord,
    ConflictingValue,
    // upload sessions
    MissingChunks,
    ChunkOutOfRange,
    ChunkMisaligned,
    SessionClosed,
    PayloadTooLarge,
    // segmentation / spatial / miner
    OverlappingSegments,
    NegativeEpsilon,
    NegativeEta,
    UnknownSensor,
    InvalidParams,
    TooLarge,
    // store
    NotFound,
    KeyMismatch,
    StorageFull,
    IoFailure,
};

std::string_view code_name(ErrorCode code) noexcept;

/// Every failure surfaced by the library. `file` and `line` are filled in
/// for parse errors so callers can point at the offending input row.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message, std::string file = {}, std::size_t line = 0);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    /// 1-based; 0 when not tied to a line.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string file_;
    std::size_t line_;
    std::string detail_;
};

}  // namespace capmine
