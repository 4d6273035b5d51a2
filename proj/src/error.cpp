// SPDX-License-Identifier: Apache-2.0

#include "capmine/error.hpp"

namespace capmine {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::DuplicateAttribute: return "DuplicateAttribute";
        case ErrorCode::BadHeader: return "BadHeader";
        case ErrorCode::BadRow: return "BadRow";
        case ErrorCode::QuotedField: return "QuotedField";
        case ErrorCode::UnknownAttribute: return "UnknownAttribute";
        case ErrorCode::CoordinateOutOfRange: return "CoordinateOutOfRange";
        case ErrorCode::DuplicateSensor: return "DuplicateSensor";
        case ErrorCode::BadTimestamp: return "BadTimestamp";
        case ErrorCode::BadValue: return "BadValue";
        case ErrorCode::SingleTimestamp: return "SingleTimestamp";
        case ErrorCode::IrregularGrid: return "IrregularGrid";
        case ErrorCode::OrphanRecord: return "OrphanRecord";
        case ErrorCode::ConflictingValue: return "ConflictingValue";
        case ErrorCode::MissingChunks: return "MissingChunks";
        case ErrorCode::ChunkOutOfRange: return "ChunkOutOfRange";
        case ErrorCode::ChunkMisaligned: return "ChunkMisaligned";
        case ErrorCode::SessionClosed: return "SessionClosed";
        case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorCode::OverlappingSegments: return "OverlappingSegments";
        case ErrorCode::NegativeEpsilon: return "NegativeEpsilon";
        case ErrorCode::NegativeEta: return "NegativeEta";
        case ErrorCode::UnknownSensor: return "UnknownSensor";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::StorageFull: return "StorageFull";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& file, std::size_t line) {
    std::string out;
    if (!file.empty()) {
        out += file;
        if (line != 0) out += ":" + std::to_string(line);
        out += ": ";
    } else if (line != 0) {
        out += "line " + std::to_string(line) + ": ";
    }
    out += code_name(code);
    if (!message.empty()) {
        out += ": ";
        out += message;
    }
    return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string file, std::size_t line)
    : std::runtime_error(compose(code, message, file, line)),
      code_(code),
      file_(std::move(file)),
      line_(line),
      detail_(message) {}

}  // namespace capmine
