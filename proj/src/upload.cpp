// SPDX-License-Identifier: Apache-2.0

#include "capmine/upload.hpp"

#include "capmine/error.hpp"

namespace capmine {

std::string_view file_kind_name(FileKind kind) noexcept {
    switch (kind) {
        case FileKind::data: return "data";
        case FileKind::location: return "location";
        case FileKind::attribute: return "attribute";
    }
    return "data";
}

std::optional<FileKind> parse_file_kind(std::string_view name) noexcept {
    if (name == "data" || name == "data.csv") return FileKind::data;
    if (name == "location" || name == "location.csv") return FileKind::location;
    if (name == "attribute" || name == "attribute.csv") return FileKind::attribute;
    return std::nullopt;
}

std::string_view session_state_name(SessionState state) noexcept {
    switch (state) {
        case SessionState::open: return "open";
        case SessionState::committed: return "committed";
        case SessionState::aborted: return "aborted";
    }
    return "open";
}

UploadSession::UploadSession(std::string dataset_name, std::map<FileKind, std::size_t> expected_chunks, Limits limits)
    : name_(std::move(dataset_name)), expected_(std::move(expected_chunks)), limits_(limits) {
    if (limits_.lines_per_chunk == 0) throw Error(ErrorCode::InvalidParams, "lines_per_chunk must be at least 1");
    for (const auto kind : {FileKind::data, FileKind::location, FileKind::attribute}) {
        auto it = expected_.find(kind);
        if (it == expected_.end()) {
            expected_[kind] = 1;
        } else if (it->second == 0) {
            throw Error(ErrorCode::InvalidParams,
                        std::string(file_kind_name(kind)) + " needs at least one chunk");
        }
    }
}

void UploadSession::add_chunk(FileKind file, std::size_t seq, std::string bytes) {
    if (state_ != SessionState::open) {
        throw Error(ErrorCode::SessionClosed, "session for '" + name_ + "' is " +
                                                  std::string(session_state_name(state_)));
    }
    const auto total = expected_.at(file);
    if (seq >= total) {
        throw Error(ErrorCode::ChunkOutOfRange, std::string(file_kind_name(file)) + " chunk " + std::to_string(seq) +
                                                    " outside [0, " + std::to_string(total) + ")");
    }
    const auto key = std::make_pair(file, seq);
    std::size_t replaced = 0;
    if (auto it = chunks_.find(key); it != chunks_.end()) replaced = it->second.size();
    const std::size_t next = bytes_ - replaced + bytes.size();
    if (limits_.max_bytes != 0 && next > limits_.max_bytes) {
        throw Error(ErrorCode::PayloadTooLarge,
                    "upload exceeds " + std::to_string(limits_.max_bytes) + " bytes");
    }
    bytes_ = next;
    chunks_[key] = std::move(bytes);
}

std::vector<ChunkRef> UploadSession::missing() const {
    std::vector<ChunkRef> out;
    for (const auto& [kind, total] : expected_) {
        for (std::size_t seq = 0; seq < total; ++seq) {
            if (!chunks_.contains({kind, seq})) out.push_back(ChunkRef{kind, seq});
        }
    }
    return out;
}

Dataset UploadSession::commit() {
    if (state_ == SessionState::aborted) throw Error(ErrorCode::SessionClosed, "session for '" + name_ + "' was aborted");
    if (const auto gaps = missing(); !gaps.empty()) {
        std::string list;
        for (const auto& g : gaps) {
            if (!list.empty()) list += ", ";
            list += std::string(file_kind_name(g.file)) + "#" + std::to_string(g.seq);
        }
        throw Error(ErrorCode::MissingChunks, "missing " + list);
    }

    auto gather = [&](FileKind kind) {
        std::vector<std::string> parts;
        const auto total = expected_.at(kind);
        for (std::size_t seq = 0; seq < total; ++seq) {
            const std::string& part = chunks_.at({kind, seq});
            if (seq + 1 < total &&
                (count_lines(part) != limits_.lines_per_chunk || part.empty() || part.back() != '\n')) {
                throw Error(ErrorCode::ChunkMisaligned,
                            std::string(file_kind_name(kind)) + " chunk " + std::to_string(seq) + " must hold exactly " +
                                std::to_string(limits_.lines_per_chunk) + " complete lines");
            }
            parts.push_back(part);
        }
        return parts;
    };
    auto join = [](const std::vector<std::string>& parts) {
        std::string out;
        for (const auto& p : parts) out += p;
        return out;
    };

    const auto data = gather(FileKind::data);
    const auto location = join(gather(FileKind::location));
    const auto attribute = join(gather(FileKind::attribute));
    Dataset ds = assemble_dataset(name_, attribute, location, data);
    state_ = SessionState::committed;
    return ds;
}

}  // namespace capmine
