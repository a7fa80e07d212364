#pragma once

#include "imageteller/domain.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <string>

namespace imageteller {

inline constexpr int kDocumentFormatVersion = 1;

/// How image references are written into a story document.
struct DocumentOptions {
    /// Prepended to every file name, e.g. "/media/stories/12/".
    std::string ref_prefix;
    /// Appends "?v=<hash8>" so a changed image gets a new reference.
    bool versioned_refs = false;
};

/// A story as a JSON manifest plus the image files it references by name.
/// Frames are stored as frame_<k>.<ext>, illustrations as chapter_<n>.png.
struct StoryDocument {
    nlohmann::json manifest;
    std::map<std::string, Bytes> files;
};

StoryDocument to_document(const Story& story, const DocumentOptions& options = {});

/// Resolves an image_ref (query string and ref_prefix already removed) to its bytes.
using FileLoader = std::function<Bytes(const std::string& file_name)>;

/// Inverse of to_document. Throws Error(CorruptDocument) on a malformed
/// manifest; loader exceptions propagate.
Story from_document(const nlohmann::json& manifest, const FileLoader& load_file);

/// File name part of an image_ref: strips any directory prefix and "?v=..." suffix.
std::string ref_file_name(std::string_view image_ref);

std::string frame_file_name(const InputFrame& frame);
std::string chapter_file_name(int chapter_number);

nlohmann::json kind_to_json(const NarrativeKind& kind);
NarrativeKind kind_from_json(const nlohmann::json& j);

/// ISO-8601 UTC with milliseconds, e.g. "2024-05-01T10:20:30.123Z".
std::string format_utc(std::chrono::system_clock::time_point t);
std::chrono::system_clock::time_point parse_utc(std::string_view text);

} // namespace imageteller
