#pragma once

#include "imageteller/domain.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace imageteller {

struct LibraryEntry {
    StoryId id;
    std::string title;
    std::chrono::system_clock::time_point created_at;
    int chapter_count = 0;
    std::optional<std::string> thumbnail_ref; // file name inside the story directory
};

/// Writes a story directory: story.json plus frame_<k>.<ext> and
/// chapter_<n>.png files. Used by the store and by the CLI output.
void write_story_directory(const Story& story, const std::filesystem::path& dir,
                           std::optional<std::chrono::system_clock::time_point> created_at = std::nullopt);

/// Reads a directory written by write_story_directory.
Story read_story_directory(const std::filesystem::path& dir);

inline constexpr std::string_view kManifestName = "story.json";

struct StoreOptions {
    /// Called at each named commit step ("counter", "files", "manifest",
    /// "commit"); used to inject faults.
    std::function<void(std::string_view)> fault_hook;
};

/// File-backed personal library rooted at one directory:
///   <root>/next_id              next id to hand out (ids are never reused)
///   <root>/stories/<id>/        committed stories
///   <root>/staging/             in-progress writes, removed on open
/// A story becomes visible only through an atomic rename of its fully written
/// staging directory. Any number of readers; writers are serialized per root.
class LibraryStore {
public:
    explicit LibraryStore(std::filesystem::path root, StoreOptions options = {});

    StoryId save_story(const Story& story);
    /// Throws Error(NotFound).
    Story load_story(StoryId id) const;
    /// Newest first.
    std::vector<LibraryEntry> list_stories() const;
    /// Throws Error(NotFound).
    void delete_story(StoryId id);
    /// Saves a story directory produced elsewhere (e.g. by the CLI).
    StoryId import_story(const std::filesystem::path& dir);

    bool contains(StoryId id) const;
    /// Bytes of one file of a committed story; nullopt if absent.
    std::optional<Bytes> read_file(StoryId id, std::string_view file_name) const;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path story_dir(StoryId id) const;
    StoryId allocate_id();
    void fault(std::string_view point) const;

    std::filesystem::path root_;
    StoreOptions options_;
    std::shared_ptr<std::mutex> write_mutex_;
};

} // namespace imageteller
