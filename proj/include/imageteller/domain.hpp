#pragma once

#include "imageteller/errors.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace imageteller {

using Bytes = std::vector<std::uint8_t>;

enum class MediaType { Png, Jpeg, Webp };

std::string_view to_string(MediaType type) noexcept;
std::string_view file_extension(MediaType type) noexcept;
std::string_view mime_type(MediaType type) noexcept;
/// Accepts "png", "jpeg"/"jpg", "webp" and the matching image/* MIME types.
std::optional<MediaType> parse_media_type(std::string_view text) noexcept;
/// Identifies the container from its magic number.
std::optional<MediaType> sniff_media_type(std::span<const std::uint8_t> data) noexcept;

struct InputFrame {
    int index = 1; // 1-based position in the sequence
    Bytes image_data;
    MediaType media_type = MediaType::Png;
    std::optional<std::string> caption;

    bool operator==(const InputFrame&) const = default;
};

struct Genre {
    std::string name;
    std::string description;

    bool operator==(const Genre&) const = default;
};

struct StoryWithGenre {
    Genre genre;
    bool operator==(const StoryWithGenre&) const = default;
};
struct StoryFree {
    bool operator==(const StoryFree&) const = default;
};
struct DataDriven {
    bool operator==(const DataDriven&) const = default;
};

using NarrativeKind = std::variant<StoryWithGenre, StoryFree, DataDriven>;

/// "story-genre", "story-free" or "data-driven".
std::string_view kind_name(const NarrativeKind& kind) noexcept;

struct CatalogEntry {
    std::string name;
    std::string description;
    NarrativeKind kind;
};

/// The five fundamental genres followed by the "Data Storytelling" entry the
/// UI offers alongside them. The last entry maps to DataDriven composition and
/// is never rendered as a genre component.
class GenreCatalog {
public:
    GenreCatalog();

    std::span<const CatalogEntry> entries() const noexcept { return entries_; }
    std::vector<Genre> genres() const;
    /// Case-insensitive lookup by name.
    const CatalogEntry* find(std::string_view name) const noexcept;
    std::string names_joined(std::string_view separator = ", ") const;

private:
    std::vector<CatalogEntry> entries_;
};

const GenreCatalog& genre_catalog();

/// True when `genre` is one of the five catalog genres, field for field.
bool is_fundamental_genre(const Genre& genre) noexcept;

struct NarrativeRequest {
    std::vector<InputFrame> frames;
    NarrativeKind kind = StoryFree{};

    bool operator==(const NarrativeRequest&) const = default;
};

struct ValidationLimits {
    std::size_t max_frames = 10;
    std::size_t max_caption_chars = 500;
};

struct Violation {
    ErrorCode code;
    std::optional<int> frame;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
    bool has(ErrorCode code) const noexcept;
    std::string summary() const;
};

/// Reports every problem with the request rather than stopping at the first.
ValidationResult validate_request(const NarrativeRequest& request, const ValidationLimits& limits = {});

/// Number of UTF-8 code points, counted by lead bytes.
std::size_t utf8_length(std::string_view text) noexcept;

struct ImageDescription {
    int frame_index = 1;
    std::string text;

    bool operator==(const ImageDescription&) const = default;
};

struct IllustrationSpec {
    std::string positive;
    std::string negative;

    bool operator==(const IllustrationSpec&) const = default;
};

struct IllustrationRecord {
    std::string event_description;
    IllustrationSpec spec;
    std::optional<Bytes> image_data;
    std::uint64_t seed = 0;

    bool operator==(const IllustrationRecord&) const = default;
};

struct Chapter {
    int number = 1;
    std::string title;
    std::string body;
    std::optional<IllustrationRecord> illustration;

    bool operator==(const Chapter&) const = default;
};

struct StoryId {
    std::uint64_t value = 0;

    auto operator<=>(const StoryId&) const = default;
};

std::string to_string(StoryId id);

struct Story {
    std::optional<StoryId> id;
    std::string title;
    std::optional<std::string> preamble;
    std::vector<Chapter> chapters;
    NarrativeRequest request_snapshot;
    std::vector<ImageDescription> descriptions;
    std::string final_prompt;

    bool operator==(const Story&) const = default;

    const Chapter* find_chapter(int number) const noexcept;
    Chapter* find_chapter(int number) noexcept;
};

/// Checks the structural invariants of a story (non-empty chapters, strictly
/// increasing numbers, non-empty bodies, descriptions ordered by frame).
/// Throws Error(PreconditionViolation) naming the first broken invariant.
void check_story_invariants(const Story& story);

} // namespace imageteller
