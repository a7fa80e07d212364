#include "imageteller/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

namespace imageteller {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::TooManyFrames: return "TooManyFrames";
    case ErrorCode::BadImageFormat: return "BadImageFormat";
    case ErrorCode::CaptionTooLong: return "CaptionTooLong";
    case ErrorCode::DuplicateFrameIndex: return "DuplicateFrameIndex";
    case ErrorCode::UnknownGenre: return "UnknownGenre";
    case ErrorCode::MissingGenre: return "MissingGenre";
    case ErrorCode::MissingDescriptions: return "MissingDescriptions";
    case ErrorCode::EmptyChapter: return "EmptyChapter";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::AnnotatorFailure: return "AnnotatorFailure";
    case ErrorCode::NoTitle: return "NoTitle";
    case ErrorCode::NoChapters: return "NoChapters";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::AgentTimeout: return "AgentTimeout";
    case ErrorCode::AgentHttpError: return "AgentHTTPError";
    case ErrorCode::AgentBadResponse: return "AgentBadResponse";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::AnalysisFailed: return "AnalysisFailed";
    case ErrorCode::NarrativeFailed: return "NarrativeFailed";
    case ErrorCode::ParseFailed: return "ParseFailed";
    case ErrorCode::ParseFailedAfterRetries: return "ParseFailedAfterRetries";
    case ErrorCode::IllustrationFailed: return "IllustrationFailed";
    case ErrorCode::UnknownChapter: return "UnknownChapter";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::IoFailure: return "IOFailure";
    case ErrorCode::CorruptDocument: return "CorruptDocument";
    }
    return "Unknown";
}

std::string_view to_string(MediaType type) noexcept
{
    switch (type) {
    case MediaType::Png: return "png";
    case MediaType::Jpeg: return "jpeg";
    case MediaType::Webp: return "webp";
    }
    return "png";
}

std::string_view file_extension(MediaType type) noexcept
{
    return type == MediaType::Jpeg ? "jpg" : to_string(type);
}

std::string_view mime_type(MediaType type) noexcept
{
    switch (type) {
    case MediaType::Png: return "image/png";
    case MediaType::Jpeg: return "image/jpeg";
    case MediaType::Webp: return "image/webp";
    }
    return "application/octet-stream";
}

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool starts_with(std::span<const std::uint8_t> data, std::string_view magic, std::size_t offset = 0)
{
    if (data.size() < offset + magic.size())
        return false;
    return std::equal(magic.begin(), magic.end(), data.begin() + static_cast<std::ptrdiff_t>(offset),
                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

} // namespace

std::optional<MediaType> parse_media_type(std::string_view text) noexcept
{
    const auto t = lower(text);
    if (t == "png" || t == "image/png")
        return MediaType::Png;
    if (t == "jpeg" || t == "jpg" || t == "image/jpeg" || t == "image/jpg")
        return MediaType::Jpeg;
    if (t == "webp" || t == "image/webp")
        return MediaType::Webp;
    return std::nullopt;
}

std::optional<MediaType> sniff_media_type(std::span<const std::uint8_t> data) noexcept
{
    if (starts_with(data, "\x89PNG\r\n\x1a\n"))
        return MediaType::Png;
    if (starts_with(data, "\xff\xd8\xff"))
        return MediaType::Jpeg;
    if (starts_with(data, "RIFF") && starts_with(data, "WEBP", 8))
        return MediaType::Webp;
    return std::nullopt;
}

std::string_view kind_name(const NarrativeKind& kind) noexcept
{
    if (std::holds_alternative<StoryWithGenre>(kind))
        return "story-genre";
    if (std::holds_alternative<DataDriven>(kind))
        return "data-driven";
    return "story-free";
}

GenreCatalog::GenreCatalog()
{
    const auto add = [this](std::string name, std::string description) {
        Genre g{name, description};
        entries_.push_back(CatalogEntry{std::move(name), std::move(description), StoryWithGenre{std::move(g)}});
    };
    add("Comedy", "The world is just and strict but finally becomes more free and desirable. The protagonist is "
                  "initially hilariously vain, self-important and aspiring, but at the end conforms to the world's "
                  "norms.");
    add("Romance", "The world is just but momentarily disturbed by the occurrence of a villainy. The protagonist "
                   "performs a heroic adventurous quest.");
    add("Tragedy", "The world is just but governed by fate and unforgiving. The protagonist misbehaves and finally "
                   "succumbs and dies.");
    add("Satire", "The world is not just, it is dystopian, grotesque and absurd. The protagonist is helpless.");
    add("Mystery", "The world is just but has unknown or unexplained or fantastic elements. The protagonist makes a "
                   "discovery.");
    entries_.push_back(CatalogEntry{
        "Data Storytelling",
        "Communicates insights and the connections between data points as an engaging narrative.",
        DataDriven{}});
}

std::vector<Genre> GenreCatalog::genres() const
{
    std::vector<Genre> out;
    for (const auto& e : entries_)
        if (const auto* g = std::get_if<StoryWithGenre>(&e.kind))
            out.push_back(g->genre);
    return out;
}

const CatalogEntry* GenreCatalog::find(std::string_view name) const noexcept
{
    const auto key = lower(name);
    for (const auto& e : entries_)
        if (lower(e.name) == key)
            return &e;
    return nullptr;
}

std::string GenreCatalog::names_joined(std::string_view separator) const
{
    std::string out;
    for (const auto& e : entries_) {
        if (!out.empty())
            out += separator;
        out += e.name;
    }
    return out;
}

const GenreCatalog& genre_catalog()
{
    static const GenreCatalog catalog;
    return catalog;
}

bool is_fundamental_genre(const Genre& genre) noexcept
{
    for (const auto& e : genre_catalog().entries())
        if (const auto* g = std::get_if<StoryWithGenre>(&e.kind); g && g->genre == genre)
            return true;
    return false;
}

std::size_t utf8_length(std::string_view text) noexcept
{
    std::size_t n = 0;
    for (unsigned char c : text)
        if ((c & 0xC0) != 0x80)
            ++n;
    return n;
}

bool ValidationResult::has(ErrorCode code) const noexcept
{
    return std::any_of(violations.begin(), violations.end(), [code](const Violation& v) { return v.code == code; });
}

std::string ValidationResult::summary() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i)
            os << "; ";
        os << to_string(violations[i].code);
        if (violations[i].frame)
            os << "(" << *violations[i].frame << ")";
        os << ": " << violations[i].message;
    }
    return os.str();
}

ValidationResult validate_request(const NarrativeRequest& request, const ValidationLimits& limits)
{
    ValidationResult result;
    auto report = [&](ErrorCode code, std::optional<int> frame, std::string message) {
        result.violations.push_back(Violation{code, frame, std::move(message)});
    };

    if (request.frames.empty())
        report(ErrorCode::EmptySequence, std::nullopt, "the request contains no frames");
    if (request.frames.size() > limits.max_frames)
        report(ErrorCode::TooManyFrames, std::nullopt,
               std::to_string(request.frames.size()) + " frames exceed the limit of " +
                   std::to_string(limits.max_frames));

    if (const auto* g = std::get_if<StoryWithGenre>(&request.kind); g && !is_fundamental_genre(g->genre))
        report(ErrorCode::UnknownGenre, std::nullopt, "genre '" + g->genre.name + "' is not a catalog genre");

    std::set<int> seen;
    for (const auto& frame : request.frames) {
        if (frame.index < 1)
            report(ErrorCode::PreconditionViolation, frame.index, "frame index must be at least 1");
        else if (!seen.insert(frame.index).second)
            report(ErrorCode::DuplicateFrameIndex, frame.index, "frame index is used more than once");

        if (frame.image_data.empty())
            report(ErrorCode::BadImageFormat, frame.index, "image data is empty");
        else if (const auto sniffed = sniff_media_type(frame.image_data); !sniffed)
            report(ErrorCode::BadImageFormat, frame.index, "bytes are not a png, jpeg or webp image");
        else if (*sniffed != frame.media_type)
            report(ErrorCode::BadImageFormat, frame.index,
                   "declared " + std::string(to_string(frame.media_type)) + " but bytes are " +
                       std::string(to_string(*sniffed)));

        if (frame.caption && utf8_length(*frame.caption) > limits.max_caption_chars)
            report(ErrorCode::CaptionTooLong, frame.index,
                   "caption exceeds " + std::to_string(limits.max_caption_chars) + " characters");
    }
    return result;
}

std::string to_string(StoryId id)
{
    return std::to_string(id.value);
}

const Chapter* Story::find_chapter(int number) const noexcept
{
    for (const auto& c : chapters)
        if (c.number == number)
            return &c;
    return nullptr;
}

Chapter* Story::find_chapter(int number) noexcept
{
    for (auto& c : chapters)
        if (c.number == number)
            return &c;
    return nullptr;
}

void check_story_invariants(const Story& story)
{
    auto fail = [](const std::string& what) { throw Error(ErrorCode::PreconditionViolation, what); };
    if (story.chapters.empty())
        fail("story has no chapters");
    int previous = 0;
    for (const auto& c : story.chapters) {
        if (c.number < 1 || c.number <= previous)
            fail("chapter numbers must be positive and strictly increasing");
        if (c.body.empty())
            fail("chapter " + std::to_string(c.number) + " has an empty body");
        previous = c.number;
    }
    for (std::size_t i = 1; i < story.descriptions.size(); ++i)
        if (story.descriptions[i].frame_index <= story.descriptions[i - 1].frame_index)
            fail("descriptions must be ordered by frame index");
}

} // namespace imageteller
