#pragma once

#include "imageteller/domain.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace imageteller {

struct ParseError {
    ErrorCode code; // NoTitle, NoChapters or EmptyBody
    std::optional<int> chapter;
    std::string message;
};

/// Result of parsing model output. Exactly one of `story` / `error` is set.
/// `story` carries title, preamble and chapters only; the caller fills in
/// request, descriptions and final prompt.
struct ParseResult {
    std::optional<Story> story;
    std::optional<ParseError> error;
    std::vector<std::string> warnings;
    /// Text that preceded the title header and was skipped.
    std::string skipped_prefix;

    bool ok() const noexcept { return story.has_value(); }
};

/// Splits markdown into a story:
///  - the first "# " line is the title; text before it is skipped, and later
///    "# " lines stay in the surrounding text;
///  - text between the title and the first "## " line is the preamble;
///  - every "## " line starts a chapter. "Chapter <n>: <title>" headers give
///    the number and title; other headers use their position as number and the
///    whole header text as title. If the stated numbers are not strictly
///    increasing, all chapters are renumbered by position.
/// Deeper headers ("###") are body text. CRLF and lone CR become LF. Never
/// throws for any input.
ParseResult parse_story(std::string_view markdown);

/// Emits "# <title>", the preamble, then "## Chapter <n>: <title>" and the body
/// of each chapter, separated by blank lines.
std::string render_story(const Story& story);

/// Parses a single rewritten chapter: the reply must contain exactly one
/// "## " header, followed by a non-empty body. Text before the header is
/// dropped. Throws Error(ParseFailed).
Chapter parse_chapter_reply(std::string_view markdown);

} // namespace imageteller
