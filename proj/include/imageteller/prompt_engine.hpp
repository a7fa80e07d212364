#pragma once

#include "imageteller/domain.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace imageteller {

// ---------------------------------------------------------------------------
// Narrative prompt system
// ---------------------------------------------------------------------------

enum class ComponentKind { General, StoryDriven, DataDriven, Genre, Image };

std::string_view to_string(ComponentKind kind) noexcept;

struct PromptComponent {
    ComponentKind kind;
    std::string text;
};

/// Image analysis instruction. A caption that is empty after trimming counts
/// as absent; otherwise the caption clause is appended after one space.
std::string build_analysis_prompt(std::optional<std::string_view> caption = std::nullopt);

/// Renders one component of the narrative prompt system.
/// Genre needs `genre`; Image needs at least one description, which are
/// numbered "1. ", "2. ", ... in frame order.
PromptComponent render_component(ComponentKind kind, const Genre* genre = nullptr,
                                 std::span<const ImageDescription> descriptions = {});

/// The three compositions of the final narrative prompt:
///   genre story: general + story + genre + image
///   free story:  general + story + image
///   data-driven: general + data + image
/// Text components are joined with one space; the image block follows a
/// blank line.
std::string compose_final_prompt(const NarrativeKind& kind, std::span<const ImageDescription> descriptions);

/// The verbatim constant text behind a fixed component (General, StoryDriven,
/// DataDriven). Genre and Image are templates and have no constant form.
std::string_view component_constant(ComponentKind kind);

// ---------------------------------------------------------------------------
// Illustration prompts
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxEventWords = 60;

/// Significant-event instruction with the chapter text substituted.
/// Throws Error(EmptyChapter) for an empty or blank body.
std::string build_event_prompt(std::string_view chapter_body);

/// Extracts the chapter text embedded by build_event_prompt, if present.
std::optional<std::string_view> chapter_text_from_event_prompt(std::string_view prompt) noexcept;

struct EventCheck {
    std::size_t word_count = 0;
    bool compliant = true;
};

/// Whitespace-token count against the 60-word limit. Over-limit descriptions
/// are flagged, not rejected.
EventCheck check_event_description(std::string_view text) noexcept;

std::string_view default_style_suffix() noexcept;
std::string_view negative_prompt() noexcept;

/// Instruction asking the storywriter to rewrite one chapter of an existing
/// story: the original final prompt, then the rewrite clause and the full
/// current story.
std::string build_rewrite_prompt(std::string_view final_prompt, int chapter_number, std::string_view chapter_title,
                                 std::string_view story_markdown);

/// Chapter number named by a prompt made with build_rewrite_prompt.
std::optional<int> rewrite_target(std::string_view prompt) noexcept;

/// Instruction for an LLM-backed emphasis annotator.
std::string build_emphasis_annotation_prompt(std::string_view event_description);

// ---------------------------------------------------------------------------
// Emphasis
// ---------------------------------------------------------------------------

/// Byte range [start, end) of the event description wrapped in `level`
/// pairs of parentheses.
struct EmphasisSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    int level = 2;

    bool operator==(const EmphasisSpan&) const = default;
};

struct EmphasisPlan {
    std::vector<EmphasisSpan> spans;

    bool operator==(const EmphasisPlan&) const = default;
};

/// Why a span is unusable for `text`, or nullopt when it is valid on its own.
std::optional<std::string> span_problem(std::string_view text, const EmphasisSpan& span);

/// Throws Error(InvalidSpan) when any span is out of bounds, empty, has a
/// level outside {2,3}, starts or ends on whitespace, splits a word, or
/// overlaps another span.
void validate_plan(std::string_view text, const EmphasisPlan& plan);

std::string apply_emphasis(std::string_view text, const EmphasisPlan& plan);

/// Removes every '(' and ')'.
std::string strip_emphasis(std::string_view text);

/// Source of emphasis proposals. Implementations may return overlapping or
/// otherwise invalid spans; plan_emphasis filters them.
class EmphasisAnnotator {
public:
    virtual ~EmphasisAnnotator() = default;
    virtual std::vector<EmphasisSpan> propose(std::string_view event_description) = 0;
};

/// Deterministic lexicon annotator:
///  - level 3: attire adjective (colour, material or pattern) directly followed
///    by an attire noun, e.g. "red dress";
///  - level 2: scene phrases and nouns from a fixed lexicon, e.g. "face";
///  - level 2: capitalized proper nouns (runs of them merge into one span),
///    skipping function words and honorifics such as "The" or "Sir".
class HeuristicAnnotator final : public EmphasisAnnotator {
public:
    std::vector<EmphasisSpan> propose(std::string_view event_description) override;
};

/// Keeps the valid proposals in text order, longest first at a tie, dropping
/// any that overlap a span already kept.
EmphasisPlan sanitize_proposals(std::string_view text, std::vector<EmphasisSpan> proposals);

/// Asks `annotator` for spans and sanitizes them. Any annotator exception
/// falls back to the heuristic annotator. Throws Error(PreconditionViolation)
/// for an empty description.
EmphasisPlan plan_emphasis(std::string_view event_description, EmphasisAnnotator& annotator);

/// positive = emphasized description + " " + default style; negative = the
/// fixed negative prompt.
IllustrationSpec build_illustration_spec(std::string_view event_description, const EmphasisPlan& plan);

} // namespace imageteller
