#include "imageteller/prompt_engine.hpp"

#include "imageteller/prompt_texts.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <charconv>

namespace imageteller {

namespace pt = prompt_texts;

namespace {

constexpr std::string_view kCaptionSlot = "<caption>";
constexpr std::string_view kGenreNameSlot = "<genre_name>";
constexpr std::string_view kGenreDescriptionSlot = "<genre_description>";
constexpr std::string_view kChapterTextSlot = "<chapter_text>";
constexpr std::string_view kRewriteMarker = "Rewrite only Chapter ";

// A description must stay on its numbered line.
std::string single_line(std::string_view text)
{
    if (text.find_first_of("\r\n") == std::string_view::npos)
        return std::string(text::trim(text));
    return text::collapse_whitespace(text);
}

std::vector<ImageDescription> in_frame_order(std::span<const ImageDescription> descriptions)
{
    std::vector<ImageDescription> sorted(descriptions.begin(), descriptions.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    return sorted;
}

} // namespace

std::string_view to_string(ComponentKind kind) noexcept
{
    switch (kind) {
    case ComponentKind::General: return "general";
    case ComponentKind::StoryDriven: return "story";
    case ComponentKind::DataDriven: return "data";
    case ComponentKind::Genre: return "genre";
    case ComponentKind::Image: return "image";
    }
    return "unknown";
}

std::string build_analysis_prompt(std::optional<std::string_view> caption)
{
    std::string prompt(pt::analysis);
    if (caption) {
        const auto trimmed = text::trim(*caption);
        if (!trimmed.empty()) {
            prompt += ' ';
            prompt += text::replace_all(std::string(pt::caption_clause), kCaptionSlot, trimmed);
        }
    }
    return prompt;
}

std::string_view component_constant(ComponentKind kind)
{
    switch (kind) {
    case ComponentKind::General: return pt::general;
    case ComponentKind::StoryDriven: return pt::story;
    case ComponentKind::DataDriven: return pt::data;
    case ComponentKind::Genre:
    case ComponentKind::Image: break;
    }
    throw Error(ErrorCode::PreconditionViolation,
                "component '" + std::string(to_string(kind)) + "' is a template, not a constant");
}

PromptComponent render_component(ComponentKind kind, const Genre* genre, std::span<const ImageDescription> descriptions)
{
    switch (kind) {
    case ComponentKind::General:
    case ComponentKind::StoryDriven:
    case ComponentKind::DataDriven:
        return {kind, std::string(component_constant(kind))};
    case ComponentKind::Genre: {
        if (!genre || genre->name.empty() || genre->description.empty())
            throw Error(ErrorCode::MissingGenre, "the genre component needs a genre with a name and description");
        // Substitute the description last so text inside it is never treated as a slot.
        auto rendered = text::replace_all(std::string(pt::genre), kGenreNameSlot, genre->name);
        rendered = text::replace_all(std::move(rendered), kGenreDescriptionSlot, genre->description);
        return {kind, std::move(rendered)};
    }
    case ComponentKind::Image: {
        if (descriptions.empty())
            throw Error(ErrorCode::MissingDescriptions, "the image component needs at least one description");
        std::string rendered(pt::image_header);
        int n = 0;
        for (const auto& d : in_frame_order(descriptions)) {
            auto line = single_line(d.text);
            if (line.empty())
                throw Error(ErrorCode::MissingDescriptions, "description for frame " +
                                                               std::to_string(d.frame_index) + " is empty",
                            d.frame_index);
            rendered += '\n';
            rendered += std::to_string(++n);
            rendered += ". ";
            rendered += line;
        }
        return {kind, std::move(rendered)};
    }
    }
    throw Error(ErrorCode::PreconditionViolation, "unknown component kind");
}

std::string compose_final_prompt(const NarrativeKind& kind, std::span<const ImageDescription> descriptions)
{
    if (descriptions.empty())
        throw Error(ErrorCode::MissingDescriptions, "cannot compose a narrative prompt without image descriptions");

    std::vector<PromptComponent> parts;
    parts.push_back(render_component(ComponentKind::General));
    if (std::holds_alternative<DataDriven>(kind)) {
        parts.push_back(render_component(ComponentKind::DataDriven));
    } else {
        parts.push_back(render_component(ComponentKind::StoryDriven));
        if (const auto* g = std::get_if<StoryWithGenre>(&kind))
            parts.push_back(render_component(ComponentKind::Genre, &g->genre));
    }
    const auto image = render_component(ComponentKind::Image, nullptr, descriptions);

    std::string prompt;
    for (const auto& part : parts) {
        if (!prompt.empty())
            prompt += ' ';
        prompt += part.text;
    }
    prompt += "\n\n";
    prompt += image.text;
    return prompt;
}

std::string build_event_prompt(std::string_view chapter_body)
{
    if (text::trim(chapter_body).empty())
        throw Error(ErrorCode::EmptyChapter, "chapter body is empty");
    return text::replace_all(std::string(pt::event), kChapterTextSlot, chapter_body);
}

std::optional<std::string_view> chapter_text_from_event_prompt(std::string_view prompt) noexcept
{
    const auto slot = pt::event.find(kChapterTextSlot);
    const auto lead = pt::event.substr(0, slot);
    if (prompt.substr(0, lead.size()) != lead)
        return std::nullopt;
    return prompt.substr(lead.size());
}

EventCheck check_event_description(std::string_view text) noexcept
{
    std::size_t words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = text::is_space(c);
        if (!space && !in_word)
            ++words;
        in_word = !space;
    }
    return {words, words <= kMaxEventWords};
}

std::string_view default_style_suffix() noexcept
{
    return pt::style_suffix;
}

std::string_view negative_prompt() noexcept
{
    return pt::negative;
}

std::string build_rewrite_prompt(std::string_view final_prompt, int chapter_number, std::string_view chapter_title,
                                 std::string_view story_markdown)
{
    auto clause = text::replace_all(std::string(pt::rewrite_chapter), "<chapter_number>",
                                    std::to_string(chapter_number));
    clause = text::replace_all(std::move(clause), "<chapter_title>", chapter_title);
    clause = text::replace_all(std::move(clause), "<story_markdown>", story_markdown);
    std::string prompt(final_prompt);
    prompt += "\n\n";
    prompt += clause;
    return prompt;
}

std::optional<int> rewrite_target(std::string_view prompt) noexcept
{
    const auto lead = pt::rewrite_chapter.substr(0, pt::rewrite_chapter.find(kRewriteMarker));
    const auto at = prompt.find(lead);
    if (at == std::string_view::npos)
        return std::nullopt;
    auto rest = prompt.substr(at + lead.size());
    if (rest.substr(0, kRewriteMarker.size()) != kRewriteMarker)
        return std::nullopt;
    rest.remove_prefix(kRewriteMarker.size());
    int n = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
    if (ec != std::errc{} || ptr == rest.data())
        return std::nullopt;
    return n;
}

std::string build_emphasis_annotation_prompt(std::string_view event_description)
{
    return text::replace_all(std::string(pt::emphasis_annotation), "<event_description>", event_description);
}

} // namespace imageteller
