#include "imageteller/agents.hpp"

#include "imageteller/hashing.hpp"
#include "imageteller/image_codec.hpp"
#include "imageteller/prompt_texts.hpp"
#include "text_util.hpp"

#include <array>

namespace imageteller {

namespace {

// Numbered lines of the image block, in order.
std::vector<std::string_view> described_frames(std::string_view prompt)
{
    std::vector<std::string_view> out;
    const auto header = prompt.find(prompt_texts::image_header);
    if (header == std::string_view::npos)
        return out;
    auto rest = prompt.substr(header + prompt_texts::image_header.size());
    std::size_t expected = 1;
    while (!rest.empty() && rest.front() == '\n') {
        rest.remove_prefix(1);
        const auto end = rest.find('\n');
        const auto line = rest.substr(0, end);
        const auto label = std::to_string(expected) + ". ";
        if (line.substr(0, label.size()) != label)
            break;
        out.push_back(line.substr(label.size()));
        ++expected;
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    }
    return out;
}

std::string first_words(std::string_view text, std::size_t n)
{
    std::string out;
    std::size_t taken = 0;
    for (auto token : text::split_whitespace(text)) {
        if (taken++ == n)
            break;
        if (!out.empty())
            out.push_back(' ');
        out.append(token);
    }
    return out;
}

constexpr std::array<std::string_view, 8> kChapterTitles = {
    "The Arrival", "The Turn", "The Gathering Storm", "The Reckoning",
    "The Crossing", "The Silence", "The Return", "The Last Light",
};

} // namespace

std::size_t count_described_frames(std::string_view prompt) noexcept
{
    try {
        return described_frames(prompt).size();
    } catch (...) {
        return 0;
    }
}

ImageDescription MockVisualAnalyzer::analyze_image(const InputFrame& frame, std::string_view)
{
    std::string subject = "an unlabeled scene";
    if (frame.caption && !text::trim(*frame.caption).empty())
        subject = std::string(text::trim(*frame.caption));
    return {frame.index, "Frame " + std::to_string(frame.index) + ": " + subject +
                             " \u2014 deterministic description " + hash8(frame.image_data) + "."};
}

std::string MockStorywriter::generate_narrative(std::string_view prompt)
{
    const auto tag = hash8(prompt);
    if (const auto target = rewrite_target(prompt)) {
        return "## Chapter " + std::to_string(*target) + ": Revised Scene " + tag + "\n\n" +
               "A revised telling of chapter " + std::to_string(*target) + " (" + tag +
               ") keeps the thread of the story while a knight in a silver cloak climbs the tower at dusk.\n";
    }

    const auto frames = described_frames(prompt);
    const std::size_t chapters = std::max<std::size_t>(2, frames.size());
    std::string out = "# Mock Story " + tag + "\n";
    for (std::size_t k = 0; k < chapters; ++k) {
        out += "\n## Chapter " + std::to_string(k + 1) + ": " + std::string(kChapterTitles[k % kChapterTitles.size()]) +
               "\n\n";
        out += "Chapter " + std::to_string(k + 1) + " of mock story " + tag + " follows frame " +
               std::to_string(frames.empty() ? 1 : k % frames.size() + 1) + ".";
        if (!frames.empty())
            out += " " + first_words(frames[k % frames.size()], 24);
        out += " A traveller in a red dress crosses the great hall of the castle while Galehaut watches from the "
               "shadows.\n";
    }
    return out;
}

std::string MockEventSummarizer::summarize_event(std::string_view prompt)
{
    const auto chapter = chapter_text_from_event_prompt(prompt);
    const auto summary = chapter ? first_words(*chapter, kWords) : std::string{};
    if (summary.empty())
        throw Error(ErrorCode::AgentBadResponse, "no chapter text found in the event prompt");
    return summary;
}

Bytes MockIllustrator::generate_image(const IllustrationSpec& spec, const ImageJobParams& params)
{
    params.validate();
    const auto digest = sha256_hex(spec.positive);
    const Rgb color = {static_cast<std::uint8_t>(std::stoi(digest.substr(0, 2), nullptr, 16)),
                       static_cast<std::uint8_t>(std::stoi(digest.substr(2, 2), nullptr, 16)),
                       static_cast<std::uint8_t>(std::stoi(digest.substr(4, 2), nullptr, 16))};
    return render_placeholder_png(static_cast<std::uint32_t>(params.width), static_cast<std::uint32_t>(params.height),
                                  color, std::to_string(params.seed));
}

} // namespace imageteller
