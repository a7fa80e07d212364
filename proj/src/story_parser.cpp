#include "imageteller/story_parser.hpp"

#include "text_util.hpp"


namespace imageteller {

namespace {

std::string normalize_newlines(std::string_view in)
{
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != '\r') {
            out.push_back(in[i]);
            continue;
        }
        out.push_back('\n');
        if (i + 1 < in.size() && in[i + 1] == '\n')
            ++i;
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool is_h1(std::string_view line)
{
    return line.substr(0, 2) == "# ";
}

bool is_h2(std::string_view line)
{
    return line.substr(0, 3) == "## ";
}

struct HeaderFields {
    std::optional<int> number;
    std::string title;
};

HeaderFields split_chapter_header(std::string_view header)
{
    const auto h = text::trim(header);
    const auto fallback = HeaderFields{std::nullopt, std::string(h)};
    constexpr std::string_view kWord = "Chapter";
    if (h.substr(0, kWord.size()) != kWord)
        return fallback;
    std::size_t i = kWord.size();
    const auto skip_blanks = [&] {
        const std::size_t from = i;
        while (i < h.size() && (h[i] == ' ' || h[i] == '\t'))
            ++i;
        return i > from;
    };
    if (!skip_blanks())
        return fallback;
    const std::size_t digits_at = i;
    while (i < h.size() && h[i] >= '0' && h[i] <= '9')
        ++i;
    const std::size_t digits = i - digits_at;
    if (digits == 0 || digits > 6)
        return fallback;
    const int number = std::stoi(std::string(h.substr(digits_at, digits)));
    skip_blanks();
    if (i >= h.size() || h[i] != ':')
        return fallback;
    ++i;
    skip_blanks();
    return {number, std::string(h.substr(i))};
}

std::string join_block(const std::vector<std::string_view>& lines)
{
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i)
            out.push_back('\n');
        out.append(lines[i]);
    }
    return std::string(text::trim(out));
}

struct RawChapter {
    std::string header;
    std::vector<std::string_view> body;
};

} // namespace

ParseResult parse_story(std::string_view markdown)
{
    ParseResult result;
    const auto text = normalize_newlines(markdown);
    const auto lines = lines_of(text);

    std::size_t i = 0;
    std::vector<std::string_view> skipped;
    while (i < lines.size() && !is_h1(lines[i]))
        skipped.push_back(lines[i++]);
    if (i == lines.size()) {
        result.error = ParseError{ErrorCode::NoTitle, std::nullopt, "no level-1 header found"};
        return result;
    }
    result.skipped_prefix = join_block(skipped);
    if (!result.skipped_prefix.empty())
        result.warnings.push_back("skipped text before the title header");

    Story story;
    story.title = std::string(text::trim(lines[i].substr(2)));
    ++i;

    std::vector<std::string_view> preamble;
    std::vector<RawChapter> raw;
    for (; i < lines.size(); ++i) {
        const auto line = lines[i];
        if (is_h2(line)) {
            raw.push_back({std::string(line.substr(3)), {}});
            continue;
        }
        if (is_h1(line))
            result.warnings.push_back("extra level-1 header kept as text: " + std::string(text::trim(line.substr(2))));
        (raw.empty() ? preamble : raw.back().body).push_back(line);
    }

    if (auto p = join_block(preamble); !p.empty())
        story.preamble = std::move(p);

    if (raw.empty()) {
        result.error = ParseError{ErrorCode::NoChapters, std::nullopt, "no level-2 chapter headers found"};
        return result;
    }

    bool increasing = true;
    int previous = 0;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        auto fields = split_chapter_header(raw[k].header);
        Chapter chapter;
        chapter.number = fields.number.value_or(static_cast<int>(k) + 1);
        chapter.title = std::move(fields.title);
        chapter.body = join_block(raw[k].body);
        if (chapter.number <= previous)
            increasing = false;
        previous = chapter.number;
        story.chapters.push_back(std::move(chapter));
    }
    if (!increasing) {
        result.warnings.push_back("chapter numbers are not increasing; renumbered by position");
        for (std::size_t k = 0; k < story.chapters.size(); ++k)
            story.chapters[k].number = static_cast<int>(k) + 1;
    }
    for (const auto& c : story.chapters) {
        if (c.body.empty()) {
            result.error = ParseError{ErrorCode::EmptyBody, c.number,
                                      "chapter " + std::to_string(c.number) + " has no text"};
            return result;
        }
    }
    result.story = std::move(story);
    return result;
}

std::string render_story(const Story& story)
{
    std::string out = "# " + story.title + "\n";
    if (story.preamble && !story.preamble->empty())
        out += "\n" + *story.preamble + "\n";
    for (const auto& c : story.chapters) {
        out += "\n## Chapter " + std::to_string(c.number) + ": " + c.title + "\n";
        out += "\n" + c.body + "\n";
    }
    return out;
}

Chapter parse_chapter_reply(std::string_view markdown)
{
    const auto text = normalize_newlines(markdown);
    const auto lines = lines_of(text);
    std::optional<std::string> header;
    std::vector<std::string_view> body;
    int headers = 0;
    for (const auto line : lines) {
        if (is_h2(line)) {
            ++headers;
            header = std::string(line.substr(3));
            continue;
        }
        if (header)
            body.push_back(line);
    }
    if (headers != 1)
        throw Error(ErrorCode::ParseFailed,
                    "expected exactly one level-2 header in the rewritten chapter, found " + std::to_string(headers));
    Chapter chapter;
    auto fields = split_chapter_header(*header);
    chapter.number = fields.number.value_or(1);
    chapter.title = std::move(fields.title);
    chapter.body = join_block(body);
    if (chapter.body.empty())
        throw Error(ErrorCode::ParseFailed, "the rewritten chapter has no text");
    return chapter;
}

} // namespace imageteller
