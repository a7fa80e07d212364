#include "imageteller/prompt_engine.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace imageteller {

namespace {

bool is_alnum_byte(char c) noexcept
{
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

// Apostrophes and hyphens are word characters only between two letters or
// digits ("Guinevere's", "well-known").
bool is_word_at(std::string_view text, std::size_t i) noexcept
{
    if (i >= text.size())
        return false;
    const char c = text[i];
    if (is_alnum_byte(c))
        return true;
    if (c == '\'' || c == '-')
        return i > 0 && i + 1 < text.size() && is_alnum_byte(text[i - 1]) && is_alnum_byte(text[i + 1]);
    return false;
}

bool is_boundary(std::string_view text, std::size_t p) noexcept
{
    if (p == 0 || p >= text.size())
        return true;
    return !(is_word_at(text, p - 1) && is_word_at(text, p));
}

struct Word {
    std::size_t start;
    std::size_t end;
    std::string lower;
    bool capitalized;
};

std::vector<Word> words_of(std::string_view text)
{
    std::vector<Word> words;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_at(text, i)) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_word_at(text, i))
            ++i;
        const auto token = text.substr(start, i - start);
        words.push_back({start, i, text::to_lower(token), std::isupper(static_cast<unsigned char>(token[0])) != 0});
    }
    return words;
}

// Only whitespace between two words: phrase rules may not cross punctuation.
bool adjacent(std::string_view text, const Word& a, const Word& b)
{
    if (b.start <= a.end)
        return false;
    const auto gap = text.substr(a.end, b.start - a.end);
    return std::all_of(gap.begin(), gap.end(), text::is_space);
}

const std::set<std::string, std::less<>> kAttireAdjectives = {
    "red",    "crimson", "scarlet", "blue",     "navy",   "azure",   "green",  "emerald", "gold",
    "golden", "silver",  "white",   "black",    "grey",   "gray",    "brown",  "purple",  "violet",
    "yellow", "orange",  "pink",    "velvet",   "silk",   "silken",  "leather", "floral", "striped",
    "embroidered", "lace", "fur",   "jeweled",  "jewelled", "plaid", "tartan",
};

const std::set<std::string, std::less<>> kAttireNouns = {
    "dress",  "dresses", "gown",     "gowns",    "robe",     "robes",  "cloak",  "cape",   "tunic",
    "armor",  "armour",  "coat",     "jacket",   "shirt",    "suit",   "hat",    "helmet", "crown",
    "veil",   "boots",   "gloves",   "scarf",    "hood",     "skirt",  "trousers", "uniform", "details",
    "patterns", "headdress", "mantle", "necklace", "attire", "garments", "sleeves",
};

const std::vector<std::vector<std::string>> kScenePhrases = {
    {"dimly", "lit", "chamber"}, {"throne", "room"}, {"great", "hall"}, {"night", "sky"},
    {"stone", "walls"},          {"prison", "cell"}, {"alien", "spaceship"},
};

const std::set<std::string, std::less<>> kSceneNouns = {
    "elegance", "face",    "eyes",   "chamber",   "castle",  "tapestry", "throne",  "forest",  "sword",
    "spaceship", "city",   "garden", "tower",     "ocean",   "prison",   "palace",  "courtyard", "battlefield",
    "horse",    "dragon",  "ship",   "cathedral", "skyline", "mountains", "river",  "moonlight", "tears",
};

const std::set<std::string, std::less<>> kNotProperNouns = {
    // function words that start sentences
    "a", "an", "the", "in", "on", "at", "of", "and", "but", "or", "with", "as", "by", "for", "from", "to",
    "into", "under", "over", "while", "when", "where", "who", "whose", "his", "her", "their", "its", "he",
    "she", "they", "it", "this", "that", "these", "those", "there", "here", "then", "i", "we", "you", "our",
    "my", "your", "after", "before", "during", "amid", "amidst", "beneath", "above", "inside", "outside",
    "near", "behind", "across", "through", "against", "among", "each", "every", "all", "both", "some",
    "one", "two", "three", "as", "together", "suddenly", "meanwhile", "nearby", "beside", "surrounded",
    // honorifics and titles
    "lady", "lord", "sir", "king", "queen", "prince", "princess", "dame", "duke", "duchess", "mr", "mrs",
    "ms", "dr", "captain", "saint", "st", "master", "mistress", "madam", "emperor", "empress", "count",
    "countess", "baron", "baroness", "doctor", "professor",
};

} // namespace

std::optional<std::string> span_problem(std::string_view text, const EmphasisSpan& span)
{
    if (span.level != 2 && span.level != 3)
        return "level must be 2 or 3";
    if (span.start >= span.end)
        return "span is empty";
    if (span.end > text.size())
        return "span exceeds the text";
    if (text::is_space(text[span.start]) || text::is_space(text[span.end - 1]))
        return "span starts or ends on whitespace";
    if (!is_boundary(text, span.start) || !is_boundary(text, span.end))
        return "span splits a word";
    return std::nullopt;
}

void validate_plan(std::string_view text, const EmphasisPlan& plan)
{
    auto spans = plan.spans;
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (auto problem = span_problem(text, spans[i]))
            throw Error(ErrorCode::InvalidSpan, "span [" + std::to_string(spans[i].start) + ", " +
                                                    std::to_string(spans[i].end) + "): " + *problem);
        if (i > 0 && spans[i].start < spans[i - 1].end)
            throw Error(ErrorCode::InvalidSpan, "spans overlap at offset " + std::to_string(spans[i].start));
    }
}

std::string apply_emphasis(std::string_view text, const EmphasisPlan& plan)
{
    validate_plan(text, plan);
    auto spans = plan.spans;
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.start > b.start; });
    std::string out(text);
    for (const auto& s : spans) {
        const auto level = static_cast<std::size_t>(s.level);
        out.insert(s.end, level, ')');
        out.insert(s.start, level, '(');
    }
    return out;
}

std::string strip_emphasis(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (char c : text)
        if (c != '(' && c != ')')
            out.push_back(c);
    return out;
}

std::vector<EmphasisSpan> HeuristicAnnotator::propose(std::string_view event_description)
{
    const auto words = words_of(event_description);
    std::vector<EmphasisSpan> spans;
    std::size_t i = 0;
    while (i < words.size()) {
        const auto& w = words[i];

        if (i + 1 < words.size() && kAttireAdjectives.contains(w.lower) &&
            kAttireNouns.contains(words[i + 1].lower) && adjacent(event_description, w, words[i + 1])) {
            spans.push_back({w.start, words[i + 1].end, 3});
            i += 2;
            continue;
        }

        std::size_t phrase_len = 0;
        for (const auto& phrase : kScenePhrases) {
            if (phrase.size() <= phrase_len || i + phrase.size() > words.size())
                continue;
            bool match = true;
            for (std::size_t k = 0; k < phrase.size() && match; ++k)
                match = words[i + k].lower == phrase[k] &&
                        (k == 0 || adjacent(event_description, words[i + k - 1], words[i + k]));
            if (match)
                phrase_len = phrase.size();
        }
        if (phrase_len > 0) {
            spans.push_back({w.start, words[i + phrase_len - 1].end, 2});
            i += phrase_len;
            continue;
        }

        if (kSceneNouns.contains(w.lower)) {
            spans.push_back({w.start, w.end, 2});
            ++i;
            continue;
        }

        const auto proper = [&](std::size_t k) { return words[k].capitalized && !kNotProperNouns.contains(words[k].lower); };
        if (proper(i)) {
            std::size_t j = i;
            while (j + 1 < words.size() && proper(j + 1) && adjacent(event_description, words[j], words[j + 1]))
                ++j;
            spans.push_back({w.start, words[j].end, 2});
            i = j + 1;
            continue;
        }
        ++i;
    }
    return spans;
}

EmphasisPlan sanitize_proposals(std::string_view text, std::vector<EmphasisSpan> proposals)
{
    std::sort(proposals.begin(), proposals.end(), [](const auto& a, const auto& b) {
        return a.start != b.start ? a.start < b.start : (a.end - a.start) > (b.end - b.start);
    });
    EmphasisPlan plan;
    for (const auto& s : proposals) {
        if (span_problem(text, s))
            continue;
        if (!plan.spans.empty() && s.start < plan.spans.back().end)
            continue;
        plan.spans.push_back(s);
    }
    return plan;
}

EmphasisPlan plan_emphasis(std::string_view event_description, EmphasisAnnotator& annotator)
{
    if (text::trim(event_description).empty())
        throw Error(ErrorCode::PreconditionViolation, "event description is empty");
    std::vector<EmphasisSpan> proposals;
    try {
        proposals = annotator.propose(event_description);
    } catch (const std::exception&) {
        HeuristicAnnotator fallback;
        proposals = fallback.propose(event_description);
    }
    return sanitize_proposals(event_description, std::move(proposals));
}

IllustrationSpec build_illustration_spec(std::string_view event_description, const EmphasisPlan& plan)
{
    if (text::trim(event_description).empty())
        throw Error(ErrorCode::PreconditionViolation, "event description is empty");
    IllustrationSpec spec;
    spec.positive = apply_emphasis(event_description, plan);
    spec.positive += ' ';
    spec.positive += default_style_suffix();
    spec.negative = std::string(negative_prompt());
    return spec;
}

} // namespace imageteller
