#include "imageteller/serialization.hpp"

#include "imageteller/hashing.hpp"

#include <cstdio>
#include <ctime>

namespace imageteller {

using nlohmann::json;

namespace {

std::string make_ref(const std::string& name, const Bytes& bytes, const DocumentOptions& options)
{
    auto ref = options.ref_prefix + name;
    if (options.versioned_refs)
        ref += "?v=" + hash8(bytes);
    return ref;
}

[[noreturn]] void corrupt(const std::string& what)
{
    throw Error(ErrorCode::CorruptDocument, "story document: " + what);
}

template <typename T>
T field(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        corrupt(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        corrupt(std::string("field '") + key + "' has the wrong type");
    }
}

std::optional<std::string> optional_text(const json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return field<std::string>(j, key);
}

} // namespace

std::string frame_file_name(const InputFrame& frame)
{
    return "frame_" + std::to_string(frame.index) + "." + std::string(file_extension(frame.media_type));
}

std::string chapter_file_name(int chapter_number)
{
    return "chapter_" + std::to_string(chapter_number) + ".png";
}

std::string ref_file_name(std::string_view image_ref)
{
    if (const auto q = image_ref.find('?'); q != std::string_view::npos)
        image_ref = image_ref.substr(0, q);
    if (const auto slash = image_ref.rfind('/'); slash != std::string_view::npos)
        image_ref = image_ref.substr(slash + 1);
    return std::string(image_ref);
}

json kind_to_json(const NarrativeKind& kind)
{
    json j;
    j["kind"] = kind_name(kind);
    if (const auto* g = std::get_if<StoryWithGenre>(&kind))
        j["genre"] = {{"name", g->genre.name}, {"description", g->genre.description}};
    else
        j["genre"] = nullptr;
    return j;
}

NarrativeKind kind_from_json(const json& j)
{
    const auto name = field<std::string>(j, "kind");
    if (name == "story-free")
        return StoryFree{};
    if (name == "data-driven")
        return DataDriven{};
    if (name == "story-genre") {
        const auto& g = j.at("genre");
        return StoryWithGenre{Genre{field<std::string>(g, "name"), field<std::string>(g, "description")}};
    }
    corrupt("unknown narrative kind '" + name + "'");
}

StoryDocument to_document(const Story& story, const DocumentOptions& options)
{
    StoryDocument doc;
    json& m = doc.manifest;
    m["format_version"] = kDocumentFormatVersion;
    m["id"] = story.id ? json(story.id->value) : json(nullptr);
    m["title"] = story.title;
    m["preamble"] = story.preamble ? json(*story.preamble) : json(nullptr);

    json chapters = json::array();
    for (const auto& c : story.chapters) {
        json jc = {{"number", c.number}, {"title", c.title}, {"body", c.body}};
        if (c.illustration) {
            const auto& il = *c.illustration;
            json ji = {{"event_description", il.event_description},
                       {"positive", il.spec.positive},
                       {"negative", il.spec.negative},
                       {"seed", il.seed},
                       {"image_ref", nullptr}};
            if (il.image_data) {
                const auto name = chapter_file_name(c.number);
                ji["image_ref"] = make_ref(name, *il.image_data, options);
                doc.files[name] = *il.image_data;
            }
            jc["illustration"] = std::move(ji);
        } else {
            jc["illustration"] = nullptr;
        }
        chapters.push_back(std::move(jc));
    }
    m["chapters"] = std::move(chapters);

    json descriptions = json::array();
    for (const auto& d : story.descriptions)
        descriptions.push_back({{"frame_index", d.frame_index}, {"text", d.text}});
    m["descriptions"] = std::move(descriptions);
    m["final_prompt"] = story.final_prompt;

    json request = kind_to_json(story.request_snapshot.kind);
    json frames = json::array();
    for (const auto& f : story.request_snapshot.frames) {
        const auto name = frame_file_name(f);
        frames.push_back({{"index", f.index},
                          {"caption", f.caption ? json(*f.caption) : json(nullptr)},
                          {"media_type", to_string(f.media_type)},
                          {"image_ref", make_ref(name, f.image_data, options)}});
        doc.files[name] = f.image_data;
    }
    request["frames"] = std::move(frames);
    m["request"] = std::move(request);
    return doc;
}

Story from_document(const json& m, const FileLoader& load_file)
{
    if (!m.is_object())
        corrupt("manifest is not an object");
    Story story;
    if (m.contains("id") && !m.at("id").is_null())
        story.id = StoryId{field<std::uint64_t>(m, "id")};
    story.title = field<std::string>(m, "title");
    story.preamble = optional_text(m, "preamble");

    const auto& chapters = m.contains("chapters") ? m.at("chapters") : json();
    if (!chapters.is_array())
        corrupt("'chapters' is not an array");
    for (const auto& jc : chapters) {
        Chapter c;
        c.number = field<int>(jc, "number");
        c.title = field<std::string>(jc, "title");
        c.body = field<std::string>(jc, "body");
        if (jc.contains("illustration") && !jc.at("illustration").is_null()) {
            const auto& ji = jc.at("illustration");
            IllustrationRecord il;
            il.event_description = field<std::string>(ji, "event_description");
            il.spec.positive = field<std::string>(ji, "positive");
            il.spec.negative = field<std::string>(ji, "negative");
            il.seed = field<std::uint64_t>(ji, "seed");
            if (auto ref = optional_text(ji, "image_ref"))
                il.image_data = load_file(ref_file_name(*ref));
            c.illustration = std::move(il);
        }
        story.chapters.push_back(std::move(c));
    }

    const auto& descriptions = m.contains("descriptions") ? m.at("descriptions") : json();
    if (!descriptions.is_array())
        corrupt("'descriptions' is not an array");
    for (const auto& jd : descriptions)
        story.descriptions.push_back({field<int>(jd, "frame_index"), field<std::string>(jd, "text")});
    story.final_prompt = field<std::string>(m, "final_prompt");

    if (!m.contains("request"))
        corrupt("missing field 'request'");
    const auto& request = m.at("request");
    story.request_snapshot.kind = kind_from_json(request);
    const auto& frames = request.contains("frames") ? request.at("frames") : json();
    if (!frames.is_array())
        corrupt("'request.frames' is not an array");
    for (const auto& jf : frames) {
        InputFrame f;
        f.index = field<int>(jf, "index");
        f.caption = optional_text(jf, "caption");
        const auto media = parse_media_type(field<std::string>(jf, "media_type"));
        if (!media)
            corrupt("unknown media type for frame " + std::to_string(f.index));
        f.media_type = *media;
        f.image_data = load_file(ref_file_name(field<std::string>(jf, "image_ref")));
        story.request_snapshot.frames.push_back(std::move(f));
    }
    return story;
}

std::string format_utc(std::chrono::system_clock::time_point t)
{
    using namespace std::chrono;
    const auto ms = floor<milliseconds>(t.time_since_epoch()).count();
    const auto whole = floor<seconds>(milliseconds(ms)).count();
    const std::time_t secs = static_cast<std::time_t>(whole);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms - whole * 1000));
    return buf;
}

std::chrono::system_clock::time_point parse_utc(std::string_view text)
{
    std::tm tm{};
    int millis = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &millis) < 6)
        corrupt("bad timestamp '" + s + "'");
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const auto secs = timegm(&tm);
    return std::chrono::system_clock::from_time_t(secs) + std::chrono::milliseconds(millis);
}

} // namespace imageteller
