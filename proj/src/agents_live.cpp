#include "imageteller/agents.hpp"

#include "imageteller/hashing.hpp"
#include "imageteller/image_codec.hpp"
#include "text_util.hpp"

#include <httplib.h>
#include <json.hpp>

namespace imageteller {

using nlohmann::json;

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::InvalidConfig, "endpoint '" + url + "' is not an absolute URL");
    const auto path_at = url.find('/', scheme_end + 3);
    if (path_at == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_at), url.substr(path_at)};
}

std::string post_json(const AgentConfig& config, const json& body)
{
    const auto url = split_url(config.endpoint);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    client.set_bearer_token_auth(config.credentials);

    const auto payload = body.dump(-1, ' ', false, json::error_handler_t::replace);
    const auto res = client.Post(url.path, payload, "application/json");
    if (!res) {
        const auto err = res.error();
        const auto what = httplib::to_string(err);
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            throw Error(ErrorCode::AgentTimeout, "request to " + url.origin + " timed out: " + what);
        throw Error(ErrorCode::AgentHttpError, "request to " + url.origin + " failed: " + what, 0);
    }
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::AgentHttpError,
                    "request to " + url.origin + " returned HTTP " + std::to_string(res->status), res->status);
    return res->body;
}

std::string message_text(const json& content)
{
    if (content.is_string())
        return content.get<std::string>();
    std::string out;
    if (content.is_array())
        for (const auto& part : content)
            if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
                part.at("text").is_string())
                out += part.at("text").get<std::string>();
    return out;
}

std::string without_header_markers(std::string_view reply)
{
    std::string out;
    std::size_t start = 0;
    while (start <= reply.size()) {
        auto end = reply.find('\n', start);
        if (end == std::string_view::npos)
            end = reply.size();
        auto line = text::trim(reply.substr(start, end - start));
        while (!line.empty() && line.front() == '#')
            line.remove_prefix(1);
        out.append(text::trim(line));
        out.push_back('\n');
        start = end + 1;
    }
    return text::collapse_whitespace(out);
}

} // namespace

ChatCompletionsClient::ChatCompletionsClient(AgentConfig config) : config_(std::move(config))
{
    config_.validate();
}

std::string ChatCompletionsClient::complete(std::string_view text, std::span<const InputFrame> images) const
{
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", text}});
    for (const auto& frame : images) {
        const auto data_url =
            "data:" + std::string(mime_type(frame.media_type)) + ";base64," + base64_encode(frame.image_data);
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url}}}});
    }
    json body = {{"model", config_.model_name}, {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    if (config_.temperature)
        body["temperature"] = *config_.temperature;

    const auto raw = post_json(config_, body);
    json reply;
    try {
        reply = json::parse(raw);
        const auto out = message_text(reply.at("choices").at(0).at("message").at("content"));
        if (text::trim(out).empty())
            throw Error(ErrorCode::AgentBadResponse, "the model returned an empty message");
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::AgentBadResponse, std::string("unparseable chat reply: ") + e.what());
    }
}

TextToImageClient::TextToImageClient(AgentConfig config) : config_(std::move(config))
{
    config_.validate();
}

Bytes TextToImageClient::generate(const IllustrationSpec& spec, const ImageJobParams& params) const
{
    params.validate();
    const json body = {{"prompt", spec.positive},   {"negative_prompt", spec.negative}, {"width", params.width},
                       {"height", params.height},   {"steps", params.steps},            {"cfg_scale", params.guidance},
                       {"seed", params.seed}};
    const auto raw = post_json(config_, body);

    std::optional<Bytes> image;
    const Bytes raw_bytes(raw.begin(), raw.end());
    if (sniff_media_type(raw_bytes)) {
        image = raw_bytes;
    } else {
        try {
            const auto reply = json::parse(raw);
            std::string b64;
            if (reply.contains("images") && reply.at("images").is_array() && !reply.at("images").empty())
                b64 = reply.at("images").at(0).get<std::string>();
            else if (reply.contains("image"))
                b64 = reply.at("image").get<std::string>();
            if (const auto comma = b64.find(','); b64.rfind("data:", 0) == 0 && comma != std::string::npos)
                b64.erase(0, comma + 1);
            image = base64_decode(b64);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::AgentBadResponse, std::string("unparseable image reply: ") + e.what());
        }
    }
    if (!image || image->empty())
        throw Error(ErrorCode::AgentBadResponse, "image reply carries no image payload");
    const auto info = probe_image(*image);
    if (!info)
        throw Error(ErrorCode::AgentBadResponse, "image reply is not a png, jpeg or webp image");
    if (info->width != static_cast<std::uint32_t>(params.width) ||
        info->height != static_cast<std::uint32_t>(params.height))
        throw Error(ErrorCode::AgentBadResponse, "image reply is " + std::to_string(info->width) + "x" +
                                                     std::to_string(info->height) + ", expected " +
                                                     std::to_string(params.width) + "x" +
                                                     std::to_string(params.height));
    return std::move(*image);
}

ImageDescription LiveVisualAnalyzer::analyze_image(const InputFrame& frame, std::string_view prompt)
{
    const auto reply = client_->complete(prompt, std::span(&frame, 1));
    auto paragraph = text::collapse_whitespace(reply);
    if (paragraph.empty())
        throw Error(ErrorCode::AgentBadResponse, "empty image description");
    return {frame.index, std::move(paragraph)};
}

std::string LiveStorywriter::generate_narrative(std::string_view prompt)
{
    auto reply = client_->complete(prompt);
    if (text::trim(reply).empty())
        throw Error(ErrorCode::AgentBadResponse, "empty narrative");
    return reply;
}

std::string LiveEventSummarizer::summarize_event(std::string_view prompt)
{
    auto summary = without_header_markers(client_->complete(prompt));
    if (summary.empty())
        throw Error(ErrorCode::AgentBadResponse, "empty event description");
    return summary;
}

Bytes LiveIllustrator::generate_image(const IllustrationSpec& spec, const ImageJobParams& params)
{
    return client_->generate(spec, params);
}

std::vector<EmphasisSpan> spans_from_annotation(std::string_view event_description, std::string_view reply)
{
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw Error(ErrorCode::AnnotatorFailure, "annotation reply has no JSON array");
    std::vector<EmphasisSpan> spans;
    try {
        const auto items = json::parse(reply.substr(open, close - open + 1));
        std::size_t cursor = 0;
        for (const auto& item : items) {
            const auto phrase = item.at("phrase").get<std::string>();
            const int level = item.at("level").get<int>();
            if (phrase.empty())
                continue;
            auto at = event_description.find(phrase, cursor);
            if (at == std::string_view::npos)
                at = event_description.find(phrase);
            if (at == std::string_view::npos)
                continue;
            spans.push_back({at, at + phrase.size(), level});
            cursor = at + phrase.size();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::AnnotatorFailure, std::string("malformed annotation: ") + e.what());
    }
    return spans;
}

std::vector<EmphasisSpan> ChatEmphasisAnnotator::propose(std::string_view event_description)
{
    std::string reply;
    try {
        reply = client_->complete(build_emphasis_annotation_prompt(event_description));
    } catch (const Error& e) {
        throw Error(ErrorCode::AnnotatorFailure, std::string("annotator call failed: ") + e.what());
    }
    return spans_from_annotation(event_description, reply);
}

} // namespace imageteller
