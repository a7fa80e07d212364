#include "imageteller/service_api.hpp"

#include "imageteller/library_store.hpp"
#include "imageteller/serialization.hpp"
#include "text_util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <thread>

namespace imageteller {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message,
                json detail = nullptr)
{
    send_json(res, status, {{"error", {{"code", code}, {"message", message}, {"detail", std::move(detail)}}}});
}

std::string_view default_code_for(int status)
{
    switch (status) {
    case 400: return "BadRequest";
    case 401: return "Unauthorized";
    case 404: return "NotFound";
    case 409: return "Conflict";
    case 413: return "PayloadTooLarge";
    default: return status >= 500 ? "InternalError" : "BadRequest";
    }
}

json progress_to_json(const std::vector<ProgressEvent>& log)
{
    json out = json::array();
    for (const auto& e : log)
        out.push_back({{"timestamp", format_utc(e.timestamp)}, {"stage", e.stage}, {"detail", e.detail}});
    return out;
}

json genres_to_json()
{
    json out = json::array();
    for (const auto& e : genre_catalog().entries())
        out.push_back({{"name", e.name},
                       {"description", e.description},
                       {"kind", std::holds_alternative<DataDriven>(e.kind) ? "data" : "story"}});
    return out;
}

std::optional<std::uint64_t> parse_story_id(const std::string& text)
{
    if (text.empty() || text.size() > 19 || !std::all_of(text.begin(), text.end(), ::isdigit))
        return std::nullopt;
    return std::stoull(text);
}

std::optional<Bytes> story_file(const Story& story, const std::string& name)
{
    auto doc = to_document(story);
    const auto it = doc.files.find(name);
    if (it == doc.files.end())
        return std::nullopt;
    return std::move(it->second);
}

std::string content_type_for(const std::string& name)
{
    const auto dot = name.rfind('.');
    if (dot != std::string::npos)
        if (const auto type = parse_media_type(name.substr(dot + 1)))
            return std::string(mime_type(*type));
    return "application/octet-stream";
}

} // namespace

struct StoryService::Impl {
    Impl(AgentSet agents, ServiceOptions opts)
        : options(std::move(opts)), plot(std::move(agents), options.plot), store(options.store_root)
    {
        install_routes();
    }

    ServiceOptions options;
    PlotManager plot;
    LibraryStore store;
    httplib::Server server;
    std::thread listener;

    std::mutex regen_mutex;
    std::map<std::string, std::shared_ptr<std::mutex>, std::less<>> regen_locks;

    std::shared_ptr<std::mutex> regeneration_lock(const std::string& job_id)
    {
        std::lock_guard lock(regen_mutex);
        auto& slot = regen_locks[job_id];
        if (!slot)
            slot = std::make_shared<std::mutex>();
        return slot;
    }

    json job_story_json(const std::string& job_id, const Story& story) const
    {
        DocumentOptions doc_options;
        doc_options.ref_prefix = "/media/jobs/" + job_id + "/";
        doc_options.versioned_refs = true;
        return to_document(story, doc_options).manifest;
    }

    json saved_story_json(const Story& story) const
    {
        DocumentOptions doc_options;
        doc_options.ref_prefix = "/media/stories/" + to_string(*story.id) + "/";
        return to_document(story, doc_options).manifest;
    }

    void install_routes()
    {
        server.set_payload_max_length(options.max_upload_bytes);

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty())
                return httplib::Server::HandlerResponse::Unhandled;
            const auto code = default_code_for(res.status);
            send_error(res, res.status, code, res.status == 413 ? "request body exceeds the upload limit"
                                                                : httplib::status_message(res.status));
            return httplib::Server::HandlerResponse::Handled;
        });

        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                message = std::string(to_string(e.code())) + ": " + e.what();
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            send_error(res, 500, "InternalError", message);
        });

        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (!options.api_token || req.path.rfind("/api/", 0) != 0)
                return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("Authorization") != "Bearer " + *options.api_token) {
                send_error(res, 401, "Unauthorized", "missing or invalid bearer token");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });

        server.Get("/api/genres", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"genres", genres_to_json()}});
        });

        server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) { create_job(req, res); });

        server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto job = plot.job(id);
            if (!job)
                return send_error(res, 404, "NotFound", "no job with id '" + id + "'");
            json body = {{"job_id", job->id},
                         {"state", to_string(job->state)},
                         {"chapter", job->illustrating_chapter ? json(*job->illustrating_chapter) : json(nullptr)},
                         {"progress_log", progress_to_json(job->progress_log)},
                         {"story", job->story ? job_story_json(job->id, *job->story) : json(nullptr)},
                         {"error", nullptr}};
            if (job->failure)
                body["error"] = {{"code", to_string(job->failure->code)},
                                 {"stage", job->failure->stage},
                                 {"message", job->failure->message},
                                 {"subject", job->failure->subject ? json(*job->failure->subject) : json(nullptr)}};
            send_json(res, 200, body);
        });

        server.Post(R"(/api/stories/([^/]+)/regenerate)",
                    [this](const httplib::Request& req, httplib::Response& res) { regenerate(req, res); });

        server.Post("/api/stories", [this](const httplib::Request& req, httplib::Response& res) { save(req, res); });

        server.Get(R"(/api/stories/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = parse_story_id(req.matches[1]);
            if (!id || !store.contains(StoryId{*id}))
                return send_error(res, 404, "NotFound", "no saved story '" + std::string(req.matches[1]) + "'");
            try {
                send_json(res, 200, saved_story_json(store.load_story(StoryId{*id})));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NotFound)
                    throw;
                send_error(res, 404, "NotFound", e.what());
            }
        });

        server.Delete(R"(/api/stories/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = parse_story_id(req.matches[1]);
            try {
                if (!id)
                    throw Error(ErrorCode::NotFound, "no saved story '" + std::string(req.matches[1]) + "'");
                store.delete_story(StoryId{*id});
                send_json(res, 200, {{"deleted", *id}});
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NotFound)
                    throw;
                send_error(res, 404, "NotFound", e.what());
            }
        });

        server.Get("/api/library", [this](const httplib::Request&, httplib::Response& res) {
            json entries = json::array();
            for (const auto& e : store.list_stories()) {
                const auto base = "/media/stories/" + to_string(e.id) + "/";
                entries.push_back({{"id", e.id.value},
                                   {"title", e.title},
                                   {"created_at", format_utc(e.created_at)},
                                   {"chapter_count", e.chapter_count},
                                   {"thumbnail_ref", e.thumbnail_ref ? json(base + *e.thumbnail_ref) : json(nullptr)},
                                   {"url", "/story/" + to_string(e.id)}});
            }
            send_json(res, 200, {{"entries", entries}});
        });

        server.Get(R"(/media/jobs/([^/]+)/([^/?]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto job = plot.job(std::string(req.matches[1]));
            std::optional<Bytes> bytes;
            if (job && job->story)
                bytes = story_file(*job->story, req.matches[2]);
            if (!bytes)
                return send_error(res, 404, "NotFound", "no such media file");
            res.set_content(std::string(bytes->begin(), bytes->end()), content_type_for(req.matches[2]));
        });

        server.Get(R"(/media/stories/([^/]+)/([^/?]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = parse_story_id(req.matches[1]);
            std::optional<Bytes> bytes;
            if (id)
                bytes = store.read_file(StoryId{*id}, std::string(req.matches[2]));
            if (!bytes || std::string(req.matches[2]) == kManifestName)
                return send_error(res, 404, "NotFound", "no such media file");
            res.set_content(std::string(bytes->begin(), bytes->end()), content_type_for(req.matches[2]));
        });

        // Permalinks: the browser UI for HTML clients, the JSON document otherwise.
        server.Get(R"(/story/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            if (serve_index(req, res))
                return;
            const auto id = parse_story_id(req.matches[1]);
            if (!id || !store.contains(StoryId{*id}))
                return send_error(res, 404, "NotFound", "no saved story '" + std::string(req.matches[1]) + "'");
            send_json(res, 200, saved_story_json(store.load_story(StoryId{*id})));
        });
        server.Get("/library", [this](const httplib::Request& req, httplib::Response& res) {
            if (!serve_index(req, res))
                res.set_redirect("/api/library");
        });

        if (options.static_dir)
            server.set_mount_point("/", options.static_dir->string());
    }

    bool serve_index(const httplib::Request& req, httplib::Response& res) const
    {
        if (!options.static_dir || req.get_header_value("Accept").find("text/html") == std::string::npos)
            return false;
        std::ifstream in(*options.static_dir / "index.html", std::ios::binary);
        if (!in)
            return false;
        res.set_content(std::string(std::istreambuf_iterator<char>(in), {}), "text/html");
        return true;
    }

    void create_job(const httplib::Request& req, httplib::Response& res)
    {
        if (!req.is_multipart_form_data())
            return send_error(res, 400, "BadRequest", "expected multipart/form-data");

        NarrativeRequest request;
        int index = 0;
        for (const auto& part : req.get_file_values("frames")) {
            InputFrame frame;
            frame.index = ++index;
            frame.image_data.assign(part.content.begin(), part.content.end());
            const auto sniffed = sniff_media_type(frame.image_data);
            frame.media_type = parse_media_type(part.content_type).value_or(sniffed.value_or(MediaType::Png));
            const auto caption_key = "caption_" + std::to_string(frame.index);
            if (req.has_file(caption_key)) {
                const auto caption = std::string(text::trim(req.get_file_value(caption_key).content));
                if (!caption.empty())
                    frame.caption = caption;
            }
            request.frames.push_back(std::move(frame));
        }

        const auto field = [&](const char* key) {
            return req.has_file(key) ? std::string(text::trim(req.get_file_value(key).content)) : std::string();
        };
        const auto kind = text::to_lower(field("kind"));
        const auto genre = field("genre");
        if (!kind.empty() && kind != "story" && kind != "data")
            return send_error(res, 400, "BadRequest", "kind must be 'story' or 'data'");
        if (!genre.empty()) {
            const auto* entry = genre_catalog().find(genre);
            if (!entry)
                return send_error(res, 400, "UnknownGenre", "unknown genre '" + genre + "'",
                                  {{"valid_genres", genre_catalog().names_joined()}});
            if (kind == "data" && !std::holds_alternative<DataDriven>(entry->kind))
                return send_error(res, 400, "BadRequest", "a data-driven narrative takes no story genre");
            request.kind = entry->kind;
        } else if (kind == "data") {
            request.kind = DataDriven{};
        }

        const auto validation = validate_request(request, options.plot.limits);
        if (!validation.ok()) {
            json violations = json::array();
            for (const auto& v : validation.violations)
                violations.push_back({{"code", to_string(v.code)},
                                      {"frame", v.frame ? json(*v.frame) : json(nullptr)},
                                      {"message", v.message}});
            return send_error(res, 400, "ValidationFailed", validation.summary(), {{"violations", violations}});
        }
        const auto id = plot.submit(std::move(request));
        send_json(res, 202, {{"job_id", id}});
    }

    void regenerate(const httplib::Request& req, httplib::Response& res)
    {
        const std::string job_id = req.matches[1];
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "BadRequest", "body must be JSON");
        }
        const auto target = body.value("target", std::string());
        if ((target != "chapter" && target != "illustration") || !body.contains("chapter") ||
            !body.at("chapter").is_number_integer())
            return send_error(res, 400, "BadRequest",
                              "expected {\"target\": \"chapter\"|\"illustration\", \"chapter\": <n>}");
        const int chapter = body.at("chapter").get<int>();

        const auto job = plot.job(job_id);
        if (!job)
            return send_error(res, 404, "NotFound", "no job with id '" + job_id + "'");
        if (job->state != JobState::Done || !job->story)
            return send_error(res, 409, "Conflict", "the job has not finished");
        if (!job->story->find_chapter(chapter))
            return send_error(res, 404, "NotFound", "story has no chapter " + std::to_string(chapter));

        const auto lock_ptr = regeneration_lock(job_id);
        std::unique_lock lock(*lock_ptr, std::try_to_lock);
        if (!lock.owns_lock())
            return send_error(res, 409, "Conflict", "a regeneration for this story is already running");

        // Re-read under the lock so a regeneration that just finished is not lost.
        const auto current = plot.job(job_id);
        try {
            auto updated = target == "chapter" ? plot.regenerate_chapter(*current->story, chapter)
                                               : plot.regenerate_illustration(*current->story, chapter);
            plot.update_story(job_id, updated);
            send_json(res, 200, {{"job_id", job_id}, {"story", job_story_json(job_id, updated)}});
        } catch (const Error& e) {
            send_error(res, 502, "RegenerationFailed", e.what(), {{"cause", to_string(e.code())}});
        }
    }

    void save(const httplib::Request& req, httplib::Response& res)
    {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            return send_error(res, 400, "BadRequest", "body must be JSON");
        }
        if (!body.contains("job_id") || !body.at("job_id").is_string())
            return send_error(res, 400, "BadRequest", "expected {\"job_id\": \"...\"}");
        const auto job_id = body.at("job_id").get<std::string>();
        const auto job = plot.job(job_id);
        if (!job)
            return send_error(res, 404, "NotFound", "no job with id '" + job_id + "'");
        if (job->state != JobState::Done || !job->story)
            return send_error(res, 409, "Conflict", "the job has not finished");
        const auto id = store.save_story(*job->story);
        send_json(res, 201, {{"id", id.value}, {"url", "/story/" + to_string(id)}});
    }
};

StoryService::StoryService(AgentSet agents, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(agents), std::move(options)))
{
}

StoryService::~StoryService()
{
    stop();
    impl_->plot.wait_idle();
}

int StoryService::start(const std::string& host, int port)
{
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0)
        throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void StoryService::wait()
{
    if (impl_->listener.joinable())
        impl_->listener.join();
}

void StoryService::stop()
{
    impl_->server.stop();
    wait();
}

PlotManager& StoryService::plot_manager()
{
    return impl_->plot;
}

} // namespace imageteller
