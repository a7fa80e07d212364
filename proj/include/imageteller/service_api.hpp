#pragma once

#include "imageteller/agents.hpp"
#include "imageteller/plot_manager.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace imageteller {

/// Codes of the JSON error body {"error": {"code", "message", "detail"}}.
/// ValidationFailed, UnknownGenre, BadRequest, Unauthorized, NotFound,
/// Conflict, PayloadTooLarge, InternalError.
struct ServiceOptions {
    std::filesystem::path store_root = "library";
    /// Directory served at "/" (the browser UI), if any.
    std::optional<std::filesystem::path> static_dir;
    /// When set, /api/* requires "Authorization: Bearer <token>".
    std::optional<std::string> api_token;
    std::size_t max_upload_bytes = 20 * 1024 * 1024;
    PlotOptions plot;
};

/// REST front end over the plot manager and the library store.
///
///   POST /api/jobs                       multipart upload, 202 {"job_id"}
///   GET  /api/jobs/{id}                  state, progress log, story so far
///   POST /api/stories/{job_id}/regenerate {"target": "chapter"|"illustration", "chapter": n}
///   POST /api/stories                    {"job_id"} -> 201 {"id"}
///   GET  /api/stories/{id}               saved story document
///   DELETE /api/stories/{id}
///   GET  /api/library                    saved stories, newest first
///   GET  /api/genres                     genre catalog
///   GET  /media/jobs/{job_id}/{file}     images of a job's story
///   GET  /media/stories/{id}/{file}      images of a saved story
///   GET  /story/{id}, /library           permalinks (UI page for HTML clients)
class StoryService {
public:
    StoryService(AgentSet agents, ServiceOptions options);
    ~StoryService();

    StoryService(const StoryService&) = delete;
    StoryService& operator=(const StoryService&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws std::runtime_error if binding fails.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks until stop() is called.
    void wait();
    void stop();

    PlotManager& plot_manager();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace imageteller
