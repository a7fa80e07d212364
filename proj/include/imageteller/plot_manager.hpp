#pragma once

#include "imageteller/agents.hpp"
#include "imageteller/domain.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace imageteller {

enum class JobState { Pending, Analyzing, Writing, Illustrating, Done, Failed };

std::string_view to_string(JobState state) noexcept;

struct ProgressEvent {
    std::chrono::system_clock::time_point timestamp;
    std::string stage;
    std::string detail;
};

struct JobFailure {
    ErrorCode code;
    std::string stage;
    std::string message;
    std::optional<int> subject; // frame or chapter
};

/// Snapshot of one generation job. `story` is set from Illustrating onward.
struct GenerationJob {
    std::string id;
    NarrativeRequest request;
    JobState state = JobState::Pending;
    std::optional<int> illustrating_chapter;
    std::optional<Story> story;
    std::vector<ProgressEvent> progress_log;
    std::optional<JobFailure> failure;

    bool terminal() const noexcept { return state == JobState::Done || state == JobState::Failed; }
};

struct PlotOptions {
    ValidationLimits limits;
    ImageJobParams image_params;
    /// Extra generation attempts when the narrative cannot be parsed.
    int parse_retries = 2;
    /// Fixes the illustration seed sequence; otherwise every illustration gets
    /// a fresh random 63-bit seed.
    std::optional<std::uint64_t> seed;
};

/// Coordinates the agents: frame analysis, narrative writing and parsing,
/// per-chapter illustration, and the regeneration requests that follow.
/// Thread-safe; each job has one writer and any number of readers.
class PlotManager {
public:
    explicit PlotManager(AgentSet agents, PlotOptions options = {});
    ~PlotManager();

    PlotManager(const PlotManager&) = delete;
    PlotManager& operator=(const PlotManager&) = delete;

    /// Runs a job to completion on the calling thread and returns its final
    /// snapshot. Failures are reported in the job, not thrown.
    GenerationJob run_generation(const NarrativeRequest& request);

    /// Starts a job on a background thread and returns its id.
    std::string submit(NarrativeRequest request);

    /// Same as run_generation; earlier jobs for the request are kept.
    GenerationJob restart(const NarrativeRequest& request);

    std::optional<GenerationJob> job(std::string_view id) const;

    /// Replaces the story of a finished job (after a regeneration).
    /// Throws Error(UnknownJob) or Error(PreconditionViolation) if not Done.
    void update_story(std::string_view id, Story story);

    /// Rewrites chapter `number` with the storywriter and re-illustrates it.
    /// Every other chapter is left untouched.
    Story regenerate_chapter(const Story& story, int number);

    /// Re-runs the illustration stage for chapter `number` with `seed`, or a
    /// fresh seed when none is given. Chapter text is left untouched.
    Story regenerate_illustration(const Story& story, int number, std::optional<std::uint64_t> seed = std::nullopt);

    /// Blocks until every submitted job has finished.
    void wait_idle();

    const PlotOptions& options() const noexcept { return options_; }

private:
    struct JobRecord;

    std::shared_ptr<JobRecord> create_job(const NarrativeRequest& request);
    void execute(JobRecord& record);
    std::vector<ImageDescription> analyze_frames(JobRecord& record, const NarrativeRequest& request);
    Story write_story(JobRecord& record, const NarrativeRequest& request, std::vector<ImageDescription> descriptions);
    IllustrationRecord illustrate(std::string_view chapter_body, std::uint64_t seed,
                                  const std::function<void(std::string)>& log);
    std::uint64_t next_seed();

    AgentSet agents_;
    PlotOptions options_;

    mutable std::mutex jobs_mutex_;
    std::map<std::string, std::shared_ptr<JobRecord>, std::less<>> jobs_;
    std::uint64_t job_counter_ = 0;
    std::vector<std::pair<std::thread, std::shared_ptr<JobRecord>>> workers_;

    std::mutex seed_mutex_;
    std::mt19937_64 seed_engine_;
};

} // namespace imageteller
