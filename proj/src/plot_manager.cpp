#include "imageteller/plot_manager.hpp"

#include "imageteller/prompt_engine.hpp"
#include "imageteller/story_parser.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <future>

namespace imageteller {

namespace {

constexpr std::uint64_t kSeedMask = (std::uint64_t{1} << 63) - 1;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Thrown inside a job to end it as Failed.
struct StageFailure {
    ErrorCode code;
    std::string stage;
    std::string message;
    std::optional<int> subject;
};

} // namespace

std::string_view to_string(JobState state) noexcept
{
    switch (state) {
    case JobState::Pending: return "Pending";
    case JobState::Analyzing: return "Analyzing";
    case JobState::Writing: return "Writing";
    case JobState::Illustrating: return "Illustrating";
    case JobState::Done: return "Done";
    case JobState::Failed: return "Failed";
    }
    return "Unknown";
}

struct PlotManager::JobRecord {
    mutable std::mutex mutex;
    GenerationJob job;
    std::atomic<bool> finished{false};

    void log(std::string stage, std::string detail)
    {
        std::lock_guard lock(mutex);
        job.progress_log.push_back({std::chrono::system_clock::now(), std::move(stage), std::move(detail)});
    }

    void enter(JobState state, std::string detail)
    {
        std::lock_guard lock(mutex);
        job.state = state;
        job.progress_log.push_back({std::chrono::system_clock::now(), std::string(to_string(state)), std::move(detail)});
    }

    GenerationJob snapshot() const
    {
        std::lock_guard lock(mutex);
        return job;
    }
};

PlotManager::PlotManager(AgentSet agents, PlotOptions options)
    : agents_(std::move(agents)), options_(options), seed_engine_(std::random_device{}())
{
    agents_.validate();
    options_.image_params.validate();
    if (options_.parse_retries < 0)
        throw Error(ErrorCode::InvalidConfig, "parse_retries must not be negative");
}

PlotManager::~PlotManager()
{
    wait_idle();
}

std::shared_ptr<PlotManager::JobRecord> PlotManager::create_job(const NarrativeRequest& request)
{
    auto record = std::make_shared<JobRecord>();
    std::lock_guard lock(jobs_mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(++job_counter_));
    record->job.id = id;
    record->job.request = request;
    record->job.progress_log.push_back({std::chrono::system_clock::now(), "Pending", "job created"});
    jobs_.emplace(record->job.id, record);
    return record;
}

GenerationJob PlotManager::run_generation(const NarrativeRequest& request)
{
    auto record = create_job(request);
    execute(*record);
    return record->snapshot();
}

GenerationJob PlotManager::restart(const NarrativeRequest& request)
{
    return run_generation(request);
}

std::string PlotManager::submit(NarrativeRequest request)
{
    auto record = create_job(request);
    std::lock_guard lock(jobs_mutex_);
    // Reap threads of jobs that have already finished.
    std::erase_if(workers_, [](auto& worker) {
        if (!worker.second->finished)
            return false;
        worker.first.join();
        return true;
    });
    workers_.emplace_back(std::thread([this, record] { execute(*record); }), record);
    return record->job.id;
}

void PlotManager::wait_idle()
{
    std::vector<std::pair<std::thread, std::shared_ptr<JobRecord>>> workers;
    {
        std::lock_guard lock(jobs_mutex_);
        workers.swap(workers_);
    }
    for (auto& w : workers)
        if (w.first.joinable())
            w.first.join();
}

std::optional<GenerationJob> PlotManager::job(std::string_view id) const
{
    std::shared_ptr<JobRecord> record;
    {
        std::lock_guard lock(jobs_mutex_);
        const auto it = jobs_.find(id);
        if (it == jobs_.end())
            return std::nullopt;
        record = it->second;
    }
    return record->snapshot();
}

void PlotManager::update_story(std::string_view id, Story story)
{
    std::shared_ptr<JobRecord> record;
    {
        std::lock_guard lock(jobs_mutex_);
        const auto it = jobs_.find(id);
        if (it == jobs_.end())
            throw Error(ErrorCode::UnknownJob, "no job with id '" + std::string(id) + "'");
        record = it->second;
    }
    std::lock_guard lock(record->mutex);
    if (record->job.state != JobState::Done)
        throw Error(ErrorCode::PreconditionViolation, "job '" + std::string(id) + "' has not finished");
    record->job.story = std::move(story);
    record->job.progress_log.push_back({std::chrono::system_clock::now(), "Done", "story updated"});
}

std::uint64_t PlotManager::next_seed()
{
    std::lock_guard lock(seed_mutex_);
    return seed_engine_() & kSeedMask;
}

void PlotManager::execute(JobRecord& record)
{
    const auto request = record.snapshot().request;
    try {
        const auto validation = validate_request(request, options_.limits);
        if (!validation.ok())
            throw StageFailure{ErrorCode::ValidationFailed, "Pending", validation.summary(), std::nullopt};

        auto descriptions = analyze_frames(record, request);
        auto story = write_story(record, request, std::move(descriptions));

        {
            std::lock_guard lock(record.mutex);
            record.job.story = story;
            record.job.state = JobState::Illustrating;
            record.job.illustrating_chapter = story.chapters.front().number;
        }
        for (std::size_t k = 0; k < story.chapters.size(); ++k) {
            auto& chapter = story.chapters[k];
            {
                std::lock_guard lock(record.mutex);
                record.job.illustrating_chapter = chapter.number;
            }
            record.log("Illustrating", "chapter " + std::to_string(chapter.number));
            const auto seed = options_.seed
                                  ? splitmix64(*options_.seed + static_cast<std::uint64_t>(chapter.number)) & kSeedMask
                                  : next_seed();
            try {
                chapter.illustration =
                    illustrate(chapter.body, seed, [&](std::string note) { record.log("Illustrating", std::move(note)); });
            } catch (const Error& e) {
                chapter.illustration.reset();
                record.log("Illustrating", "IllustrationFailed(" + std::to_string(chapter.number) +
                                               "): " + std::string(to_string(e.code())) + ": " + e.what() +
                                               "; chapter kept without illustration");
            }
            std::lock_guard lock(record.mutex);
            record.job.story = story;
        }

        std::lock_guard lock(record.mutex);
        record.job.illustrating_chapter.reset();
        record.job.state = JobState::Done;
        record.job.progress_log.push_back(
            {std::chrono::system_clock::now(), "Done", std::to_string(story.chapters.size()) + " chapters"});
    } catch (const StageFailure& f) {
        std::lock_guard lock(record.mutex);
        record.job.state = JobState::Failed;
        record.job.story.reset();
        record.job.illustrating_chapter.reset();
        record.job.failure = JobFailure{f.code, f.stage, f.message, f.subject};
        record.job.progress_log.push_back({std::chrono::system_clock::now(), "Failed",
                                           f.stage + ": " + std::string(to_string(f.code)) + ": " + f.message});
    }
    record.finished = true;
}

std::vector<ImageDescription> PlotManager::analyze_frames(JobRecord& record, const NarrativeRequest& request)
{
    record.enter(JobState::Analyzing, std::to_string(request.frames.size()) + " frames");

    std::vector<std::future<ImageDescription>> pending;
    pending.reserve(request.frames.size());
    for (const auto& frame : request.frames) {
        pending.push_back(std::async(std::launch::async, [this, &frame, &record] {
            const auto prompt = build_analysis_prompt(
                frame.caption ? std::optional<std::string_view>(*frame.caption) : std::nullopt);
            auto description = agents_.analyzer->analyze_image(frame, prompt);
            description.frame_index = frame.index;
            record.log("Analyzing", "frame " + std::to_string(frame.index) + " described");
            return description;
        }));
    }

    std::vector<ImageDescription> descriptions;
    std::optional<StageFailure> failure;
    for (std::size_t k = 0; k < pending.size(); ++k) {
        const int index = request.frames[k].index;
        try {
            descriptions.push_back(pending[k].get());
        } catch (const std::exception& e) {
            const auto code = dynamic_cast<const Error*>(&e) ? to_string(static_cast<const Error&>(e).code())
                                                              : std::string_view("Error");
            if (!failure || index < failure->subject.value_or(index))
                failure = StageFailure{ErrorCode::AnalysisFailed, "Analyzing",
                                       "frame " + std::to_string(index) + ": " + std::string(code) + ": " + e.what(),
                                       index};
        }
    }
    if (failure)
        throw *failure;

    std::sort(descriptions.begin(), descriptions.end(),
              [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
    return descriptions;
}

Story PlotManager::write_story(JobRecord& record, const NarrativeRequest& request,
                               std::vector<ImageDescription> descriptions)
{
    record.enter(JobState::Writing, std::string(kind_name(request.kind)));
    const auto final_prompt = compose_final_prompt(request.kind, descriptions);

    const int attempts = 1 + options_.parse_retries;
    std::string last_problem;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        std::string raw;
        try {
            raw = agents_.writer->generate_narrative(final_prompt);
        } catch (const Error& e) {
            throw StageFailure{ErrorCode::NarrativeFailed, "Writing",
                               std::string(to_string(e.code())) + ": " + e.what(), std::nullopt};
        }
        auto parsed = parse_story(raw);
        for (const auto& w : parsed.warnings)
            record.log("Writing", "parser warning: " + w);
        if (parsed.ok()) {
            Story story = std::move(*parsed.story);
            story.request_snapshot = request;
            story.descriptions = std::move(descriptions);
            story.final_prompt = final_prompt;
            record.log("Writing", "narrative parsed on attempt " + std::to_string(attempt) + ": " +
                                      std::to_string(story.chapters.size()) + " chapters");
            return story;
        }
        last_problem = std::string(to_string(parsed.error->code)) + ": " + parsed.error->message;
        record.log("Writing", "attempt " + std::to_string(attempt) + " could not be parsed (" + last_problem + ")");
    }
    throw StageFailure{ErrorCode::ParseFailedAfterRetries, "Writing",
                       std::to_string(attempts) + " attempts, last: " + last_problem, std::nullopt};
}

IllustrationRecord PlotManager::illustrate(std::string_view chapter_body, std::uint64_t seed,
                                           const std::function<void(std::string)>& log)
{
    const auto event_prompt = build_event_prompt(chapter_body);
    const auto event = std::string(text::trim(agents_.summarizer->summarize_event(event_prompt)));
    if (event.empty())
        throw Error(ErrorCode::AgentBadResponse, "empty event description");
    if (const auto check = check_event_description(event); !check.compliant)
        log("event description has " + std::to_string(check.word_count) + " words (limit " +
            std::to_string(kMaxEventWords) + "); used as is");

    const auto plan = plan_emphasis(event, *agents_.annotator);
    IllustrationRecord illustration;
    illustration.event_description = event;
    illustration.spec = build_illustration_spec(event, plan);
    illustration.seed = seed;

    auto params = options_.image_params;
    params.seed = seed;
    illustration.image_data = agents_.illustrator->generate_image(illustration.spec, params);
    return illustration;
}

Story PlotManager::regenerate_chapter(const Story& story, int number)
{
    const auto* current = story.find_chapter(number);
    if (!current)
        throw Error(ErrorCode::UnknownChapter, "story has no chapter " + std::to_string(number), number);

    const auto prompt = build_rewrite_prompt(story.final_prompt, number, current->title, render_story(story));
    std::string reply;
    try {
        reply = agents_.writer->generate_narrative(prompt);
    } catch (const Error& e) {
        throw Error(ErrorCode::NarrativeFailed,
                    "rewriting chapter " + std::to_string(number) + " failed: " + e.what(), number);
    }
    auto rewritten = parse_chapter_reply(reply);

    Story updated = story;
    auto* chapter = updated.find_chapter(number);
    chapter->title = std::move(rewritten.title);
    chapter->body = std::move(rewritten.body);
    try {
        chapter->illustration = illustrate(chapter->body, next_seed(), [](std::string) {});
    } catch (const Error&) {
        chapter->illustration.reset();
    }
    return updated;
}

Story PlotManager::regenerate_illustration(const Story& story, int number, std::optional<std::uint64_t> seed)
{
    if (!story.find_chapter(number))
        throw Error(ErrorCode::UnknownChapter, "story has no chapter " + std::to_string(number), number);
    Story updated = story;
    auto* chapter = updated.find_chapter(number);
    try {
        chapter->illustration = illustrate(chapter->body, seed ? (*seed & kSeedMask) : next_seed(), [](std::string) {});
    } catch (const Error& e) {
        throw Error(ErrorCode::IllustrationFailed,
                    "illustrating chapter " + std::to_string(number) + " failed: " + e.what(), number);
    }
    return updated;
}

} // namespace imageteller
