#pragma once

#include "imageteller/domain.hpp"
#include "imageteller/prompt_engine.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

namespace imageteller {

enum class Backend { Live, Mock };

std::string_view to_string(Backend backend) noexcept;
std::optional<Backend> parse_backend(std::string_view text) noexcept;

struct AgentConfig {
    Backend backend = Backend::Mock;
    std::string endpoint;    // full URL, live only
    std::string credentials; // bearer token, live only
    std::string model_name = "gpt-4o";
    std::chrono::milliseconds timeout{120'000};
    int max_retries = 2;
    std::optional<double> temperature;
    /// Delay before the first retry; doubles for each further retry.
    std::chrono::milliseconds backoff_initial{1'000};
    std::size_t max_concurrent = 4;

    /// Throws Error(InvalidConfig).
    void validate() const;
};

struct ImageJobParams {
    int width = 1024;
    int height = 1024;
    int steps = 30;
    double guidance = 7.0;
    std::uint64_t seed = 0;

    /// Sides in [256, 2048] and multiples of 8, steps in [1, 150], guidance in
    /// (0, 30]. Throws Error(InvalidConfig).
    void validate() const;
};

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

class VisualAnalyzer {
public:
    virtual ~VisualAnalyzer() = default;
    virtual ImageDescription analyze_image(const InputFrame& frame, std::string_view prompt) = 0;
};

class Storywriter {
public:
    virtual ~Storywriter() = default;
    virtual std::string generate_narrative(std::string_view prompt) = 0;
};

class EventSummarizer {
public:
    virtual ~EventSummarizer() = default;
    virtual std::string summarize_event(std::string_view prompt) = 0;
};

class Illustrator {
public:
    virtual ~Illustrator() = default;
    virtual Bytes generate_image(const IllustrationSpec& spec, const ImageJobParams& params) = 0;
};

struct AgentSet {
    std::shared_ptr<VisualAnalyzer> analyzer;
    std::shared_ptr<Storywriter> writer;
    std::shared_ptr<EventSummarizer> summarizer;
    std::shared_ptr<Illustrator> illustrator;
    std::shared_ptr<EmphasisAnnotator> annotator;

    /// Throws Error(InvalidConfig) if a role is missing.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Call policy
// ---------------------------------------------------------------------------

/// True for failures worth another attempt: timeouts, malformed replies,
/// connection failures (status 0), 408, 429 and 5xx.
bool is_retryable(const Error& error) noexcept;

/// Per-backend concurrency cap plus retry with exponential backoff.
class CallGate {
public:
    explicit CallGate(const AgentConfig& config);

    CallGate(const CallGate&) = delete;
    CallGate& operator=(const CallGate&) = delete;

    template <typename F>
    auto call(F&& attempt) -> decltype(attempt())
    {
        for (int tries = 0;; ++tries) {
            try {
                Slot slot(*this);
                return attempt();
            } catch (const Error& e) {
                if (!is_retryable(e) || tries >= max_retries_)
                    throw;
            }
            std::this_thread::sleep_for(backoff_ * (1LL << std::min(tries, 20)));
        }
    }

    std::size_t in_flight() const;
    std::size_t peak_in_flight() const;

private:
    class Slot {
    public:
        explicit Slot(CallGate& gate);
        ~Slot();
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        CallGate& gate_;
    };

    int max_retries_;
    std::chrono::milliseconds backoff_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable freed_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
};

/// Wraps every role of `agents` so calls go through one CallGate per role
/// built from `policy`.
AgentSet with_call_policy(AgentSet agents, const AgentConfig& policy);

// ---------------------------------------------------------------------------
// Mock backends: deterministic and offline
// ---------------------------------------------------------------------------

/// "Frame <i>: <caption | an unlabeled scene> \u2014 deterministic description <hash8(bytes)>."
class MockVisualAnalyzer final : public VisualAnalyzer {
public:
    ImageDescription analyze_image(const InputFrame& frame, std::string_view prompt) override;
};

/// Markdown story titled "Mock Story <hash8(prompt)>" with max(2, frames)
/// chapters; answers a chapter-rewrite prompt with that single chapter.
class MockStorywriter final : public Storywriter {
public:
    std::string generate_narrative(std::string_view prompt) override;
};

/// First 40 words of the chapter text embedded in the prompt.
class MockEventSummarizer final : public EventSummarizer {
public:
    static constexpr std::size_t kWords = 40;
    std::string summarize_event(std::string_view prompt) override;
};

/// PNG of the requested size: solid colour derived from the positive prompt,
/// with the seed drawn on it.
class MockIllustrator final : public Illustrator {
public:
    Bytes generate_image(const IllustrationSpec& spec, const ImageJobParams& params) override;
};

/// Number of numbered description lines in a narrative prompt's image block.
std::size_t count_described_frames(std::string_view prompt) noexcept;

AgentSet make_mock_agents(const AgentConfig& policy = {});

// ---------------------------------------------------------------------------
// Live backends
// ---------------------------------------------------------------------------

/// Chat-completions style HTTP client shared by the vision and text roles.
class ChatCompletionsClient {
public:
    explicit ChatCompletionsClient(AgentConfig config);

    /// One user message made of `text` plus the frames as inline base64 image
    /// parts. Single attempt; retries belong to CallGate.
    std::string complete(std::string_view text, std::span<const InputFrame> images = {}) const;

    const AgentConfig& config() const noexcept { return config_; }

private:
    AgentConfig config_;
};

/// Text-to-image HTTP client: POST {prompt, negative_prompt, width, height,
/// steps, cfg_scale, seed}; accepts {"images":[b64]}, {"image":b64} or raw
/// image bytes in reply.
class TextToImageClient {
public:
    explicit TextToImageClient(AgentConfig config);
    Bytes generate(const IllustrationSpec& spec, const ImageJobParams& params) const;

private:
    AgentConfig config_;
};

class LiveVisualAnalyzer final : public VisualAnalyzer {
public:
    explicit LiveVisualAnalyzer(std::shared_ptr<const ChatCompletionsClient> client) : client_(std::move(client)) {}
    ImageDescription analyze_image(const InputFrame& frame, std::string_view prompt) override;

private:
    std::shared_ptr<const ChatCompletionsClient> client_;
};

class LiveStorywriter final : public Storywriter {
public:
    explicit LiveStorywriter(std::shared_ptr<const ChatCompletionsClient> client) : client_(std::move(client)) {}
    std::string generate_narrative(std::string_view prompt) override;

private:
    std::shared_ptr<const ChatCompletionsClient> client_;
};

class LiveEventSummarizer final : public EventSummarizer {
public:
    explicit LiveEventSummarizer(std::shared_ptr<const ChatCompletionsClient> client) : client_(std::move(client)) {}
    std::string summarize_event(std::string_view prompt) override;

private:
    std::shared_ptr<const ChatCompletionsClient> client_;
};

class LiveIllustrator final : public Illustrator {
public:
    explicit LiveIllustrator(std::shared_ptr<const TextToImageClient> client) : client_(std::move(client)) {}
    Bytes generate_image(const IllustrationSpec& spec, const ImageJobParams& params) override;

private:
    std::shared_ptr<const TextToImageClient> client_;
};

/// Emphasis annotator backed by the chat model. Expects a JSON array of
/// {"phrase", "level"}; phrases are located left to right in the description.
/// Throws Error(AnnotatorFailure) on any failure.
class ChatEmphasisAnnotator final : public EmphasisAnnotator {
public:
    explicit ChatEmphasisAnnotator(std::shared_ptr<const ChatCompletionsClient> client) : client_(std::move(client)) {}
    std::vector<EmphasisSpan> propose(std::string_view event_description) override;

private:
    std::shared_ptr<const ChatCompletionsClient> client_;
};

/// Converts an annotator reply to spans. Throws Error(AnnotatorFailure).
std::vector<EmphasisSpan> spans_from_annotation(std::string_view event_description, std::string_view reply);

struct LiveAgentOptions {
    bool llm_emphasis = false;
};

AgentSet make_live_agents(const AgentConfig& chat, const AgentConfig& image, const LiveAgentOptions& options = {});

/// Builds agents from VISION_API_URL, VISION_API_KEY, SD_API_URL, SD_API_KEY
/// and IMAGETELLER_BACKEND (live|mock, default mock). IMAGETELLER_CHAT_MODEL
/// overrides the model name; IMAGETELLER_EMPHASIS=llm selects the chat
/// annotator.
AgentSet agents_from_environment(std::optional<Backend> backend_override = std::nullopt);

} // namespace imageteller
