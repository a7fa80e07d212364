#include "imageteller/agents.hpp"

#include "text_util.hpp"

#include <cstdlib>

namespace imageteller {

std::string_view to_string(Backend backend) noexcept
{
    return backend == Backend::Live ? "live" : "mock";
}

std::optional<Backend> parse_backend(std::string_view text) noexcept
{
    const auto t = text::to_lower(text::trim(text));
    if (t == "live")
        return Backend::Live;
    if (t == "mock")
        return Backend::Mock;
    return std::nullopt;
}

void AgentConfig::validate() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (timeout.count() <= 0)
        fail("timeout must be positive");
    if (max_retries < 0)
        fail("max_retries must not be negative");
    if (max_concurrent == 0)
        fail("max_concurrent must be at least 1");
    if (backoff_initial.count() < 0)
        fail("backoff must not be negative");
    if (backend == Backend::Live) {
        if (endpoint.empty())
            fail("a live backend needs an endpoint URL");
        if (credentials.empty())
            fail("a live backend needs credentials");
    }
}

void ImageJobParams::validate() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    for (int side : {width, height})
        if (side < 256 || side > 2048 || side % 8 != 0)
            fail("image sides must be multiples of 8 within [256, 2048], got " + std::to_string(side));
    if (steps < 1 || steps > 150)
        fail("steps must be within [1, 150]");
    if (!(guidance > 0.0 && guidance <= 30.0))
        fail("guidance must be within (0, 30]");
}

void AgentSet::validate() const
{
    if (!analyzer || !writer || !summarizer || !illustrator || !annotator)
        throw Error(ErrorCode::InvalidConfig, "every agent role needs a backend");
}

bool is_retryable(const Error& error) noexcept
{
    switch (error.code()) {
    case ErrorCode::AgentTimeout:
    case ErrorCode::AgentBadResponse:
        return true;
    case ErrorCode::AgentHttpError: {
        const int status = error.subject().value_or(0);
        return status == 0 || status == 408 || status == 429 || status >= 500;
    }
    default:
        return false;
    }
}

CallGate::CallGate(const AgentConfig& config)
    : max_retries_(config.max_retries), backoff_(config.backoff_initial), capacity_(config.max_concurrent)
{
    config.validate();
}

CallGate::Slot::Slot(CallGate& gate) : gate_(gate)
{
    std::unique_lock lock(gate_.mutex_);
    gate_.freed_.wait(lock, [&] { return gate_.in_flight_ < gate_.capacity_; });
    ++gate_.in_flight_;
    gate_.peak_ = std::max(gate_.peak_, gate_.in_flight_);
}

CallGate::Slot::~Slot()
{
    {
        std::lock_guard lock(gate_.mutex_);
        --gate_.in_flight_;
    }
    gate_.freed_.notify_one();
}

std::size_t CallGate::in_flight() const
{
    std::lock_guard lock(mutex_);
    return in_flight_;
}

std::size_t CallGate::peak_in_flight() const
{
    std::lock_guard lock(mutex_);
    return peak_;
}

namespace {

class GatedAnalyzer final : public VisualAnalyzer {
public:
    GatedAnalyzer(std::shared_ptr<VisualAnalyzer> inner, const AgentConfig& policy)
        : inner_(std::move(inner)), gate_(policy) {}
    ImageDescription analyze_image(const InputFrame& frame, std::string_view prompt) override
    {
        return gate_.call([&] { return inner_->analyze_image(frame, prompt); });
    }

private:
    std::shared_ptr<VisualAnalyzer> inner_;
    CallGate gate_;
};

class GatedWriter final : public Storywriter {
public:
    GatedWriter(std::shared_ptr<Storywriter> inner, const AgentConfig& policy)
        : inner_(std::move(inner)), gate_(policy) {}
    std::string generate_narrative(std::string_view prompt) override
    {
        return gate_.call([&] { return inner_->generate_narrative(prompt); });
    }

private:
    std::shared_ptr<Storywriter> inner_;
    CallGate gate_;
};

class GatedSummarizer final : public EventSummarizer {
public:
    GatedSummarizer(std::shared_ptr<EventSummarizer> inner, const AgentConfig& policy)
        : inner_(std::move(inner)), gate_(policy) {}
    std::string summarize_event(std::string_view prompt) override
    {
        return gate_.call([&] { return inner_->summarize_event(prompt); });
    }

private:
    std::shared_ptr<EventSummarizer> inner_;
    CallGate gate_;
};

class GatedIllustrator final : public Illustrator {
public:
    GatedIllustrator(std::shared_ptr<Illustrator> inner, const AgentConfig& policy)
        : inner_(std::move(inner)), gate_(policy) {}
    Bytes generate_image(const IllustrationSpec& spec, const ImageJobParams& params) override
    {
        return gate_.call([&] { return inner_->generate_image(spec, params); });
    }

private:
    std::shared_ptr<Illustrator> inner_;
    CallGate gate_;
};

std::string env_or(const char* name, std::string fallback = {})
{
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

} // namespace

AgentSet with_call_policy(AgentSet agents, const AgentConfig& policy)
{
    agents.validate();
    return AgentSet{
        std::make_shared<GatedAnalyzer>(std::move(agents.analyzer), policy),
        std::make_shared<GatedWriter>(std::move(agents.writer), policy),
        std::make_shared<GatedSummarizer>(std::move(agents.summarizer), policy),
        std::make_shared<GatedIllustrator>(std::move(agents.illustrator), policy),
        std::move(agents.annotator),
    };
}

AgentSet make_mock_agents(const AgentConfig& policy)
{
    AgentSet raw{std::make_shared<MockVisualAnalyzer>(), std::make_shared<MockStorywriter>(),
                 std::make_shared<MockEventSummarizer>(), std::make_shared<MockIllustrator>(),
                 std::make_shared<HeuristicAnnotator>()};
    return with_call_policy(std::move(raw), policy);
}

AgentSet make_live_agents(const AgentConfig& chat, const AgentConfig& image, const LiveAgentOptions& options)
{
    chat.validate();
    image.validate();
    auto chat_client = std::make_shared<const ChatCompletionsClient>(chat);
    auto image_client = std::make_shared<const TextToImageClient>(image);
    std::shared_ptr<EmphasisAnnotator> annotator;
    if (options.llm_emphasis)
        annotator = std::make_shared<ChatEmphasisAnnotator>(chat_client);
    else
        annotator = std::make_shared<HeuristicAnnotator>();

    // The annotator is not gated: plan_emphasis already falls back on failure.
    return AgentSet{
        std::make_shared<GatedAnalyzer>(std::make_shared<LiveVisualAnalyzer>(chat_client), chat),
        std::make_shared<GatedWriter>(std::make_shared<LiveStorywriter>(chat_client), chat),
        std::make_shared<GatedSummarizer>(std::make_shared<LiveEventSummarizer>(chat_client), chat),
        std::make_shared<GatedIllustrator>(std::make_shared<LiveIllustrator>(image_client), image),
        std::move(annotator),
    };
}

AgentSet agents_from_environment(std::optional<Backend> backend_override)
{
    auto backend = backend_override;
    if (!backend) {
        const auto name = env_or("IMAGETELLER_BACKEND", "mock");
        backend = parse_backend(name);
        if (!backend)
            throw Error(ErrorCode::InvalidConfig, "IMAGETELLER_BACKEND must be 'live' or 'mock', got '" + name + "'");
    }
    if (*backend == Backend::Mock)
        return make_mock_agents();

    AgentConfig chat;
    chat.backend = Backend::Live;
    chat.endpoint = env_or("VISION_API_URL");
    chat.credentials = env_or("VISION_API_KEY");
    chat.model_name = env_or("IMAGETELLER_CHAT_MODEL", chat.model_name);

    AgentConfig image;
    image.backend = Backend::Live;
    image.endpoint = env_or("SD_API_URL");
    image.credentials = env_or("SD_API_KEY");
    image.model_name = "stable-diffusion-xl";

    LiveAgentOptions options;
    options.llm_emphasis = text::to_lower(env_or("IMAGETELLER_EMPHASIS")) == "llm";
    return make_live_agents(chat, image, options);
}

} // namespace imageteller
