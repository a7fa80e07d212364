#pragma once

#include "imageteller/agents.hpp"
#include "imageteller/domain.hpp"
#include "imageteller/prompt_engine.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace itest {

namespace it = imageteller;

// sha256 of the five genre descriptions joined with '\n', computed outside
// this code base from the golden genres.tsv.
inline constexpr std::string_view kGenreDescriptionsSha256 =
    "b76d50329e02481f8e3cb5d61a8452c1a8b6be5c6e697b7fac92b37aadbcb069";

std::filesystem::path fixtures_dir();
std::string fixture(std::string_view name);
/// Fixture text with one trailing newline removed.
std::string fixture_text(std::string_view name);
/// (name, description) rows of genres.tsv.
std::vector<std::pair<std::string, std::string>> golden_genres();

it::InputFrame png_frame(int index, std::uint32_t shade, std::optional<std::string> caption = std::nullopt);
it::NarrativeRequest request_of(int frames, it::NarrativeKind kind);
it::NarrativeKind genre_kind(std::string_view name);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Final narrative prompt assembled from the golden component fixtures.
std::string oracle_final_prompt(const it::NarrativeKind& kind, std::span<const it::ImageDescription> descriptions);

/// Left-to-right insertion of the parentheses of a valid plan.
std::string oracle_apply(std::string_view text, const it::EmphasisPlan& plan);

struct Unemphasized {
    std::string text;
    it::EmphasisPlan plan;
};
/// Reads the plan back out of an emphasized string ("((x))" -> level 2).
Unemphasized unemphasize(std::string_view emphasized);

struct Partition {
    bool has_title = false;
    std::string prefix;
    std::string title;
    std::string preamble;
    std::vector<std::string> headers;
    std::vector<std::string> bodies;
};
/// Line-level split of a markdown story: title line, "## " lines, the rest.
Partition oracle_partition(std::string_view markdown);

// ---------------------------------------------------------------------------
// Random inputs
// ---------------------------------------------------------------------------

std::string random_markdown(std::mt19937_64& rng);
it::Story random_story(std::mt19937_64& rng);

struct EmphasisCase {
    std::string text;
    it::EmphasisPlan plan;
};
EmphasisCase random_emphasis_case(std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Instrumented agents
// ---------------------------------------------------------------------------

/// Sleeps a random 0..max_delay before delegating.
class JitteryAnalyzer final : public it::VisualAnalyzer {
public:
    JitteryAnalyzer(std::chrono::microseconds max_delay, std::uint64_t seed);
    it::ImageDescription analyze_image(const it::InputFrame& frame, std::string_view prompt) override;

private:
    it::MockVisualAnalyzer inner_;
    std::chrono::microseconds max_delay_;
    std::mutex mutex_;
    std::mt19937_64 rng_;
};

/// Returns a reply with no markdown headers and counts the calls.
class UnparseableWriter final : public it::Storywriter {
public:
    std::string generate_narrative(std::string_view prompt) override;
    std::atomic<int> calls{0};
};

/// Mock illustrator that can be held for a while on each call.
class SlowIllustrator final : public it::Illustrator {
public:
    it::Bytes generate_image(const it::IllustrationSpec& spec, const it::ImageJobParams& params) override;
    std::atomic<int> delay_ms{0};
    std::atomic<int> calls{0};

private:
    it::MockIllustrator inner_;
};

// ---------------------------------------------------------------------------
// Property and contract runners shared by the unit and acceptance suites
// ---------------------------------------------------------------------------

struct Report {
    int cases = 0;
    std::vector<std::string> failures;

    bool ok() const noexcept { return failures.empty(); }
    void fail(std::string message);
    std::string summary() const;
};

Report parser_properties(int documents, std::uint64_t seed);
Report emphasis_properties(int cases, std::uint64_t seed);
Report pipeline_matrix();
Report order_invariance(int runs, std::uint64_t seed);
Report regeneration_locality();
Report parse_retry_attempts();
Report store_roundtrip(int stories, std::uint64_t seed);
Report store_id_monotonicity();
Report store_crash_injection();
Report api_contract();
Report api_concurrent_regeneration();

} // namespace itest
