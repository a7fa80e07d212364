#include "test_support.hpp"

#include "imageteller/library_store.hpp"
#include "imageteller/plot_manager.hpp"
#include "imageteller/serialization.hpp"
#include "imageteller/story_parser.hpp"

#include <algorithm>
#include <csignal>
#include <map>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace itest {

namespace fs = std::filesystem;
using namespace imageteller;

namespace {

std::string non_space_sorted(std::string_view s)
{
    std::string out;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c)))
            out.push_back(c);
    std::sort(out.begin(), out.end());
    return out;
}

std::string trim_copy(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> tokens(std::string_view s)
{
    std::istringstream in{std::string(s)};
    std::vector<std::string> out;
    std::string t;
    while (in >> t)
        out.push_back(t);
    return out;
}

// Documents that mostly parse: a title, an optional preamble and chapters
// whose bodies avoid header lines.
std::string structured_markdown(std::mt19937_64& rng)
{
    auto coin = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng) == 0; };
    auto body_line = [&] {
        std::string line = random_markdown(rng);
        std::string out;
        std::istringstream in(line);
        std::string l;
        while (std::getline(in, l))
            if (l.rfind("#", 0) != 0)
                out += l + "\n";
        return out.empty() ? std::string("plain words here\n") : out;
    };
    std::string doc;
    if (coin(5))
        doc += "Sure! Here is your story:\n\n";
    doc += "# Title " + std::to_string(rng() % 1000) + "\n\n";
    if (coin(3))
        doc += body_line() + "\n";
    const int chapters = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int c = 1; c <= chapters; ++c) {
        switch (rng() % 4) {
        case 0: doc += "## Chapter " + std::to_string(c) + ": Name " + std::to_string(c) + "\n"; break;
        case 1: doc += "## Prologue of sorts\n"; break;
        case 2: doc += "## Chapter " + std::to_string(chapters - c + 1) + ":\n"; break;
        default: doc += "## Chapter " + std::to_string(c * 2) + " :   Spaced title   \n"; break;
        }
        doc += "\n" + body_line();
        if (coin(4))
            doc += "\n### A deeper header\nmore text\n";
        if (coin(8))
            doc += "# stray title line\n";
        doc += coin(2) ? "\n" : "\r\n";
    }
    return doc;
}

void check_parse(Report& r, const std::string& doc, int& successes)
{
    ParseResult result;
    try {
        result = parse_story(doc);
    } catch (const std::exception& e) {
        r.fail(std::string("parse_story threw: ") + e.what());
        return;
    }
    if (result.story.has_value() == result.error.has_value()) {
        r.fail("exactly one of story / error must be set");
        return;
    }

    const auto oracle = oracle_partition(doc);
    std::optional<ErrorCode> expected_error;
    if (!oracle.has_title)
        expected_error = ErrorCode::NoTitle;
    else if (oracle.headers.empty())
        expected_error = ErrorCode::NoChapters;
    else if (std::any_of(oracle.bodies.begin(), oracle.bodies.end(), [](const auto& b) { return b.empty(); }))
        expected_error = ErrorCode::EmptyBody;

    if (expected_error) {
        if (!result.error || result.error->code != *expected_error)
            r.fail("expected " + std::string(to_string(*expected_error)) + " for document:\n" + doc);
        return;
    }
    if (!result.story) {
        r.fail("unexpected " + std::string(to_string(result.error->code)) + " for document:\n" + doc);
        return;
    }
    ++successes;
    const auto& story = *result.story;

    // Lossless partition.
    if (story.title != oracle.title)
        r.fail("title mismatch: '" + story.title + "' vs '" + oracle.title + "'");
    if (result.skipped_prefix != oracle.prefix)
        r.fail("skipped prefix mismatch");
    if (story.preamble.value_or("") != oracle.preamble || (story.preamble && story.preamble->empty()))
        r.fail("preamble mismatch");
    if (story.chapters.size() != oracle.headers.size()) {
        r.fail("chapter count differs from the number of level-2 headers");
        return;
    }
    std::string content = result.skipped_prefix + "\n" + story.preamble.value_or("");
    int previous = 0;
    for (std::size_t k = 0; k < story.chapters.size(); ++k) {
        const auto& c = story.chapters[k];
        if (c.body != oracle.bodies[k])
            r.fail("body mismatch in chapter " + std::to_string(k + 1));
        const auto header = trim_copy(oracle.headers[k]);
        if (header.size() < c.title.size() || header.compare(header.size() - c.title.size(), c.title.size(), c.title))
            r.fail("chapter title is not taken from its header: '" + c.title + "' / '" + header + "'");
        if (c.number <= previous)
            r.fail("chapter numbers not strictly increasing");
        previous = c.number;
        content += "\n" + c.body;
    }
    std::string input_content;
    {
        std::string normalized;
        for (std::size_t k = 0; k < doc.size(); ++k) {
            if (doc[k] == '\r' && k + 1 < doc.size() && doc[k + 1] == '\n')
                continue;
            normalized.push_back(doc[k] == '\r' ? '\n' : doc[k]);
        }
        std::istringstream in(normalized);
        std::string l;
        bool title_seen = false;
        while (std::getline(in, l)) {
            if (!title_seen && l.rfind("# ", 0) == 0) {
                title_seen = true;
                continue;
            }
            if (title_seen && l.rfind("## ", 0) == 0)
                continue;
            input_content += l + "\n";
        }
    }
    if (non_space_sorted(content) != non_space_sorted(input_content))
        r.fail("non-header characters not reproduced exactly once for document:\n" + doc);

    // Idempotence.
    const auto again = parse_story(render_story(story));
    if (!again.story) {
        r.fail("rendered story does not parse");
        return;
    }
    if (again.story->title != story.title || again.story->preamble != story.preamble ||
        again.story->chapters != story.chapters)
        r.fail("parse(render(parse(x))) != parse(x) for document:\n" + doc);
}

std::string balanced_problem(std::string_view s)
{
    int depth = 0;
    for (char c : s) {
        depth += c == '(' ? 1 : c == ')' ? -1 : 0;
        if (depth < 0)
            return "closing parenthesis without an opener";
        if (depth > 3)
            return "nesting deeper than three";
    }
    return depth == 0 ? std::string() : "unclosed parenthesis";
}

PlotOptions fast_options()
{
    PlotOptions options;
    options.image_params.width = 256;
    options.image_params.height = 256;
    return options;
}

std::vector<NarrativeKind> matrix_kinds()
{
    return {StoryFree{}, genre_kind("Tragedy"), DataDriven{}};
}

std::string chapter_bytes(const Chapter& c)
{
    Story one;
    one.title = "t";
    one.chapters.push_back(c);
    const auto doc = to_document(one);
    std::string out = doc.manifest.at("chapters").dump();
    for (const auto& [name, bytes] : doc.files)
        out += name + std::string(bytes.begin(), bytes.end());
    return out;
}

} // namespace

Report parser_properties(int documents, std::uint64_t seed)
{
    Report r;
    std::mt19937_64 rng(seed);
    int successes = 0;
    for (int i = 0; i < documents; ++i, ++r.cases)
        check_parse(r, i % 2 ? random_markdown(rng) : structured_markdown(rng), successes);
    if (successes < documents / 4)
        r.fail("only " + std::to_string(successes) + " documents parsed; generator too hostile");
    return r;
}

Report emphasis_properties(int cases, std::uint64_t seed)
{
    Report r;
    std::mt19937_64 rng(seed);
    const auto style = std::string(default_style_suffix());
    for (int i = 0; i < cases; ++i, ++r.cases) {
        const auto c = random_emphasis_case(rng);
        try {
            validate_plan(c.text, c.plan);
        } catch (const Error& e) {
            r.fail("valid plan rejected: " + std::string(e.what()) + " text='" + c.text + "'");
            continue;
        }
        const auto applied = apply_emphasis(c.text, c.plan);
        if (applied != oracle_apply(c.text, c.plan))
            r.fail("apply differs from left-to-right insertion: '" + applied + "'");
        if (strip_emphasis(applied) != c.text)
            r.fail("strip(apply(t)) != t for '" + c.text + "'");
        if (const auto problem = balanced_problem(applied); !problem.empty())
            r.fail(problem + " in '" + applied + "'");
        auto applied_words = tokens(applied);
        for (auto& w : applied_words)
            w = strip_emphasis(w);
        applied_words.erase(std::remove(applied_words.begin(), applied_words.end(), std::string()),
                            applied_words.end());
        if (applied_words != tokens(c.text))
            r.fail("words not preserved in '" + applied + "'");
        try {
            const auto back = unemphasize(applied);
            auto sorted = c.plan;
            std::sort(sorted.spans.begin(), sorted.spans.end(),
                      [](const auto& a, const auto& b) { return a.start < b.start; });
            if (back.text != c.text || back.plan != sorted)
                r.fail("emphasis does not read back as the same plan: '" + applied + "'");
        } catch (const std::exception& e) {
            r.fail(std::string("emphasized text unreadable: ") + e.what());
        }
        if (!trim_copy(c.text).empty()) {
            const auto spec = build_illustration_spec(c.text, c.plan);
            if (spec.positive != applied + " " + style || spec.negative != negative_prompt())
                r.fail("illustration spec is not emphasized text + style");
        }
        if (!c.plan.spans.empty()) {
            auto overlapping = c.plan;
            overlapping.spans.push_back(c.plan.spans.front());
            try {
                validate_plan(c.text, overlapping);
                r.fail("overlapping plan accepted");
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InvalidSpan)
                    r.fail("overlap reported as " + std::string(to_string(e.code())));
            }
        }
    }
    return r;
}

Report pipeline_matrix()
{
    Report r;
    for (int frames : {1, 2, 4}) {
        for (const auto& kind : matrix_kinds()) {
            ++r.cases;
            const auto label = std::to_string(frames) + " frames, " + std::string(kind_name(kind));
            PlotManager plot(make_mock_agents(), fast_options());
            const auto job = plot.run_generation(request_of(frames, kind));
            if (job.state != JobState::Done || !job.story) {
                r.fail(label + ": job ended " + std::string(to_string(job.state)) +
                       (job.failure ? " (" + job.failure->message + ")" : ""));
                continue;
            }
            const auto& story = *job.story;
            try {
                check_story_invariants(story);
            } catch (const Error& e) {
                r.fail(label + ": " + e.what());
            }
            if (story.chapters.size() != static_cast<std::size_t>(std::max(2, frames)))
                r.fail(label + ": unexpected chapter count " + std::to_string(story.chapters.size()));
            for (const auto& c : story.chapters)
                if (!c.illustration || !c.illustration->image_data)
                    r.fail(label + ": chapter " + std::to_string(c.number) + " has no illustration");
            if (story.descriptions.size() != static_cast<std::size_t>(frames))
                r.fail(label + ": description count");
            if (story.final_prompt != oracle_final_prompt(kind, story.descriptions))
                r.fail(label + ": final prompt differs from the component table composition");
            if (job.progress_log.empty() || job.progress_log.back().stage != "Done")
                r.fail(label + ": progress log does not end in Done");
        }
    }
    return r;
}

Report order_invariance(int runs, std::uint64_t seed)
{
    Report r;
    const auto request = request_of(4, genre_kind("Tragedy"));
    std::optional<std::string> first;
    for (int i = 0; i < runs; ++i, ++r.cases) {
        auto agents = make_mock_agents();
        agents.analyzer = std::make_shared<JitteryAnalyzer>(std::chrono::microseconds(1500), seed + i);
        PlotManager plot(agents, fast_options());
        const auto job = plot.run_generation(request);
        if (!job.story) {
            r.fail("run " + std::to_string(i) + " did not finish");
            continue;
        }
        for (std::size_t k = 0; k < job.story->descriptions.size(); ++k)
            if (job.story->descriptions[k].frame_index != static_cast<int>(k) + 1)
                r.fail("run " + std::to_string(i) + ": description " + std::to_string(k) + " out of order");
        if (!first)
            first = job.story->final_prompt;
        else if (*first != job.story->final_prompt)
            r.fail("run " + std::to_string(i) + ": final prompt differs from run 0");
    }
    if (first && *first != oracle_final_prompt(request.kind, [&] {
            std::vector<ImageDescription> d;
            MockVisualAnalyzer a;
            for (const auto& f : request.frames)
                d.push_back(a.analyze_image(f, build_analysis_prompt(f.caption)));
            return d;
        }()))
        r.fail("final prompt differs from the sequential oracle");
    return r;
}

Report regeneration_locality()
{
    Report r;
    auto options = fast_options();
    options.seed = 1234;
    PlotManager plot(make_mock_agents(), options);
    const auto job = plot.run_generation(request_of(3, genre_kind("Mystery")));
    if (!job.story) {
        r.fail("generation failed");
        return r;
    }
    const auto& base = *job.story;

    auto same_outside = [&](const Story& updated, int n, const std::string& what) {
        ++r.cases;
        if (updated.title != base.title || updated.preamble != base.preamble || updated.final_prompt != base.final_prompt ||
            updated.descriptions != base.descriptions || updated.request_snapshot != base.request_snapshot)
            r.fail(what + ": story-level fields changed");
        if (updated.chapters.size() != base.chapters.size()) {
            r.fail(what + ": chapter count changed");
            return;
        }
        for (std::size_t k = 0; k < base.chapters.size(); ++k) {
            const bool target = base.chapters[k].number == n;
            const bool same = chapter_bytes(base.chapters[k]) == chapter_bytes(updated.chapters[k]);
            if (!target && !same)
                r.fail(what + ": chapter " + std::to_string(base.chapters[k].number) + " changed");
            if (target && same)
                r.fail(what + ": target chapter unchanged");
        }
    };

    const auto rewritten = plot.regenerate_chapter(base, 2);
    same_outside(rewritten, 2, "regenerate_chapter(2)");
    if (rewritten.chapters[1].number != 2 || rewritten.chapters[1].body == base.chapters[1].body)
        r.fail("regenerate_chapter(2): body not replaced or number changed");

    const auto redrawn = plot.regenerate_illustration(base, 1);
    same_outside(redrawn, 1, "regenerate_illustration(1)");
    const auto& c1 = redrawn.chapters[0];
    if (c1.body != base.chapters[0].body || c1.title != base.chapters[0].title)
        r.fail("regenerate_illustration(1): chapter text changed");
    if (!c1.illustration || c1.illustration->seed == base.chapters[0].illustration->seed)
        r.fail("regenerate_illustration(1): seed not refreshed");

    const auto pinned = plot.regenerate_illustration(base, 3, base.chapters[2].illustration->seed);
    ++r.cases;
    if (pinned.chapters[2] != base.chapters[2])
        r.fail("regenerate_illustration with the original seed does not reproduce the image");
    return r;
}

Report parse_retry_attempts()
{
    Report r;
    ++r.cases;
    auto agents = make_mock_agents();
    auto writer = std::make_shared<UnparseableWriter>();
    agents.writer = writer;
    PlotManager plot(agents, fast_options());
    const auto job = plot.run_generation(request_of(2, StoryFree{}));
    if (job.state != JobState::Failed)
        r.fail("job should fail, ended " + std::string(to_string(job.state)));
    if (!job.failure || job.failure->code != ErrorCode::ParseFailedAfterRetries)
        r.fail("failure code should be ParseFailedAfterRetries");
    if (writer->calls != 3)
        r.fail("expected exactly 3 writer attempts, saw " + std::to_string(writer->calls.load()));
    if (job.story)
        r.fail("failed job exposes a story");
    return r;
}

Report store_roundtrip(int stories, std::uint64_t seed)
{
    Report r;
    TempDir dir;
    std::mt19937_64 rng(seed);
    std::vector<Story> saved;
    {
        LibraryStore store(dir.path());
        std::uint64_t last = 0;
        for (int i = 0; i < stories; ++i, ++r.cases) {
            auto story = random_story(rng);
            const auto id = store.save_story(story);
            if (id.value <= last)
                r.fail("id " + std::to_string(id.value) + " not above " + std::to_string(last));
            last = id.value;
            story.id = id;
            if (store.load_story(id) != story)
                r.fail("story " + std::to_string(id.value) + " does not round-trip");
            saved.push_back(std::move(story));
        }
    }
    LibraryStore reopened(dir.path());
    for (const auto& s : saved)
        if (reopened.load_story(*s.id) != s)
            r.fail("story " + std::to_string(s.id->value) + " changed after reopening the store");
    if (reopened.list_stories().size() != saved.size())
        r.fail("library lists " + std::to_string(reopened.list_stories().size()) + " entries");
    return r;
}

Report store_id_monotonicity()
{
    Report r;
    TempDir dir;
    std::mt19937_64 rng(7);
    std::vector<std::uint64_t> ids;
    {
        LibraryStore store(dir.path());
        for (int i = 0; i < 3; ++i)
            ids.push_back(store.save_story(random_story(rng)).value);
        store.delete_story(StoryId{ids[1]});
        ids.push_back(store.save_story(random_story(rng)).value);
    }
    LibraryStore reopened(dir.path());
    ids.push_back(reopened.save_story(random_story(rng)).value);
    r.cases = static_cast<int>(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k)
        if (ids[k] != k + 1)
            r.fail("id " + std::to_string(k) + " is " + std::to_string(ids[k]) + ", expected " + std::to_string(k + 1));
    try {
        reopened.load_story(StoryId{ids[1]});
        r.fail("deleted story still loads");
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotFound)
            r.fail("deleted story load gave " + std::string(to_string(e.code())));
    }
    return r;
}

Report store_crash_injection()
{
    Report r;
    std::mt19937_64 rng(99);
    for (std::string point : {"counter", "files", "manifest", "commit"}) {
        for (bool sigkill : {false, true}) {
            ++r.cases;
            const auto label = point + (sigkill ? " (SIGKILL)" : " (_exit)");
            TempDir dir;
            const auto baseline = random_story(rng);
            const auto victim = random_story(rng);
            { LibraryStore(dir.path()).save_story(baseline); }

            const pid_t pid = ::fork();
            if (pid == 0) {
                StoreOptions options;
                options.fault_hook = [&](std::string_view at) {
                    if (at != point)
                        return;
                    if (sigkill)
                        ::raise(SIGKILL);
                    ::_exit(86);
                };
                try {
                    LibraryStore(dir.path(), options).save_story(victim);
                } catch (...) {
                    ::_exit(1);
                }
                ::_exit(0);
            }
            int status = 0;
            ::waitpid(pid, &status, 0);
            const bool crashed = sigkill ? (WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL)
                                         : (WIFEXITED(status) && WEXITSTATUS(status) == 86);
            if (!crashed) {
                r.fail(label + ": child did not stop at the fault point");
                continue;
            }

            LibraryStore store(dir.path());
            const auto entries = store.list_stories();
            for (const auto& e : entries) {
                try {
                    store.load_story(e.id);
                } catch (const std::exception& ex) {
                    r.fail(label + ": listed entry " + std::to_string(e.id.value) + " unreadable: " + ex.what());
                }
            }
            const std::size_t expected = point == "commit" ? 2 : 1;
            if (entries.size() != expected)
                r.fail(label + ": " + std::to_string(entries.size()) + " entries visible, expected " +
                       std::to_string(expected));
            if (point == "commit" && !entries.empty()) {
                auto loaded = store.load_story(entries.front().id);
                loaded.id.reset();
                if (loaded != victim)
                    r.fail(label + ": committed story differs");
            }
            if (fs::exists(dir.path() / "staging") && !fs::is_empty(dir.path() / "staging"))
                r.fail(label + ": staging not cleaned on open");
            const auto next = store.save_story(baseline);
            for (const auto& e : entries)
                if (next <= e.id)
                    r.fail(label + ": id reused after crash");
        }
    }
    return r;
}

} // namespace itest
