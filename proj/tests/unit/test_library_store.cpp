#include "test_support.hpp"

#include "imageteller/library_store.hpp"
#include "imageteller/plot_manager.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace imageteller;
namespace fs = std::filesystem;

namespace {

Story generated(int frames = 2)
{
    PlotOptions o;
    o.image_params.width = 256;
    o.image_params.height = 256;
    PlotManager plot(make_mock_agents(), o);
    return *plot.run_generation(itest::request_of(frames, itest::genre_kind("Satire"))).story;
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoFailure;
}

} // namespace

TEST(LibraryStore, SaveLoadDelete)
{
    itest::TempDir dir;
    LibraryStore store(dir.path());
    const auto story = generated();
    const auto id = store.save_story(story);
    EXPECT_EQ(id.value, 1u);
    EXPECT_TRUE(store.contains(id));
    auto loaded = store.load_story(id);
    EXPECT_EQ(loaded.id, id);
    loaded.id.reset();
    auto expected = story;
    expected.id.reset();
    EXPECT_EQ(loaded, expected);

    const auto png = store.read_file(id, "chapter_1.png");
    ASSERT_TRUE(png);
    EXPECT_EQ(*png, *story.chapters[0].illustration->image_data);
    EXPECT_FALSE(store.read_file(id, "missing.png"));
    EXPECT_FALSE(store.read_file(id, "../next_id"));

    store.delete_story(id);
    EXPECT_FALSE(store.contains(id));
    EXPECT_EQ(code_of([&] { store.load_story(id); }), ErrorCode::NotFound);
    EXPECT_EQ(code_of([&] { store.delete_story(id); }), ErrorCode::NotFound);
    EXPECT_EQ(store.save_story(story).value, 2u);
}

TEST(LibraryStore, ListsNewestFirst)
{
    itest::TempDir dir;
    LibraryStore store(dir.path());
    auto story = generated(1);
    std::vector<StoryId> ids;
    for (int i = 0; i < 3; ++i) {
        story.title = "Story " + std::to_string(i);
        ids.push_back(store.save_story(story));
    }
    const auto entries = store.list_stories();
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].id, ids[2]);
    EXPECT_EQ(entries[2].id, ids[0]);
    EXPECT_EQ(entries[0].title, "Story 2");
    EXPECT_EQ(entries[0].chapter_count, static_cast<int>(story.chapters.size()));
    EXPECT_EQ(entries[0].thumbnail_ref, "chapter_1.png");
    for (std::size_t k = 1; k < entries.size(); ++k)
        EXPECT_GE(entries[k - 1].created_at, entries[k].created_at);
}

TEST(LibraryStore, SurvivesReopenAndCleansStaging)
{
    itest::TempDir dir;
    StoryId id;
    {
        LibraryStore store(dir.path());
        id = store.save_story(generated(1));
    }
    fs::create_directories(dir.path() / "staging" / "leftover");
    std::ofstream(dir.path() / "staging" / "leftover" / "story.json") << "{";
    LibraryStore again(dir.path());
    EXPECT_TRUE(again.contains(id));
    EXPECT_FALSE(fs::exists(dir.path() / "staging" / "leftover"));
    EXPECT_EQ(again.save_story(generated(1)).value, id.value + 1);
}

TEST(LibraryStore, SkipsUnreadableEntries)
{
    itest::TempDir dir;
    LibraryStore store(dir.path());
    store.save_story(generated(1));
    fs::create_directories(dir.path() / "stories" / "99");
    std::ofstream(dir.path() / "stories" / "99" / "story.json") << "not json";
    fs::create_directories(dir.path() / "stories" / "notes");
    EXPECT_EQ(store.list_stories().size(), 1u);
    EXPECT_EQ(code_of([&] { store.load_story(StoryId{99}); }), ErrorCode::CorruptDocument);
}

TEST(LibraryStore, ImportsStoryDirectory)
{
    itest::TempDir dir;
    const auto story = generated(2);
    const auto out = dir.path() / "cli_out";
    write_story_directory(story, out);
    EXPECT_TRUE(fs::exists(out / kManifestName));
    EXPECT_TRUE(fs::exists(out / "frame_1.png"));
    EXPECT_EQ(read_story_directory(out), story);

    LibraryStore store(dir.path() / "lib");
    const auto id = store.import_story(out);
    auto loaded = store.load_story(id);
    loaded.id.reset();
    EXPECT_EQ(loaded, story);
    EXPECT_THROW(store.import_story(dir.path() / "nowhere"), Error);
}

TEST(LibraryStore, FaultHookSeesEveryStep)
{
    itest::TempDir dir;
    std::vector<std::string> points;
    StoreOptions options;
    options.fault_hook = [&](std::string_view p) { points.emplace_back(p); };
    LibraryStore store(dir.path(), options);
    store.save_story(generated(1));
    EXPECT_EQ(points, (std::vector<std::string>{"counter", "files", "manifest", "commit"}));
}

TEST(LibraryStore, FailedSaveLeavesNothingVisible)
{
    itest::TempDir dir;
    StoreOptions options;
    options.fault_hook = [](std::string_view p) {
        if (p == "manifest")
            throw Error(ErrorCode::IoFailure, "injected");
    };
    {
        LibraryStore store(dir.path(), options);
        EXPECT_THROW(store.save_story(generated(1)), Error);
        EXPECT_TRUE(store.list_stories().empty());
    }
    LibraryStore store(dir.path());
    EXPECT_TRUE(store.list_stories().empty());
    EXPECT_EQ(store.save_story(generated(1)).value, 2u);
}

TEST(StoreProperties, Sampled)
{
    for (const auto& r : {itest::store_roundtrip(60, 8), itest::store_id_monotonicity()})
        EXPECT_TRUE(r.ok()) << r.summary();
}
