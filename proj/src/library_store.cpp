#include "imageteller/library_store.hpp"

#include "imageteller/serialization.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <system_error>

#include <fcntl.h>
#include <unistd.h>

namespace imageteller {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_failure(const std::string& what, const std::error_code& ec)
{
    if (ec == std::errc::no_space_on_device)
        throw Error(ErrorCode::StorageFull, what + ": " + ec.message());
    throw Error(ErrorCode::IoFailure, what + ": " + ec.message());
}

void fsync_path(const fs::path& path, bool directory)
{
    const int fd = ::open(path.c_str(), directory ? (O_RDONLY | O_DIRECTORY) : O_RDONLY);
    if (fd < 0)
        return;
    ::fsync(fd);
    ::close(fd);
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        io_failure("cannot create " + path.string(), std::error_code(errno, std::generic_category()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out)
        io_failure("cannot write " + path.string(), std::error_code(errno, std::generic_category()));
    out.close();
    fsync_path(path, false);
}

void write_text(const fs::path& path, std::string_view text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::optional<Bytes> read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& path)
{
    auto bytes = read_bytes(path);
    if (!bytes)
        throw Error(ErrorCode::NotFound, "cannot read " + path.string());
    return std::string(bytes->begin(), bytes->end());
}

// Bare file names only: the manifest must not reach outside its directory.
bool safe_file_name(std::string_view name)
{
    return !name.empty() && name != "." && name != ".." && name.find('/') == std::string_view::npos &&
           name.find('\\') == std::string_view::npos;
}

std::optional<std::uint64_t> parse_id(const std::string& name)
{
    if (name.empty() || name.size() > 19 || !std::all_of(name.begin(), name.end(), ::isdigit))
        return std::nullopt;
    const auto v = std::stoull(name);
    return v == 0 ? std::nullopt : std::optional(v);
}

std::shared_ptr<std::mutex> writer_lock_for(const fs::path& root)
{
    static std::mutex registry_mutex;
    static std::map<std::string, std::weak_ptr<std::mutex>> registry;
    std::lock_guard lock(registry_mutex);
    auto& slot = registry[root.string()];
    auto existing = slot.lock();
    if (!existing) {
        existing = std::make_shared<std::mutex>();
        slot = existing;
    }
    return existing;
}

std::string random_suffix()
{
    static thread_local std::mt19937_64 engine(std::random_device{}());
    return std::to_string(engine() & 0xFFFFFFFFFFULL);
}

} // namespace

void write_story_directory(const Story& story, const fs::path& dir,
                           std::optional<std::chrono::system_clock::time_point> created_at)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        io_failure("cannot create " + dir.string(), ec);
    auto doc = to_document(story);
    doc.manifest["created_at"] = format_utc(created_at.value_or(std::chrono::system_clock::now()));
    for (const auto& [name, bytes] : doc.files)
        write_file(dir / name, bytes);
    write_text(dir / kManifestName, doc.manifest.dump(2, ' ', false, nlohmann::json::error_handler_t::replace));
}

Story read_story_directory(const fs::path& dir)
{
    const auto manifest_path = dir / kManifestName;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptDocument, manifest_path.string() + ": " + e.what());
    }
    return from_document(manifest, [&](const std::string& name) {
        if (!safe_file_name(name))
            throw Error(ErrorCode::CorruptDocument, "image reference '" + name + "' is not a plain file name");
        auto bytes = read_bytes(dir / name);
        if (!bytes)
            throw Error(ErrorCode::CorruptDocument, "missing image file " + (dir / name).string());
        return std::move(*bytes);
    });
}

LibraryStore::LibraryStore(fs::path root, StoreOptions options)
    : root_(std::move(root)), options_(std::move(options))
{
    std::error_code ec;
    fs::create_directories(root_ / "stories", ec);
    if (!ec)
        fs::create_directories(root_ / "staging", ec);
    if (ec)
        io_failure("cannot open library at " + root_.string(), ec);
    root_ = fs::canonical(root_);
    write_mutex_ = writer_lock_for(root_);

    // Leftovers of interrupted writes are never visible; clear them.
    std::lock_guard lock(*write_mutex_);
    for (const auto& entry : fs::directory_iterator(root_ / "staging", ec))
        fs::remove_all(entry.path(), ec);
}

fs::path LibraryStore::story_dir(StoryId id) const
{
    return root_ / "stories" / std::to_string(id.value);
}

void LibraryStore::fault(std::string_view point) const
{
    if (options_.fault_hook)
        options_.fault_hook(point);
}

StoryId LibraryStore::allocate_id()
{
    std::uint64_t next = 1;
    if (const auto bytes = read_bytes(root_ / "next_id")) {
        const std::string text(bytes->begin(), bytes->end());
        if (const auto v = parse_id(text.substr(0, text.find_first_of("\r\n"))))
            next = *v;
    }
    // Never hand out an id at or below one already on disk.
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_ / "stories", ec))
        if (const auto v = parse_id(entry.path().filename().string()))
            next = std::max(next, *v + 1);

    const auto tmp = root_ / "staging" / ("next_id." + random_suffix());
    write_text(tmp, std::to_string(next + 1) + "\n");
    fs::rename(tmp, root_ / "next_id", ec);
    if (ec)
        io_failure("cannot update id counter", ec);
    fsync_path(root_, true);
    return StoryId{next};
}

StoryId LibraryStore::save_story(const Story& story)
{
    check_story_invariants(story);
    std::lock_guard lock(*write_mutex_);

    const auto id = allocate_id();
    fault("counter");

    Story stored = story;
    stored.id = id;
    const auto staging = root_ / "staging" / (std::to_string(id.value) + "." + random_suffix());
    std::error_code ec;
    try {
        auto doc = to_document(stored);
        doc.manifest["created_at"] = format_utc(std::chrono::system_clock::now());
        fs::create_directories(staging, ec);
        if (ec)
            io_failure("cannot create " + staging.string(), ec);
        for (const auto& [name, bytes] : doc.files)
            write_file(staging / name, bytes);
        fault("files");
        write_text(staging / kManifestName, doc.manifest.dump(2, ' ', false, nlohmann::json::error_handler_t::replace));
        fsync_path(staging, true);
        fault("manifest");

        fs::rename(staging, story_dir(id), ec);
        if (ec)
            io_failure("cannot commit story " + to_string(id), ec);
        fsync_path(root_ / "stories", true);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    fault("commit");
    return id;
}

Story LibraryStore::load_story(StoryId id) const
{
    const auto dir = story_dir(id);
    if (!fs::exists(dir / kManifestName))
        throw Error(ErrorCode::NotFound, "no story with id " + to_string(id));
    auto story = read_story_directory(dir);
    story.id = id;
    return story;
}

bool LibraryStore::contains(StoryId id) const
{
    return fs::exists(story_dir(id) / kManifestName);
}

std::vector<LibraryEntry> LibraryStore::list_stories() const
{
    std::vector<LibraryEntry> entries;
    std::error_code ec;
    for (const auto& dir : fs::directory_iterator(root_ / "stories", ec)) {
        const auto id = parse_id(dir.path().filename().string());
        if (!id)
            continue;
        try {
            const auto manifest = nlohmann::json::parse(read_text(dir.path() / kManifestName));
            LibraryEntry entry;
            entry.id = StoryId{*id};
            entry.title = manifest.at("title").get<std::string>();
            entry.created_at = parse_utc(manifest.at("created_at").get<std::string>());
            entry.chapter_count = static_cast<int>(manifest.at("chapters").size());
            for (const auto& c : manifest.at("chapters")) {
                const auto& il = c.at("illustration");
                if (il.is_object() && il.at("image_ref").is_string()) {
                    entry.thumbnail_ref = ref_file_name(il.at("image_ref").get<std::string>());
                    break;
                }
            }
            entries.push_back(std::move(entry));
        } catch (const std::exception&) {
            // Deleted between directory scan and read.
            continue;
        }
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.created_at != b.created_at ? a.created_at > b.created_at : a.id > b.id;
    });
    return entries;
}

void LibraryStore::delete_story(StoryId id)
{
    std::lock_guard lock(*write_mutex_);
    const auto dir = story_dir(id);
    if (!fs::exists(dir))
        throw Error(ErrorCode::NotFound, "no story with id " + to_string(id));
    // Move out of stories/ first so the entry disappears atomically.
    const auto trash = root_ / "staging" / ("deleted-" + std::to_string(id.value) + "." + random_suffix());
    std::error_code ec;
    fs::rename(dir, trash, ec);
    if (ec)
        io_failure("cannot delete story " + to_string(id), ec);
    fs::remove_all(trash, ec);
}

StoryId LibraryStore::import_story(const fs::path& dir)
{
    auto story = read_story_directory(dir);
    story.id.reset();
    return save_story(story);
}

std::optional<Bytes> LibraryStore::read_file(StoryId id, std::string_view file_name) const
{
    if (!safe_file_name(file_name))
        return std::nullopt;
    return read_bytes(story_dir(id) / std::string(file_name));
}

} // namespace imageteller
