// imageteller command line: one-shot generation, the web service, and the genre list.

#include "imageteller/agents.hpp"
#include "imageteller/library_store.hpp"
#include "imageteller/plot_manager.hpp"
#include "imageteller/service_api.hpp"
#include "imageteller/story_parser.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace imageteller;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kGeneration = 3, kIo = 4 };

std::optional<MediaType> media_type_of(const fs::path& file)
{
    auto ext = file.extension().string();
    if (ext.empty())
        return std::nullopt;
    return parse_media_type(ext.substr(1));
}

Bytes read_bytes(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot read " + file.string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

// "<file name>\t<caption>" per line.
std::map<std::string, std::string> read_captions(const fs::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot read captions file " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            continue;
        out[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return out;
}

struct GenerateArgs {
    fs::path in;
    fs::path out;
    std::optional<fs::path> captions;
    std::optional<std::string> genre;
    bool data_driven = false;
    std::string backend;
    std::optional<std::uint64_t> seed;
    int max_frames = 10;
};

int generate(const GenerateArgs& args)
{
    NarrativeRequest request;
    try {
        if (!fs::is_directory(args.in)) {
            std::cerr << "error [input]: " << args.in << " is not a directory\n";
            return kIo;
        }
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(args.in))
            if (entry.is_regular_file() && media_type_of(entry.path()))
                files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
        const auto captions = args.captions ? read_captions(*args.captions) : std::map<std::string, std::string>{};
        int index = 0;
        for (const auto& file : files) {
            InputFrame frame;
            frame.index = ++index;
            frame.image_data = read_bytes(file);
            frame.media_type = *media_type_of(file);
            if (const auto it = captions.find(file.filename().string()); it != captions.end())
                frame.caption = it->second;
            request.frames.push_back(std::move(frame));
        }
    } catch (const Error& e) {
        std::cerr << "error [input]: " << e.what() << "\n";
        return kIo;
    }

    if (args.data_driven && args.genre) {
        std::cerr << "error [validation]: --genre and --data-driven are exclusive\n";
        return kValidation;
    }
    if (args.data_driven)
        request.kind = DataDriven{};
    if (args.genre) {
        const auto* entry = genre_catalog().find(*args.genre);
        if (!entry) {
            std::cerr << "error [validation]: unknown genre '" << *args.genre
                      << "'; valid genres: " << genre_catalog().names_joined() << "\n";
            return kValidation;
        }
        request.kind = entry->kind;
    }

    PlotOptions options;
    options.limits.max_frames = args.max_frames;
    options.seed = args.seed;
    const auto validation = validate_request(request, options.limits);
    if (!validation.ok()) {
        for (const auto& v : validation.violations)
            std::cerr << "error [validation]: " << to_string(v.code) << ": " << v.message << "\n";
        return kValidation;
    }

    AgentSet agents;
    try {
        agents = agents_from_environment(parse_backend(args.backend));
    } catch (const Error& e) {
        std::cerr << "error [config]: " << e.what() << "\n";
        return kValidation;
    }

    PlotManager plot(std::move(agents), options);
    const auto job = plot.run_generation(request);
    if (job.state != JobState::Done || !job.story) {
        const auto& f = job.failure;
        std::cerr << "error [" << (f ? f->stage : "generation") << "]: "
                  << (f ? std::string(to_string(f->code)) + ": " + f->message : std::string("generation failed"))
                  << "\n";
        return kGeneration;
    }
    for (const auto& e : job.progress_log)
        std::cerr << "[" << e.stage << "] " << e.detail << "\n";

    try {
        write_story_directory(*job.story, args.out);
        std::ofstream md(args.out / "story.md", std::ios::binary);
        md << render_story(*job.story);
        if (!md)
            throw Error(ErrorCode::IoFailure, "cannot write story.md");
    } catch (const Error& e) {
        std::cerr << "error [output]: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [output]: " << e.what() << "\n";
        return kIo;
    }
    std::cout << (args.out / "story.md").string() << "\n";
    return kOk;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path store = "library";
    std::optional<fs::path> static_dir;
    std::string backend;
};

StoryService* g_service = nullptr;

extern "C" void on_signal(int)
{
    if (g_service)
        g_service->stop();
}

int serve(const ServeArgs& args)
{
    ServiceOptions options;
    options.store_root = args.store;
    options.static_dir = args.static_dir;
    if (const char* token = std::getenv("IMAGETELLER_API_TOKEN"); token && *token)
        options.api_token = token;
    try {
        StoryService service(agents_from_environment(parse_backend(args.backend)), options);
        const int port = service.start(args.host, args.port);
        std::cerr << "listening on http://" << args.host << ":" << port << "\n";
        g_service = &service;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        service.wait();
        g_service = nullptr;
    } catch (const Error& e) {
        std::cerr << "error [serve]: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error [serve]: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Turns a sequence of images into an illustrated story."};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate_cmd = app.add_subcommand("generate", "Generate a story from a directory of images");
    generate_cmd->add_option("--in", gen.in, "Directory of frames (png, jpg, webp), ordered by file name")->required();
    generate_cmd->add_option("--out", gen.out, "Output directory")->required();
    generate_cmd->add_option("--captions", gen.captions, "File of '<file name><TAB><caption>' lines");
    generate_cmd->add_option("--genre", gen.genre, "Story genre");
    generate_cmd->add_flag("--data-driven", gen.data_driven, "Data storytelling narrative");
    generate_cmd->add_option("--backend", gen.backend, "live or mock")->check(CLI::IsMember({"live", "mock"}));
    generate_cmd->add_option("--seed", gen.seed, "Fixes illustration seeds");
    generate_cmd->add_option("--max-frames", gen.max_frames, "Frame limit")->check(CLI::PositiveNumber);

    ServeArgs srv;
    auto* serve_cmd = app.add_subcommand("serve", "Run the web service");
    serve_cmd->add_option("--host", srv.host);
    serve_cmd->add_option("--port", srv.port);
    serve_cmd->add_option("--store", srv.store, "Library directory");
    serve_cmd->add_option("--static", srv.static_dir, "Directory of the browser UI");
    serve_cmd->add_option("--backend", srv.backend, "live or mock")->check(CLI::IsMember({"live", "mock"}));

    auto* genres_cmd = app.add_subcommand("genres", "List the narrative genres");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    if (*generate_cmd)
        return generate(gen);
    if (*serve_cmd)
        return serve(srv);
    if (*genres_cmd) {
        for (const auto& e : genre_catalog().entries())
            std::cout << e.name << "\t" << e.description << "\n";
        return kOk;
    }
    return kUsage;
}
