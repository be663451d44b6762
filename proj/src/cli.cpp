// SPDX-License-Identifier: Apache-2.0
#include <imagent/agent.hpp>
#include <imagent/bench.hpp>
#include <imagent/cli.hpp>
#include <imagent/errors.hpp>
#include <imagent/http_backend.hpp>
#include <imagent/http_service.hpp>
#include <imagent/seeding.hpp>
#include <imagent/sim_backend.hpp>
#include <imagent/text.hpp>
#include <imagent/trace_store.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace imagent::cli
{

namespace fs = std::filesystem;

namespace
{

int to_int(const std::string& key, const std::string& value)
{
    int out = 0;
    auto const s = text::trim(value);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument(key + ": not an integer: '" + value + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value)
{
    std::uint64_t out = 0;
    auto const s = text::trim(value);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument(key + ": not an unsigned integer: '" + value + "'");
    return out;
}

double to_double(const std::string& key, const std::string& value)
{
    std::istringstream in { std::string(text::trim(value)) };
    in.imbue(std::locale::classic());
    double out = 0.0;
    if (!(in >> out) || !in.eof())
        throw std::invalid_argument(key + ": not a number: '" + value + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& value)
{
    auto const v = text::to_lower(text::trim(value));
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument(key + ": not a boolean: '" + value + "'");
}

// Shortest text that reads back as the same double.
std::string format_double(double v)
{
    std::array<char, 32> buf {};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

} // namespace

void CliConfig::set(const std::string& rawKey, const std::string& value)
{
    std::string key(text::trim(rawKey));
    std::ranges::replace(key, '-', '_');
    if (key == "backend")
    {
        auto v = text::to_lower(text::trim(value));
        if (v != "sim" && v != "http")
            throw std::invalid_argument("backend must be 'sim' or 'http'");
        backend = v;
    }
    else if (key == "endpoint")
        endpoint = text::trim(value);
    else if (key == "api_key")
        api_key = text::trim(value);
    else if (key == "out_dir")
        out_dir = std::string(text::trim(value));
    else if (key == "seed")
        run.seed = to_u64(key, value);
    else if (key == "t_max")
        run.t_max = to_int(key, value);
    else if (key == "best_of_n")
        run.best_of_n = to_int(key, value);
    else if (key == "parse_retries")
        run.parse_retries = to_int(key, value);
    else if (key == "history_window")
        run.history_window = to_int(key, value);
    else if (key == "parallel_candidates")
        run.parallel_candidates = to_bool(key, value);
    else if (key == "parallel")
        parallel = to_int(key, value);
    else if (key == "noise_rate")
        noise_rate = to_double(key, value);
    else if (key == "refine_gain")
        refine_gain = to_int(key, value);
    else if (key == "sim_no_edit")
        sim_no_edit = to_bool(key, value);
    else if (key == "sim_no_image_understanding")
        sim_no_image_understanding = to_bool(key, value);
    else
        throw std::invalid_argument("unknown setting '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> CliConfig::effective() const
{
    std::vector<std::pair<std::string, std::string>> out {
        { "backend", backend },
        { "best_of_n", std::to_string(run.best_of_n) },
        { "history_window", std::to_string(run.history_window) },
        { "parse_retries", std::to_string(run.parse_retries) },
        { "seed", std::to_string(run.seed) },
        { "t_max", std::to_string(run.t_max) },
    };
    if (backend == "http")
        out.emplace_back("endpoint", endpoint);
    else
    {
        out.emplace_back("noise_rate", format_double(noise_rate));
        out.emplace_back("refine_gain", std::to_string(refine_gain));
        out.emplace_back("sim_no_edit", sim_no_edit ? "true" : "false");
        out.emplace_back("sim_no_image_understanding", sim_no_image_understanding ? "true" : "false");
    }
    std::ranges::sort(out);
    return out;
}

std::map<std::string, std::string> parse_config_file(const fs::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw std::runtime_error("cannot read config file " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        if (text::trim(line).empty())
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos || text::trim(line.substr(0, eq)).empty())
            throw std::runtime_error(file.string() + ":" + std::to_string(lineNo) + ": expected key = value");
        out[std::string(text::trim(line.substr(0, eq)))] = std::string(text::trim(line.substr(eq + 1)));
    }
    return out;
}

std::optional<fs::path> default_config_path()
{
    if (auto const* xdg = std::getenv("XDG_CONFIG_HOME"); xdg && *xdg)
        return fs::path(xdg) / "imagent" / "config";
    if (auto const* home = std::getenv("HOME"); home && *home)
        return fs::path(home) / ".config" / "imagent" / "config";
    return std::nullopt;
}

namespace
{

struct UsageError: std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// Flag values are kept as strings so they pass through the same CliConfig::set as every other layer.
struct Flags
{
    std::map<std::string, std::string> values;
    std::optional<std::string> config_file;
    std::optional<std::string> run_id;

    void add_to(CLI::App& app, const std::vector<std::string>& keys)
    {
        for (auto const& key: keys)
        {
            std::string flag = "--" + key;
            std::ranges::replace(flag, '_', '-');
            app.add_option_function<std::string>(
                flag, [this, key](const std::string& v) { values[key] = v; }, describe(key));
        }
        app.add_option_function<std::string>(
            "--config", [this](const std::string& v) { config_file = v; }, "Config file (key = value lines)");
    }

    static std::string describe(const std::string& key)
    {
        static const std::map<std::string, std::string> kHelp {
            { "backend", "Model backend: sim or http" },
            { "endpoint", "Model server URL for the http backend" },
            { "seed", "Run seed" },
            { "t_max", "Maximum number of executed actions" },
            { "best_of_n", "Candidates for best-of-N sampling" },
            { "out_dir", "Root directory for run directories" },
            { "parallel", "Concurrent bench runs" },
            { "noise_rate", "Simulated world: per-mention keyword drop probability" },
            { "refine_gain", "Simulated world: keyword gaps closed per edit" },
            { "parse_retries", "Controller re-asks after an unparseable reply" },
        };
        auto it = kHelp.find(key);
        return it == kHelp.end() ? key : it->second;
    }
};

const std::vector<std::string> kRunKeys { "backend", "endpoint", "seed", "t_max", "best_of_n", "out_dir",
                                          "noise_rate", "refine_gain", "parse_retries" };

CliConfig merge(const Flags& flags, const std::vector<std::pair<std::string, std::string>>& recorded = {})
{
    CliConfig config;
    std::optional<fs::path> file = flags.config_file ? std::optional<fs::path>(*flags.config_file) : default_config_path();
    try
    {
        if (file && (flags.config_file || fs::exists(*file)))
            for (auto const& [k, v]: parse_config_file(*file))
                config.set(k, v);

        if (auto const* v = std::getenv("IMAGENT_ENDPOINT"); v && *v)
            config.set("endpoint", v);
        if (auto const* v = std::getenv("IMAGENT_API_KEY"); v && *v)
            config.set("api_key", v);
        if (auto const* v = std::getenv("IMAGENT_OUT_DIR"); v && *v)
            config.set("out_dir", v);

        // A replayed run takes its world from the trace; only explicit flags perturb it.
        for (auto const& [k, v]: recorded)
            if (k != "seed" && k != "t_max" && k != "best_of_n" && k != "history_window" && k != "parse_retries")
                config.set(k, v);

        for (auto const& [k, v]: flags.values)
            config.set(k, v);
        config.run.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(e.what());
    }
    catch (const std::runtime_error& e)
    {
        throw UsageError(e.what());
    }
    if (config.parallel < 1)
        throw UsageError("parallel must be at least 1");
    if (config.backend == "http" && config.endpoint.empty())
        throw UsageError("the http backend needs --endpoint or IMAGENT_ENDPOINT");
    return config;
}

std::unique_ptr<Backend> make_backend(const CliConfig& config, std::shared_ptr<ArtifactStore> store)
{
    if (config.backend == "http")
    {
        HttpConfig http;
        http.endpoint = config.endpoint;
        http.api_key = config.api_key;
        return std::make_unique<HttpBackend>(std::move(http), std::move(store));
    }
    SimWorldConfig sim;
    sim.noise_rate = config.noise_rate;
    sim.refine_gain = config.refine_gain;
    sim.capabilities.supports_edit = !config.sim_no_edit;
    sim.capabilities.supports_image_in_understand = !config.sim_no_image_understanding;
    try
    {
        sim.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(e.what());
    }
    return std::make_unique<SimulatedBackend>(std::move(sim), std::move(store));
}

std::string hex64(std::uint64_t v)
{
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

// Same inputs give the same run id, so re-running a command rewrites its own directory.
std::string derive_run_id(std::string_view kind, const CliConfig& config, std::string_view extra)
{
    std::string key(kind);
    for (auto const& [k, v]: config.effective())
        key += "\n" + k + "=" + v;
    key += "\n";
    key += extra;
    return std::string(kind) + "-" + hex64(fnv1a64(key)).substr(0, 12);
}

void log_decision(std::ostream& err, int step, const Decision& d)
{
    err << "step " << step << ": " << wire_name(d.action) << " - " << text::truncate(text::single_line(d.rationale), 160);
    if (d.fallback)
        err << " (fallback)";
    err << "\n";
}

int finish_run(const Trace& trace, const fs::path& dir, const ArtifactStore& store, std::ostream& out,
               std::ostream& err)
{
    auto file = save_trace(trace, dir, &store);
    out << "status=" << terminal_name(trace.terminal.status) << "\n";
    out << "steps=" << trace.steps.size() << "\n";
    if (trace.final_image)
        out << "final_image=" << fs::absolute(dir / kArtifactDirName / trace.final_image->file_name()).string() << "\n";
    if (trace.terminal.status == TerminalStatus::Aborted)
    {
        out << "reason=" << text::single_line(trace.terminal.reason) << "\n";
        err << "run aborted: " << trace.terminal.reason << "\n";
    }
    out << "trace=" << fs::absolute(file.path).string() << "\n";
    return trace.terminal.status == TerminalStatus::Aborted ? kExitAborted : kExitOk;
}

int cmd_run(Mode mode, const std::string& prompt, const std::optional<std::string>& image, const Flags& flags,
            std::ostream& out, std::ostream& err)
{
    auto config = merge(flags);
    if (mode == Mode::Editing && (!image || !fs::is_regular_file(*image)))
        throw UsageError("input image not found: " + image.value_or(""));

    std::string extra = prompt;
    if (image)
        extra += "\n" + sha256_hex([&] {
            std::ifstream in(*image, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        }());
    auto const runId = flags.run_id.value_or(derive_run_id(mode == Mode::Editing ? "edit" : "gen", config, extra));
    auto const dir = config.out_dir / runId;
    fs::remove_all(dir);
    auto store = std::make_shared<ArtifactStore>(dir / kArtifactDirName);
    auto backend = make_backend(config, store);

    RunOptions options;
    options.on_decision = [&err](int step, const Decision& d) { log_decision(err, step, d); };

    out << "run_id=" << runId << "\n";
    Trace trace;
    if (mode == Mode::Editing)
    {
        ImageRef input;
        try
        {
            input = store->import_file(*image);
        }
        catch (const BackendError& e)
        {
            throw UsageError(std::string("unreadable input image: ") + e.what());
        }
        trace = run_editing(config.run, *backend, prompt, input, options);
    }
    else
    {
        trace = run_generation(config.run, *backend, prompt, options);
    }
    trace.effective_settings = config.effective();
    return finish_run(trace, dir, *store, out, err);
}

int cmd_bench(const std::optional<std::string>& corpusFile, std::optional<std::size_t> synthetic,
              const std::string& variantList, const Flags& flags, bool saveTraces, std::ostream& out,
              std::ostream& err)
{
    auto config = merge(flags);
    auto store = std::make_shared<ArtifactStore>();
    auto backend = make_backend(config, store);

    std::vector<CorpusEntry> corpus;
    std::string corpusKey;
    if (corpusFile)
    {
        if (!fs::is_regular_file(*corpusFile))
            throw UsageError("corpus not found: " + *corpusFile);
        try
        {
            corpus = load_corpus(*corpusFile);
        }
        catch (const std::exception& e)
        {
            throw UsageError(e.what());
        }
        std::ifstream in(*corpusFile, std::ios::binary);
        corpusKey = sha256_hex(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    else if (synthetic)
    {
        corpus = synthetic_corpus(*synthetic, sim::Vocabulary(SimWorldConfig {}.vocabulary), config.run.seed);
        corpusKey = "synthetic:" + std::to_string(*synthetic);
    }
    else
    {
        throw UsageError("bench needs --corpus or --synthetic");
    }
    if (corpus.empty())
        throw UsageError("corpus is empty");

    std::vector<PolicyVariant> variants;
    try
    {
        for (auto const& spec: text::split(variantList, ','))
            if (!text::trim(spec).empty())
                variants.push_back(PolicyVariant::parse(spec, config.run.seed));
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(e.what());
    }
    if (variants.empty())
        throw UsageError("no variants given");

    auto const runId = flags.run_id.value_or(derive_run_id("bench", config, corpusKey + "\n" + variantList));
    auto const dir = config.out_dir / runId;
    fs::remove_all(dir);

    BenchOptions options;
    options.parallel = config.parallel;
    if (saveTraces)
        options.trace_root = dir / "traces";

    err << "bench: " << corpus.size() << " prompts x " << variants.size() << " variants\n";
    auto report = run_bench(corpus, variants, config.run, *backend, options);
    write_report(report, dir);
    err << report.to_text();

    std::size_t failed = 0;
    for (auto const& r: report.rows)
        if (r.terminal == "aborted")
            ++failed;
    out << "run_id=" << runId << "\n";
    out << "rows=" << report.rows.size() << "\n";
    out << "failed_runs=" << failed << "\n";
    for (auto const& a: report.aggregate)
        out << "mean_score[" << a.variant << "]=" << format_double(a.mean_score) << "\n";
    out << "report=" << fs::absolute(dir / "report.json").string() << "\n";
    out << "report_text=" << fs::absolute(dir / "report.txt").string() << "\n";
    return kExitOk;
}

Trace load_or_usage(const std::string& path)
{
    if (!fs::exists(path))
        throw UsageError("trace not found: " + path);
    return load_trace(path);
}

int cmd_replay(const std::string& tracePath, const Flags& flags, std::ostream& out, std::ostream& err)
{
    auto original = load_or_usage(tracePath);
    auto config = merge(flags, original.effective_settings);

    auto const runId = flags.run_id.value_or(
        derive_run_id("replay", config, fs::weakly_canonical(tracePath).string()));
    auto const dir = config.out_dir / runId;
    fs::remove_all(dir);
    auto store = std::make_shared<ArtifactStore>(dir / kArtifactDirName);
    auto backend = make_backend(config, store);

    auto replayed = replay(original, *backend);
    replayed.effective_settings = config.effective();
    auto diff = diff_traces(original, replayed);
    auto file = save_trace(replayed, dir, store.get());

    for (auto const& d: diff.divergences)
        err << "step " << d.step << ": " << d.field << " differs: " << text::truncate(text::single_line(d.original), 120)
            << " -> " << text::truncate(text::single_line(d.replayed), 120) << "\n";
    out << "run_id=" << runId << "\n";
    out << "verdict=" << (diff.identical() ? "identical" : "diverged") << "\n";
    out << "divergences=" << diff.divergences.size() << "\n";
    out << "status=" << terminal_name(replayed.terminal.status) << "\n";
    out << "trace=" << fs::absolute(file.path).string() << "\n";
    if (!diff.identical())
    {
        std::ofstream diffOut(dir / "diff.json");
        diffOut << diff.to_json().dump(2) << "\n";
        out << "diff=" << fs::absolute(dir / "diff.json").string() << "\n";
    }
    return replayed.terminal.status == TerminalStatus::Aborted ? kExitAborted : kExitOk;
}

int cmd_validate(const std::string& tracePath, std::ostream& out, std::ostream& err)
{
    if (!fs::exists(tracePath))
        throw UsageError("trace not found: " + tracePath);
    auto violations = validate(tracePath);
    for (auto const& v: violations)
        err << "violation: " << v << "\n";
    out << "valid=" << (violations.empty() ? "true" : "false") << "\n";
    out << "violations=" << violations.size() << "\n";
    return violations.empty() ? kExitOk : kExitAborted;
}

int cmd_serve_sim(const std::string& host, int port, const Flags& flags, std::ostream& out, std::ostream& err)
{
    auto config = merge(flags);
    config.backend = "sim";
    auto backend = make_backend(config, std::make_shared<ArtifactStore>());
    httplib::Server server;
    serve_backend(server, *backend);
    int bound = port;
    if (port == 0)
        bound = server.bind_to_any_port(host);
    else if (!server.bind_to_port(host, port))
        bound = -1;
    if (bound < 0)
    {
        err << "cannot bind " << host << ":" << port << "\n";
        return kExitAborted;
    }
    out << "endpoint=http://" << host << ":" << bound << "\n" << std::flush;
    err << "serving the simulated backend; Ctrl-C to stop\n";
    return server.listen_after_bind() ? kExitOk : kExitAborted;
}

} // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app { "Image agent runtime: controller-driven generation and editing" };
    app.name("imagent");
    app.require_subcommand(1);

    Flags flags;
    std::string prompt;
    std::optional<std::string> image;
    std::optional<std::string> corpus;
    std::optional<std::size_t> synthetic;
    std::string variants = "fixed:naive_generation,random,controller";
    std::string tracePath;
    std::string host = "127.0.0.1";
    int port = 8080;
    bool saveTraces = false;

    auto addRunId = [&](CLI::App* sub) {
        sub->add_option_function<std::string>(
            "--run-id", [&](const std::string& v) { flags.run_id = v; }, "Run directory name (default: derived from inputs)");
    };

    auto* gen = app.add_subcommand("run-gen", "Generate an image from a prompt");
    gen->add_option("prompt", prompt, "Text prompt")->required();
    flags.add_to(*gen, kRunKeys);
    addRunId(gen);

    auto* edit = app.add_subcommand("run-edit", "Edit an image according to an instruction");
    edit->add_option("prompt", prompt, "Editing instruction")->required();
    edit->add_option("image", image, "Input image file")->required();
    flags.add_to(*edit, kRunKeys);
    addRunId(edit);

    auto* bench = app.add_subcommand("bench", "Compare policy variants over a prompt corpus");
    bench->add_option("--corpus", corpus, "JSONL corpus: {id, prompt, mode, image_path?} per line");
    bench->add_option("--synthetic", synthetic, "Use N seeded prompts from the simulated vocabulary instead");
    bench->add_option("--variants", variants,
                      "Comma-separated: controller, random[:seed], fixed:<action>")->capture_default_str();
    bench->add_flag("--save-traces", saveTraces, "Keep every run's trace under <run dir>/traces");
    auto benchKeys = kRunKeys;
    benchKeys.push_back("parallel");
    flags.add_to(*bench, benchKeys);
    addRunId(bench);

    auto* rep = app.add_subcommand("replay", "Re-execute a trace's decisions and diff the outcome");
    rep->add_option("trace", tracePath, "trace.json or its run directory")->required();
    flags.add_to(*rep, kRunKeys);
    addRunId(rep);

    auto* val = app.add_subcommand("validate", "Check a trace against the schema and its artifacts");
    val->add_option("trace", tracePath, "trace.json or its run directory")->required();

    auto* serve = app.add_subcommand("serve-sim", "Serve the simulated backend over the wire protocol");
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "0 picks a free port")->capture_default_str();
    flags.add_to(*serve, { "noise_rate", "refine_gain", "seed" });

    try
    {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i)
            args.emplace_back(argv[i]);
        app.parse(std::move(args));
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n\n";
        auto const* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    try
    {
        if (gen->parsed())
            return cmd_run(Mode::Generation, prompt, std::nullopt, flags, out, err);
        if (edit->parsed())
            return cmd_run(Mode::Editing, prompt, image, flags, out, err);
        if (bench->parsed())
            return cmd_bench(corpus, synthetic, variants, flags, saveTraces, out, err);
        if (rep->parsed())
            return cmd_replay(tracePath, flags, out, err);
        if (val->parsed())
            return cmd_validate(tracePath, out, err);
        if (serve->parsed())
            return cmd_serve_sim(host, port, flags, out, err);
    }
    catch (const UsageError& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    catch (const TraceError& e)
    {
        err << "error: " << e.what() << "\n";
        out << "error=" << trace_error_kind_name(e.kind()) << "\n";
        return kExitAborted;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitAborted;
    }
    return kExitUsage;
}

} // namespace imagent::cli
