// SPDX-License-Identifier: Apache-2.0
#include <imagent/agent.hpp>
#include <imagent/errors.hpp>
#include <imagent/trace_store.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace imagent
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

template <typename T, typename F>
json optional_to_json(const std::optional<T>& value, F&& convert)
{
    return value ? convert(*value) : json(nullptr);
}

json image_to_json(const ImageRef& image)
{
    json j { { "digest", image.digest }, { "format", format_name(image.format) }, { "file", image.file_name() } };
    if (image.width)
        j["width"] = *image.width;
    if (image.height)
        j["height"] = *image.height;
    return j;
}

json decision_to_json(const Decision& d)
{
    return {
        { "action", wire_name(d.action) }, { "rationale", d.rationale },       { "raw", d.raw },
        { "parse_attempts", d.parse_attempts }, { "fallback", d.fallback }, { "images_omitted", d.images_omitted },
    };
}

json observation_to_json(const Observation& o)
{
    json j {
        { "step", o.step },
        { "action", wire_name(o.action) },
        { "rationale", o.rationale },
        { "feedback", o.feedback },
        { "score", optional_to_json(o.score, [](double s) { return json(s); }) },
        { "failed", o.failed },
    };
    j["candidate_scores"] = optional_to_json(o.candidate_scores, [](auto const& scores) {
        json arr = json::array();
        for (auto const& s: scores)
            arr.push_back(s ? json(*s) : json(nullptr));
        return arr;
    });
    return j;
}

// -- reading --------------------------------------------------------------------------------

[[noreturn]] void malformed(const std::string& what)
{
    throw TraceError(TraceErrorKind::Malformed, what);
}

const json& field(const json& j, const char* key)
{
    if (!j.is_object())
        malformed(std::string("expected an object holding '") + key + "'");
    auto it = j.find(key);
    if (it == j.end())
        malformed(std::string("missing field '") + key + "'");
    return *it;
}

std::string get_string(const json& j, const char* key)
{
    auto const& v = field(j, key);
    if (!v.is_string())
        malformed(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& j, const char* key)
{
    auto const& v = field(j, key);
    if (!v.is_boolean())
        malformed(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

template <typename Int>
Int get_int(const json& j, const char* key)
{
    auto const& v = field(j, key);
    if (!v.is_number_integer())
        malformed(std::string("field '") + key + "' must be an integer");
    return v.get<Int>();
}

ActionKind get_action(const json& j, const char* key)
{
    auto a = action_from_name(get_string(j, key));
    if (!a)
        malformed(std::string("field '") + key + "' is not an action name");
    return *a;
}

std::optional<ImageRef> image_from_json(const json& j, const fs::path& artifact_dir)
{
    if (j.is_null())
        return std::nullopt;
    ImageRef image;
    image.digest = get_string(j, "digest");
    auto format = format_from_name(get_string(j, "format"));
    if (!format)
        malformed("unknown image format");
    image.format = *format;
    if (j.contains("width"))
        image.width = get_int<int>(j, "width");
    if (j.contains("height"))
        image.height = get_int<int>(j, "height");
    if (get_string(j, "file") != image.file_name())
        malformed("image file name does not match its digest: " + get_string(j, "file"));
    if (!artifact_dir.empty())
        image.path = (artifact_dir / image.file_name()).string();
    return image;
}

Decision decision_from_json(const json& j)
{
    Decision d;
    d.action = get_action(j, "action");
    d.rationale = get_string(j, "rationale");
    d.raw = get_string(j, "raw");
    d.parse_attempts = get_int<int>(j, "parse_attempts");
    d.fallback = get_bool(j, "fallback");
    d.images_omitted = get_bool(j, "images_omitted");
    return d;
}

Observation observation_from_json(const json& j)
{
    Observation o;
    o.step = get_int<int>(j, "step");
    o.action = get_action(j, "action");
    o.rationale = get_string(j, "rationale");
    o.feedback = get_string(j, "feedback");
    o.failed = get_bool(j, "failed");
    if (auto const& s = field(j, "score"); !s.is_null())
    {
        if (!s.is_number())
            malformed("score must be a number");
        o.score = s.get<double>();
    }
    if (auto const& cs = field(j, "candidate_scores"); !cs.is_null())
    {
        if (!cs.is_array())
            malformed("candidate_scores must be an array");
        std::vector<std::optional<double>> scores;
        for (auto const& s: cs)
        {
            if (s.is_null())
                scores.emplace_back();
            else if (s.is_number())
                scores.emplace_back(s.get<double>());
            else
                malformed("candidate score must be a number or null");
        }
        o.candidate_scores = std::move(scores);
    }
    return o;
}

std::optional<std::string> read_text(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path resolve_trace_file(const fs::path& path)
{
    return fs::is_directory(path) ? path / kTraceFileName : path;
}

std::vector<ImageRef> referenced_images(const Trace& trace)
{
    std::vector<ImageRef> out;
    auto add = [&](const std::optional<ImageRef>& image) {
        if (image)
            out.push_back(*image);
    };
    add(trace.initial_image);
    for (auto const& s: trace.steps)
    {
        add(s.image_before);
        add(s.image_after);
    }
    add(trace.final_image);
    return out;
}

std::string digest_or_none(const std::optional<ImageRef>& image)
{
    return image ? image->digest : "none";
}

} // namespace

json trace_to_json(const Trace& trace, bool include_durations)
{
    json steps = json::array();
    for (std::size_t i = 0; i < trace.steps.size(); ++i)
    {
        auto const& s = trace.steps[i];
        json step {
            { "index", i + 1 },
            { "decision", decision_to_json(s.decision) },
            { "observation", observation_to_json(s.observation) },
            { "prompt_before", s.prompt_before },
            { "prompt_after", s.prompt_after },
            { "image_before", optional_to_json(s.image_before, image_to_json) },
            { "image_after", optional_to_json(s.image_after, image_to_json) },
        };
        if (include_durations)
            step["duration_ms"] = s.duration_ms;
        steps.push_back(std::move(step));
    }

    json settings = json::object();
    for (auto const& [k, v]: trace.effective_settings)
        settings[k] = v;

    return {
        { "schema_version", kTraceSchemaVersion },
        { "template_version", trace.template_version },
        { "mode", mode_name(trace.mode) },
        { "backend", trace.backend },
        { "config",
          {
              { "t_max", trace.config.t_max },
              { "best_of_n", trace.config.best_of_n },
              { "seed", trace.config.seed },
              { "parse_retries", trace.config.parse_retries },
              { "history_window", trace.config.history_window },
              { "parallel_candidates", trace.config.parallel_candidates },
          } },
        { "settings", settings },
        { "initial_prompt", trace.initial_prompt },
        { "initial_image", optional_to_json(trace.initial_image, image_to_json) },
        { "steps", steps },
        { "stop_decision", optional_to_json(trace.stop_decision, decision_to_json) },
        { "terminal", { { "status", terminal_name(trace.terminal.status) }, { "reason", trace.terminal.reason } } },
        { "final_image", optional_to_json(trace.final_image, image_to_json) },
        { "artifact_dir", kArtifactDirName },
    };
}

Trace trace_from_json(const json& j, const fs::path& artifact_dir)
{
    if (!j.is_object())
        malformed("trace must be a JSON object");
    auto const version = get_int<int>(j, "schema_version");
    if (version != kTraceSchemaVersion)
        throw TraceError(TraceErrorKind::SchemaMismatch, "unsupported schema_version " + std::to_string(version)
                                                             + " (expected " + std::to_string(kTraceSchemaVersion)
                                                             + ")");
    Trace t;
    t.template_version = get_string(j, "template_version");
    auto mode = mode_from_name(get_string(j, "mode"));
    if (!mode)
        malformed("unknown mode");
    t.mode = *mode;
    t.backend = get_string(j, "backend");

    auto const& c = field(j, "config");
    t.config.t_max = get_int<int>(c, "t_max");
    t.config.best_of_n = get_int<int>(c, "best_of_n");
    t.config.seed = get_int<std::uint64_t>(c, "seed");
    t.config.parse_retries = get_int<int>(c, "parse_retries");
    t.config.history_window = get_int<int>(c, "history_window");
    t.config.parallel_candidates = get_bool(c, "parallel_candidates");

    auto const& settings = field(j, "settings");
    if (!settings.is_object())
        malformed("settings must be an object");
    for (auto const& [k, v]: settings.items())
    {
        if (!v.is_string())
            malformed("settings values must be strings");
        t.effective_settings.emplace_back(k, v.get<std::string>());
    }

    t.initial_prompt = get_string(j, "initial_prompt");
    t.initial_image = image_from_json(field(j, "initial_image"), artifact_dir);

    auto const& steps = field(j, "steps");
    if (!steps.is_array())
        malformed("steps must be an array");
    for (auto const& s: steps)
    {
        StepRecord r;
        r.decision = decision_from_json(field(s, "decision"));
        r.observation = observation_from_json(field(s, "observation"));
        r.prompt_before = get_string(s, "prompt_before");
        r.prompt_after = get_string(s, "prompt_after");
        r.image_before = image_from_json(field(s, "image_before"), artifact_dir);
        r.image_after = image_from_json(field(s, "image_after"), artifact_dir);
        if (s.contains("duration_ms"))
        {
            if (!s["duration_ms"].is_number())
                malformed("duration_ms must be a number");
            r.duration_ms = s["duration_ms"].get<double>();
        }
        t.steps.push_back(std::move(r));
    }

    if (auto const& sd = field(j, "stop_decision"); !sd.is_null())
        t.stop_decision = decision_from_json(sd);

    auto const& term = field(j, "terminal");
    auto status = terminal_from_name(get_string(term, "status"));
    if (!status)
        malformed("unknown terminal status");
    t.terminal = { *status, get_string(term, "reason") };
    t.final_image = image_from_json(field(j, "final_image"), artifact_dir);
    return t;
}

TraceFile save_trace(const Trace& trace, const fs::path& dir, const ArtifactStore* source)
{
    std::error_code ec;
    fs::create_directories(dir / kArtifactDirName, ec);
    if (ec)
        throw TraceError(TraceErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

    ArtifactStore target(dir / kArtifactDirName);
    for (auto const& image: referenced_images(trace))
    {
        ImageRef local = image;
        local.path = (dir / kArtifactDirName / image.file_name()).string();
        if (target.contains(local))
            continue;
        if (!source)
            throw TraceError(TraceErrorKind::DanglingArtifact, "artifact missing: " + image.file_name());
        try
        {
            source->export_to(image, dir / kArtifactDirName);
        }
        catch (const BackendError& e)
        {
            throw TraceError(TraceErrorKind::DanglingArtifact, e.what());
        }
    }

    auto const file = dir / kTraceFileName;
    auto tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw TraceError(TraceErrorKind::Io, "cannot write " + tmp.string());
        out << trace_to_json(trace).dump(2) << "\n";
        if (!out)
            throw TraceError(TraceErrorKind::Io, "write failed: " + tmp.string());
    }
    fs::rename(tmp, file, ec);
    if (ec)
        throw TraceError(TraceErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
    return { file, kTraceSchemaVersion, fs::path(kArtifactDirName) };
}

Trace load_trace(const fs::path& path)
{
    auto const file = resolve_trace_file(path);
    auto content = read_text(file);
    if (!content)
        throw TraceError(TraceErrorKind::Io, "cannot read " + file.string());
    auto j = json::parse(*content, nullptr, false);
    if (j.is_discarded())
        throw TraceError(TraceErrorKind::Malformed, "not valid JSON: " + file.string());
    fs::path artifactDir = file.parent_path() / kArtifactDirName;
    if (j.is_object() && j.contains("artifact_dir") && j["artifact_dir"].is_string())
        artifactDir = file.parent_path() / j["artifact_dir"].get<std::string>();
    return trace_from_json(j, artifactDir);
}

std::vector<std::string> validate(const fs::path& path)
{
    std::vector<std::string> v;
    Trace t;
    try
    {
        t = load_trace(path);
    }
    catch (const TraceError& e)
    {
        v.emplace_back(e.what());
        return v;
    }

    auto const n = static_cast<int>(t.steps.size());
    if (n > t.config.t_max)
        v.push_back("steps (" + std::to_string(n) + ") exceed t_max (" + std::to_string(t.config.t_max) + ")");
    for (int i = 0; i < n; ++i)
    {
        auto const& s = t.steps[static_cast<std::size_t>(i)];
        auto const where = "step " + std::to_string(i + 1) + ": ";
        if (s.decision.action == ActionKind::Stop)
            v.push_back(where + "STOP recorded as an executed step");
        if (s.observation.action != s.decision.action)
            v.push_back(where + "observation action differs from decision");
        if (s.observation.step != i + 1)
            v.push_back(where + "observation step index is " + std::to_string(s.observation.step));
        if (s.observation.score && !(*s.observation.score >= 0.0 && *s.observation.score <= 1.0))
            v.push_back(where + "score outside [0, 1]");
        bool const isBestOfN = s.decision.action == ActionKind::BestOfN;
        if (isBestOfN != s.observation.candidate_scores.has_value())
            v.push_back(where + "candidate_scores must be present exactly for best_of_N_sampling");
        if (s.observation.candidate_scores
            && static_cast<int>(s.observation.candidate_scores->size()) != t.config.best_of_n)
            v.push_back(where + "candidate_scores length differs from best_of_n");
        if (i > 0)
        {
            auto const& prev = t.steps[static_cast<std::size_t>(i - 1)];
            if (prev.prompt_after != s.prompt_before)
                v.push_back(where + "prompt_before does not continue the previous step");
            if (digest_or_none(prev.image_after) != digest_or_none(s.image_before))
                v.push_back(where + "image_before does not continue the previous step");
        }
        else if (s.prompt_before != t.initial_prompt)
        {
            v.push_back(where + "prompt_before differs from initial_prompt");
        }
    }
    if (t.terminal.status == TerminalStatus::Stopped
        && (!t.stop_decision || t.stop_decision->action != ActionKind::Stop))
        v.emplace_back("terminal is stopped but no STOP decision is recorded");
    if (t.terminal.status == TerminalStatus::MaxStepsReached && n != t.config.t_max)
        v.emplace_back("terminal is max_steps_reached but fewer than t_max steps ran");
    if (t.mode == Mode::Editing && !t.initial_image)
        v.emplace_back("editing trace without an initial image");

    ArtifactStore reader;
    std::set<std::string> checked;
    for (auto const& image: referenced_images(t))
    {
        if (!checked.insert(image.digest).second)
            continue;
        try
        {
            (void) reader.read(image);
        }
        catch (const BackendError& e)
        {
            v.push_back(std::string("artifact: ") + e.what());
        }
    }
    return v;
}

Trace replay(const Trace& trace, Backend& backend)
{
    std::vector<Decision> recorded;
    for (auto const& s: trace.steps)
        recorded.push_back(s.decision);
    if (trace.stop_decision)
        recorded.push_back(*trace.stop_decision);

    auto cursor = std::make_shared<std::size_t>(0);
    RunOptions options;
    options.decisions = [recorded, cursor](const AgentState&) {
        if (*cursor >= recorded.size())
        {
            Decision stop;
            stop.action = ActionKind::Stop;
            stop.rationale = "recorded decisions exhausted";
            return stop;
        }
        return recorded[(*cursor)++];
    };

    Trace out;
    if (trace.mode == Mode::Editing)
    {
        if (!trace.initial_image)
            throw TraceError(TraceErrorKind::Malformed, "editing trace without an initial image");
        ImageRef input = *trace.initial_image;
        try
        {
            input = backend.artifacts().put(backend.artifacts().read(*trace.initial_image), trace.initial_image->format);
        }
        catch (const BackendError&)
        {
            // Left as-is: run_editing reports the unreadable input as an abort.
        }
        out = run_editing(trace.config, backend, trace.initial_prompt, input, options);
    }
    else
    {
        out = run_generation(trace.config, backend, trace.initial_prompt, options);
    }
    out.effective_settings = trace.effective_settings;
    return out;
}

json TraceDiff::to_json() const
{
    json arr = json::array();
    for (auto const& d: divergences)
        arr.push_back({ { "step", d.step }, { "field", d.field }, { "original", d.original }, { "replayed", d.replayed } });
    return { { "identical", identical() }, { "divergences", arr } };
}

TraceDiff diff_traces(const Trace& original, const Trace& replayed)
{
    TraceDiff diff;
    auto note = [&](int step, std::string fieldName, std::string a, std::string b) {
        if (a != b)
            diff.divergences.push_back({ step, std::move(fieldName), std::move(a), std::move(b) });
    };

    note(0, "step_count", std::to_string(original.steps.size()), std::to_string(replayed.steps.size()));
    auto const common = std::min(original.steps.size(), replayed.steps.size());
    for (std::size_t i = 0; i < common; ++i)
    {
        auto const& a = original.steps[i];
        auto const& b = replayed.steps[i];
        auto const step = static_cast<int>(i + 1);
        note(step, "action", std::string(wire_name(a.decision.action)), std::string(wire_name(b.decision.action)));
        note(step, "prompt_before", a.prompt_before, b.prompt_before);
        note(step, "prompt_after", a.prompt_after, b.prompt_after);
        note(step, "image_before", digest_or_none(a.image_before), digest_or_none(b.image_before));
        note(step, "image_after", digest_or_none(a.image_after), digest_or_none(b.image_after));
    }
    note(0, "terminal", std::string(terminal_name(original.terminal.status)),
         std::string(terminal_name(replayed.terminal.status)));
    note(0, "final_image", digest_or_none(original.final_image), digest_or_none(replayed.final_image));
    return diff;
}

} // namespace imagent
