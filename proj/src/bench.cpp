// SPDX-License-Identifier: Apache-2.0
#include <imagent/actions.hpp>
#include <imagent/bench.hpp>
#include <imagent/errors.hpp>
#include <imagent/policy.hpp>
#include <imagent/seeding.hpp>
#include <imagent/text.hpp>
#include <imagent/trace_store.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace imagent
{

namespace fs = std::filesystem;
using nlohmann::json;

PolicyVariant PolicyVariant::fixed(ActionKind action)
{
    if (action == ActionKind::Stop)
        throw std::invalid_argument("Fixed(STOP) is not a policy");
    return { Kind::Fixed, 0, action };
}

PolicyVariant PolicyVariant::parse(std::string_view spec, std::uint64_t default_seed)
{
    auto const s = text::trim(spec);
    if (s == "controller")
        return controller();
    if (s == "random")
        return random(default_seed);
    if (s.starts_with("random:"))
    {
        std::string digits(s.substr(7));
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("bad random seed in variant '" + std::string(s) + "'");
        return random(std::stoull(digits));
    }
    if (s.starts_with("fixed:"))
    {
        auto action = action_from_name(s.substr(6));
        if (!action)
            throw std::invalid_argument("unknown action in variant '" + std::string(s) + "'");
        return fixed(*action);
    }
    throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

std::string PolicyVariant::label() const
{
    switch (kind)
    {
        case Kind::Controller: return "controller";
        case Kind::Random: return "random";
        case Kind::Fixed: return "fixed:" + std::string(wire_name(action));
    }
    return "unknown";
}

DecisionSource make_decision_source(const PolicyVariant& variant, Backend& backend, const RunConfig& config,
                                    std::string_view run_key)
{
    switch (variant.kind)
    {
        case PolicyVariant::Kind::Controller: return controller(backend, config);

        case PolicyVariant::Kind::Random:
        {
            auto rng = std::make_shared<std::mt19937_64>(splitmix64(variant.seed ^ fnv1a64(run_key)));
            auto caps = backend.capabilities();
            return [rng, caps](const AgentState& state) {
                auto const options = action_mask(state, caps).to_vector();
                Decision d;
                d.action = options[(*rng)() % options.size()];
                d.rationale = "random choice";
                d.parse_attempts = 0;
                return d;
            };
        }

        case PolicyVariant::Kind::Fixed:
        {
            auto const action = variant.action;
            return [action](const AgentState& state) {
                Decision d;
                bool const done = std::ranges::any_of(state.history, [&](auto const& o) { return o.action == action; });
                bool const needsImage = action == ActionKind::PromptRevision || action == ActionKind::ImageDetailRefinement;
                if (done)
                {
                    d.action = ActionKind::Stop;
                    d.rationale = "single-turn action done";
                }
                else if (needsImage && !state.current_image)
                {
                    d.action = ActionKind::NaiveGeneration;
                    d.rationale = "setup: " + std::string(wire_name(action)) + " needs an image";
                }
                else
                {
                    d.action = action;
                    d.rationale = "fixed single-turn action";
                }
                return d;
            };
        }
    }
    throw std::logic_error("unhandled policy variant");
}

std::vector<CorpusEntry> load_corpus(const fs::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw std::runtime_error("cannot read corpus " + file.string());
    std::vector<CorpusEntry> out;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (text::trim(line).empty())
            continue;
        auto const where = file.string() + ":" + std::to_string(lineNo) + ": ";
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error(where + "not a JSON object");
        CorpusEntry e;
        if (!j.contains("id") || !j.contains("prompt") || !j["prompt"].is_string())
            throw std::runtime_error(where + "needs \"id\" and \"prompt\"");
        e.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        e.prompt = j["prompt"].get<std::string>();
        if (j.contains("mode"))
        {
            auto mode = j["mode"].is_string() ? mode_from_name(j["mode"].get<std::string>()) : std::nullopt;
            if (!mode)
                throw std::runtime_error(where + "mode must be \"generation\" or \"editing\"");
            e.mode = *mode;
        }
        if (j.contains("image_path") && j["image_path"].is_string())
        {
            fs::path p = j["image_path"].get<std::string>();
            e.image_path = p.is_relative() ? file.parent_path() / p : p;
        }
        if (e.mode == Mode::Editing && !e.image_path)
            throw std::runtime_error(where + "editing entries need \"image_path\"");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<CorpusEntry> synthetic_corpus(std::size_t count, const sim::Vocabulary& vocabulary, std::uint64_t seed)
{
    std::mt19937_64 rng(splitmix64(seed));
    auto tokens = vocabulary.tokens();
    std::vector<CorpusEntry> out;
    for (std::size_t i = 0; i < count; ++i)
    {
        auto const k = std::min<std::size_t>(2 + rng() % 4, tokens.size());
        for (std::size_t j = 0; j < k; ++j)
            std::swap(tokens[j], tokens[j + rng() % (tokens.size() - j)]);
        std::vector<std::string> picked(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(k));
        std::ostringstream id;
        id << "p" << std::setw(4) << std::setfill('0') << i;
        out.push_back({ id.str(), "an image of " + text::join(picked, ", "), Mode::Generation, std::nullopt });
    }
    return out;
}

std::vector<VariantAggregate> aggregate_rows(const std::vector<BenchRow>& rows)
{
    std::vector<VariantAggregate> out;
    for (auto const& r: rows)
    {
        auto it = std::ranges::find_if(out, [&](auto const& a) { return a.variant == r.variant; });
        if (it == out.end())
        {
            out.push_back({ r.variant, 0, 0.0, 0.0 });
            it = std::prev(out.end());
        }
        ++it->runs;
        it->mean_score += r.final_score;
        it->mean_steps += r.steps_executed;
    }
    for (auto& a: out)
    {
        a.mean_score /= static_cast<double>(a.runs);
        a.mean_steps /= static_cast<double>(a.runs);
    }
    return out;
}

namespace
{

BenchRow run_one(const CorpusEntry& entry, const PolicyVariant& variant, const RunConfig& base, Backend& backend,
                 const BenchOptions& options)
{
    BenchRow row;
    row.prompt_id = entry.id;
    row.variant = variant.label();

    RunConfig config = base;
    config.seed = splitmix64(base.seed ^ fnv1a64(entry.id));
    RunOptions runOptions;
    runOptions.decisions = make_decision_source(variant, backend, config, entry.id);

    Trace trace;
    try
    {
        if (entry.mode == Mode::Editing)
            trace = run_editing(config, backend, entry.prompt, backend.artifacts().import_file(*entry.image_path),
                                runOptions);
        else
            trace = run_generation(config, backend, entry.prompt, runOptions);
    }
    catch (const std::exception& e)
    {
        row.terminal = "aborted";
        row.error = e.what();
        return row;
    }

    row.terminal = std::string(terminal_name(trace.terminal.status));
    row.error = trace.terminal.reason;
    row.fallback_count = trace.fallback_count();
    for (auto const& s: trace.steps)
    {
        if (variant.kind == PolicyVariant::Kind::Fixed && s.decision.action != variant.action)
            ++row.setup_steps;
        else
            ++row.steps_executed;
    }

    if (trace.final_image)
    {
        try
        {
            row.final_score = evaluate_alignment(backend, entry.prompt, *trace.final_image).score;
        }
        catch (const std::exception& e)
        {
            row.error = std::string("final scoring failed: ") + e.what();
        }
    }

    if (options.trace_root)
    {
        auto label = row.variant;
        std::ranges::replace(label, ':', '_');
        try
        {
            save_trace(trace, *options.trace_root / entry.id / label, &backend.artifacts());
        }
        catch (const std::exception& e)
        {
            row.error = std::string("trace not saved: ") + e.what();
        }
    }
    return row;
}

} // namespace

BenchReport run_bench(const std::vector<CorpusEntry>& corpus, const std::vector<PolicyVariant>& variants,
                      const RunConfig& config, Backend& backend, const BenchOptions& options)
{
    if (corpus.empty())
        throw std::invalid_argument("bench corpus is empty");
    if (variants.empty())
        throw std::invalid_argument("no policy variants given");
    config.validate();

    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t p = 0; p < corpus.size(); ++p)
        for (std::size_t v = 0; v < variants.size(); ++v)
            jobs.emplace_back(p, v);

    BenchReport report;
    report.rows.resize(jobs.size());
    std::atomic<std::size_t> next { 0 };
    auto worker = [&] {
        for (auto i = next++; i < jobs.size(); i = next++)
            report.rows[i] = run_one(corpus[jobs[i].first], variants[jobs[i].second], config, backend, options);
    };

    auto const width = static_cast<std::size_t>(std::max(1, options.parallel));
    if (width == 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < std::min(width, jobs.size()); ++t)
            threads.emplace_back(worker);
        for (auto& t: threads)
            t.join();
    }

    report.aggregate = aggregate_rows(report.rows);
    return report;
}

json BenchReport::to_json() const
{
    json rowsJson = json::array();
    for (auto const& r: rows)
        rowsJson.push_back({ { "prompt_id", r.prompt_id },
                             { "variant", r.variant },
                             { "final_score", r.final_score },
                             { "steps_executed", r.steps_executed },
                             { "setup_steps", r.setup_steps },
                             { "fallback_count", r.fallback_count },
                             { "terminal", r.terminal },
                             { "error", r.error } });
    json agg = json::array();
    for (auto const& a: aggregate)
        agg.push_back(
            { { "variant", a.variant }, { "runs", a.runs }, { "mean_score", a.mean_score }, { "mean_steps", a.mean_steps } });
    return { { "rows", rowsJson }, { "aggregate", agg } };
}

std::string BenchReport::to_text() const
{
    std::size_t width = std::string_view("variant").size();
    for (auto const& a: aggregate)
        width = std::max(width, a.variant.size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "variant" << "  " << std::right << std::setw(6) << "runs"
        << "  " << std::setw(10) << "mean_score" << "  " << std::setw(10) << "mean_steps" << "\n";
    out << std::string(width + 2 + 6 + 2 + 10 + 2 + 10, '-') << "\n";
    out << std::fixed << std::setprecision(4);
    for (auto const& a: aggregate)
        out << std::left << std::setw(static_cast<int>(width)) << a.variant << "  " << std::right << std::setw(6)
            << a.runs << "  " << std::setw(10) << a.mean_score << "  " << std::setw(10) << a.mean_steps << "\n";
    return out.str();
}

void write_report(const BenchReport& report, const fs::path& dir)
{
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        out << report.to_json().dump(2) << "\n";
        if (!out)
            throw std::runtime_error("cannot write " + (dir / "report.json").string());
    }
    std::ofstream out(dir / "report.txt");
    out << report.to_text();
    if (!out)
        throw std::runtime_error("cannot write " + (dir / "report.txt").string());
}

} // namespace imagent
