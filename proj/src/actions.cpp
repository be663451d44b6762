// SPDX-License-Identifier: Apache-2.0
#include <imagent/actions.hpp>
#include <imagent/errors.hpp>
#include <imagent/seeding.hpp>
#include <imagent/templates.hpp>
#include <imagent/text.hpp>

#include <cctype>
#include <charconv>
#include <future>

namespace imagent
{

using templates::TemplateId;

namespace
{

Observation observation_for(const AgentState& state, ActionKind action)
{
    Observation o;
    o.step = state.step_index;
    o.action = action;
    return o;
}

ActionOutcome unchanged(const AgentState& state, Observation observation, std::string feedback)
{
    observation.failed = true;
    observation.feedback = std::move(feedback);
    return { state.current_prompt, state.current_image, std::move(observation) };
}

const ImageRef& require_image(const AgentState& state, ActionKind action)
{
    if (!state.current_image)
        throw MaskViolation(std::string(wire_name(action)) + " needs a current image");
    return *state.current_image;
}

/// generate() in generation mode, edit() of the current (else input) image in editing mode.
ImageRef produce(Backend& backend, const AgentState& state, std::string_view prompt, std::uint64_t seed)
{
    if (state.mode == Mode::Generation)
        return backend.generate(prompt, seed);
    auto const& base = state.current_image ? *state.current_image : *state.initial_image;
    return backend.edit(prompt, base, seed);
}

std::string understand(Backend& backend, TemplateId id, std::vector<std::pair<std::string, std::string>> vars,
                       std::vector<ImageRef> images, std::uint64_t seed)
{
    UnderstandRequest request;
    request.text = text::render(templates::body(id), vars);
    request.images = std::move(images);
    request.template_id = templates::id_string(id);
    request.seed = seed;
    return backend.understand(request);
}

struct Revision
{
    std::string discrepancies;
    std::string revised_prompt;
};

std::optional<Revision> parse_revision(std::string_view reply)
{
    auto marker = reply.find(templates::kRevisedPromptMarker);
    if (marker == std::string_view::npos)
        return std::nullopt;
    Revision r;
    r.revised_prompt = text::single_line(reply.substr(marker + templates::kRevisedPromptMarker.size()));
    if (r.revised_prompt.empty())
        return std::nullopt;
    r.discrepancies = text::line_value(reply.substr(0, marker), "Discrepancies:");
    if (text::to_lower(r.discrepancies) == "none")
        r.discrepancies.clear();
    return r;
}

bool is_digit(char c)
{
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::uint64_t step_seed(const RunConfig& config, int step, int candidate)
{
    return derive_seed(config.seed, step, candidate);
}

ActionOutcome naive(Backend& backend, const AgentState& state, const RunConfig& config)
{
    auto o = observation_for(state, ActionKind::NaiveGeneration);
    o.feedback = "naive invocation";
    auto image = produce(backend, state, state.current_prompt, step_seed(config, state.step_index));
    return { state.current_prompt, std::move(image), std::move(o) };
}

ActionOutcome enhance_prompt_cot(Backend& backend, const AgentState& state, const RunConfig& config)
{
    auto o = observation_for(state, ActionKind::PromptEnhancement);
    auto const reply = understand(backend, TemplateId::Enhance,
                                  { { "initial_prompt", text::single_line(state.initial_prompt) },
                                    { "current_prompt", text::single_line(state.current_prompt) } },
                                  {}, step_seed(config, state.step_index));
    auto enhanced = text::single_line(reply);
    if (enhanced.empty())
        return unchanged(state, std::move(o), "enhancement returned an empty prompt");

    o.feedback = "prompt: \"" + state.current_prompt + "\" -> \"" + enhanced + "\"";
    auto image = produce(backend, state, enhanced, step_seed(config, state.step_index));
    return { std::move(enhanced), std::move(image), std::move(o) };
}

ActionOutcome revise_prompt(Backend& backend, const AgentState& state, const RunConfig& config)
{
    auto const& current = require_image(state, ActionKind::PromptRevision);
    auto o = observation_for(state, ActionKind::PromptRevision);

    std::optional<Revision> revision;
    for (int attempt = 0; attempt < 2 && !revision; ++attempt)
    {
        auto const reply = understand(backend, TemplateId::Revise,
                                      { { "initial_prompt", text::single_line(state.initial_prompt) },
                                        { "current_prompt", text::single_line(state.current_prompt) } },
                                      { current }, step_seed(config, state.step_index, -100 - attempt));
        revision = parse_revision(reply);
    }
    if (!revision)
        return unchanged(state, std::move(o), "revision reply lacked a revised prompt");

    o.feedback = revision->discrepancies;
    auto image = produce(backend, state, revision->revised_prompt, step_seed(config, state.step_index));
    return { std::move(revision->revised_prompt), std::move(image), std::move(o) };
}

ActionOutcome refine_image_details(Backend& backend, const AgentState& state, const RunConfig& config)
{
    auto const& current = require_image(state, ActionKind::ImageDetailRefinement);
    auto o = observation_for(state, ActionKind::ImageDetailRefinement);
    auto const instruction = text::single_line(understand(backend, TemplateId::Refine,
                                                          { { "current_prompt", text::single_line(state.current_prompt) } },
                                                          { current }, step_seed(config, state.step_index, -200)));
    if (instruction.empty())
        return unchanged(state, std::move(o), "refinement returned an empty instruction");

    o.feedback = instruction;
    auto image = backend.edit(instruction, current, step_seed(config, state.step_index));
    return { state.current_prompt, std::move(image), std::move(o) };
}

ActionOutcome best_of_n(Backend& backend, const AgentState& state, const RunConfig& config, int n)
{
    if (n < 1)
        throw std::invalid_argument("best_of_n needs n >= 1");
    auto o = observation_for(state, ActionKind::BestOfN);

    struct Candidate
    {
        std::optional<ImageRef> image;
        std::optional<CandidateScore> score;
        std::string error;
    };
    auto const sample = [&](int k) {
        Candidate c;
        try
        {
            c.image = produce(backend, state, state.current_prompt, step_seed(config, state.step_index, k));
            c.score = evaluate_alignment(backend, state.current_prompt, *c.image, k);
        }
        catch (const BackendError& e)
        {
            c.error = e.what();
        }
        catch (const ScoreParseError& e)
        {
            c.error = e.what();
        }
        return c;
    };

    std::vector<Candidate> candidates(static_cast<std::size_t>(n));
    if (config.parallel_candidates && n > 1)
    {
        std::vector<std::future<Candidate>> futures;
        for (int k = 0; k < n; ++k)
            futures.push_back(std::async(std::launch::async, sample, k));
        for (int k = 0; k < n; ++k)
            candidates[static_cast<std::size_t>(k)] = futures[static_cast<std::size_t>(k)].get();
    }
    else
    {
        for (int k = 0; k < n; ++k)
            candidates[static_cast<std::size_t>(k)] = sample(k);
    }

    std::vector<std::optional<double>> scores;
    for (auto const& c: candidates)
        scores.push_back(c.score ? std::optional(c.score->score) : std::nullopt);
    o.candidate_scores = scores;

    auto best = select_best(scores);
    if (!best)
        return unchanged(state, std::move(o), "all " + std::to_string(n) + " candidates failed: "
                                                  + candidates.front().error);

    auto& chosen = candidates[*best];
    o.score = chosen.score->score;
    o.feedback = "selected candidate " + std::to_string(*best) + " of " + std::to_string(n) + ": "
                 + chosen.score->critique;
    return { state.current_prompt, std::move(chosen.image), std::move(o) };
}

ActionOutcome execute_action(ActionKind action, Backend& backend, const AgentState& state, const RunConfig& config)
{
    switch (action)
    {
        case ActionKind::NaiveGeneration: return naive(backend, state, config);
        case ActionKind::PromptEnhancement: return enhance_prompt_cot(backend, state, config);
        case ActionKind::PromptRevision: return revise_prompt(backend, state, config);
        case ActionKind::ImageDetailRefinement: return refine_image_details(backend, state, config);
        case ActionKind::BestOfN: return best_of_n(backend, state, config, config.best_of_n);
        case ActionKind::Stop: break;
    }
    throw MaskViolation("STOP is not an executable action");
}

CandidateScore evaluate_alignment(Backend& backend, std::string_view prompt, const ImageRef& image, int index)
{
    auto const reply = understand(backend, TemplateId::Judge, { { "prompt", text::single_line(prompt) } }, { image },
                                  0);
    CandidateScore s;
    s.index = index;
    s.score = parse_score(reply, &s.critique);
    return s;
}

double parse_score(std::string_view reply, std::string* critique)
{
    auto const lowered = text::to_lower(reply);
    auto pos = lowered.find("score");
    pos = pos == std::string::npos ? 0 : pos + 5;
    while (pos < reply.size() && !is_digit(reply[pos]))
        ++pos;
    if (pos >= reply.size())
        throw ScoreParseError("no score in reply: " + text::truncate(text::single_line(reply), 120));

    auto const* const end = reply.data() + reply.size();
    double numerator = 0.0;
    auto [next, ec] = std::from_chars(reply.data() + pos, end, numerator);
    if (ec != std::errc {})
        throw ScoreParseError("malformed score");

    double value = numerator / 10.0;
    auto const* p = next;
    while (p < end && *p == ' ')
        ++p;
    if (p < end && *p == '/')
    {
        ++p;
        while (p < end && *p == ' ')
            ++p;
        double denominator = 0.0;
        auto [afterDen, ec2] = std::from_chars(p, end, denominator);
        if (ec2 != std::errc {} || denominator <= 0.0)
            throw ScoreParseError("malformed score fraction");
        value = numerator / denominator;
        next = afterDen;
    }
    if (!(value >= 0.0 && value <= 1.0))
        throw ScoreParseError("score out of range");

    if (critique)
    {
        std::string_view rest(next, static_cast<std::size_t>(end - next));
        while (true)
        {
            rest = text::trim(rest);
            if (rest.starts_with("\xE2\x80\x94") || rest.starts_with("\xE2\x80\x93"))
                rest.remove_prefix(3);
            else if (rest.starts_with("-") || rest.starts_with(":") || rest.starts_with(","))
                rest.remove_prefix(1);
            else
                break;
        }
        *critique = text::single_line(rest);
    }
    return value;
}

std::optional<std::size_t> select_best(std::span<const std::optional<double>> scores)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] && (!best || *scores[i] > *scores[*best]))
            best = i;
    return best;
}

} // namespace imagent
