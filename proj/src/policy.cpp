// SPDX-License-Identifier: Apache-2.0
#include <imagent/policy.hpp>
#include <imagent/seeding.hpp>
#include <imagent/templates.hpp>
#include <imagent/text.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace imagent
{

namespace
{

constexpr std::size_t kMaxPromptChars = 1000;
constexpr std::size_t kMaxObservationChars = 600;
constexpr std::size_t kMaxSummaryChars = 400;
constexpr std::size_t kMaxRationaleChars = 500;
constexpr std::size_t kMaxJsonCandidates = 64;

templates::TemplateId policy_template(Mode mode)
{
    return mode == Mode::Generation ? templates::TemplateId::PolicyGeneration
                                    : templates::TemplateId::PolicyEditing;
}

std::string format_score(double score)
{
    std::ostringstream out;
    out.precision(3);
    out << score;
    return out.str();
}

std::string render_observation(const Observation& o)
{
    std::string line = "[step " + std::to_string(o.step) + "] " + std::string(wire_name(o.action));
    if (o.score)
        line += " score=" + format_score(*o.score);
    if (o.failed)
        line += " (failed)";
    if (!o.rationale.empty())
        line += " reason: " + text::single_line(o.rationale);
    if (!o.feedback.empty())
        line += " feedback: " + text::single_line(o.feedback);
    return text::truncate(line, kMaxObservationChars);
}

std::string render_history(const std::vector<Observation>& history, int window)
{
    if (history.empty())
        return "no actions taken yet";

    auto const w = static_cast<std::size_t>(window);
    auto const firstVerbatim = history.size() > w ? history.size() - w : 0;
    std::vector<std::string> lines;
    if (firstVerbatim > 0)
    {
        // Older observations collapse to action names with counts, in order of first use.
        std::vector<std::pair<ActionKind, int>> counts;
        for (std::size_t i = 0; i < firstVerbatim; ++i)
        {
            auto it = std::find_if(counts.begin(), counts.end(),
                                   [&](auto const& c) { return c.first == history[i].action; });
            if (it == counts.end())
                counts.emplace_back(history[i].action, 1);
            else
                ++it->second;
        }
        std::vector<std::string> parts;
        for (auto const& [a, n]: counts)
            parts.push_back(std::string(wire_name(a)) + (n > 1 ? " x" + std::to_string(n) : ""));
        lines.push_back(text::truncate("Earlier actions (steps 1-" + std::to_string(firstVerbatim)
                                           + "): " + text::join(parts, ", "),
                                       kMaxSummaryChars));
    }
    for (auto i = firstVerbatim; i < history.size(); ++i)
        lines.push_back(render_observation(history[i]));
    return text::join(lines, "\n");
}

std::string render_actions(ActionSet mask)
{
    std::vector<std::string> lines;
    for (auto a: mask.to_vector())
        lines.push_back("- " + std::string(wire_name(a)) + ": " + std::string(action_definition(a)));
    return text::join(lines, "\n");
}

bool is_word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

/// Earliest whole-word action spelling in `raw`; the longest spelling wins at equal offsets.
std::optional<ActionKind> scan_for_action(std::string_view raw)
{
    static constexpr std::pair<std::string_view, ActionKind> kSpellings[] = {
        { "naive generation", ActionKind::NaiveGeneration },
        { "naive editing", ActionKind::NaiveGeneration },
        { "naive edit", ActionKind::NaiveGeneration },
        { "prompt enhancement", ActionKind::PromptEnhancement },
        { "prompt refinement", ActionKind::PromptRevision },
        { "prompt revision", ActionKind::PromptRevision },
        { "image detail refinement", ActionKind::ImageDetailRefinement },
        { "best of n sampling", ActionKind::BestOfN },
        { "best of n", ActionKind::BestOfN },
        { "stop", ActionKind::Stop },
    };
    auto const folded = text::fold_separators(raw);
    std::size_t bestPos = std::string::npos;
    std::size_t bestLen = 0;
    std::optional<ActionKind> best;
    for (auto const& [spelling, kind]: kSpellings)
    {
        std::size_t from = 0;
        while (true)
        {
            auto pos = folded.find(spelling, from);
            if (pos == std::string::npos || pos > bestPos)
                break;
            auto end = pos + spelling.size();
            bool bounded = (pos == 0 || !is_word_char(folded[pos - 1]))
                           && (end == folded.size() || !is_word_char(folded[end]));
            if (bounded)
            {
                if (pos < bestPos || spelling.size() > bestLen)
                {
                    bestPos = pos;
                    bestLen = spelling.size();
                    best = kind;
                }
                break;
            }
            from = pos + 1;
        }
    }
    return best;
}

/// End offset (exclusive) of the JSON object starting at `open`, honoring strings and escapes.
std::optional<std::size_t> matching_brace(std::string_view raw, std::size_t open)
{
    int depth = 0;
    bool inString = false;
    bool escaped = false;
    for (auto i = open; i < raw.size(); ++i)
    {
        char c = raw[i];
        if (inString)
        {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                inString = false;
            continue;
        }
        if (c == '"')
            inString = true;
        else if (c == '{')
            ++depth;
        else if (c == '}' && --depth == 0)
            return i + 1;
    }
    return std::nullopt;
}

struct JsonDecision
{
    ActionKind action;
    std::string reason;
};

std::optional<JsonDecision> scan_for_json(std::string_view raw)
{
    std::size_t from = 0;
    for (std::size_t tries = 0; tries < kMaxJsonCandidates; ++tries)
    {
        auto open = raw.find('{', from);
        if (open == std::string_view::npos)
            return std::nullopt;
        from = open + 1;
        auto end = matching_brace(raw, open);
        if (!end)
            continue;
        auto j = nlohmann::json::parse(raw.substr(open, *end - open), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            continue;
        auto it = j.find("action");
        if (it == j.end() || !it->is_string())
            continue;
        auto action = action_from_name(it->get<std::string>());
        if (!action)
            continue;
        std::string reason;
        if (auto r = j.find("reason"); r != j.end() && r->is_string())
            reason = r->get<std::string>();
        return JsonDecision { *action, std::move(reason) };
    }
    return std::nullopt;
}

std::string corrective_suffix(const ParseError& error, ActionSet mask)
{
    std::vector<std::string> names;
    for (auto a: mask.to_vector())
        names.emplace_back(wire_name(a));
    return "\n\nYour previous reply could not be used (" + error.message
           + "). Reply with only a JSON object {\"action\": <name>, \"reason\": <text>} where <name> is one of: "
           + text::join(names, ", ") + ".";
}

} // namespace

ActionSet action_mask(const AgentState& state)
{
    if (!state.current_image)
        return { ActionKind::NaiveGeneration, ActionKind::PromptEnhancement, ActionKind::BestOfN };
    auto mask = ActionSet::all();
    if (state.mode == Mode::Editing && state.step_index <= 1)
        mask.erase(ActionKind::Stop);
    return mask;
}

ActionSet action_mask(const AgentState& state, const Capabilities& caps)
{
    auto mask = action_mask(state);
    if (!caps.supports_edit)
        mask.erase(ActionKind::ImageDetailRefinement);
    // These read the current image (revision, edit instruction, judge).
    if (!caps.supports_image_in_understand)
    {
        mask.erase(ActionKind::PromptRevision);
        mask.erase(ActionKind::ImageDetailRefinement);
        mask.erase(ActionKind::BestOfN);
    }
    return mask;
}

std::string_view action_definition(ActionKind action)
{
    switch (action)
    {
        case ActionKind::NaiveGeneration:
            return "generate (in editing mode: edit) the image once, directly from the current prompt.";
        case ActionKind::PromptEnhancement:
            return "reason step by step to rewrite the prompt into a more explicit, detailed one, then regenerate.";
        case ActionKind::PromptRevision:
            return "compare the current image with the prompt, revise the prompt to fix the discrepancies, then "
                   "regenerate.";
        case ActionKind::ImageDetailRefinement:
            return "keep the prompt fixed and edit the current image to correct remaining local imperfections.";
        case ActionKind::BestOfN:
            return "sample several candidates from the current prompt and keep the one rated most aligned.";
        case ActionKind::Stop: return "finish; the current image is satisfactory.";
    }
    return "";
}

std::vector<ImageRef> policy_images(const AgentState& state)
{
    std::vector<ImageRef> images;
    if (state.current_image)
        images.push_back(*state.current_image);
    if (state.mode == Mode::Editing && state.initial_image)
        images.push_back(*state.initial_image);
    return images;
}

std::string build_policy_prompt(const AgentState& state, const RunConfig& config)
{
    return build_policy_prompt(state, config, action_mask(state));
}

std::string build_policy_prompt(const AgentState& state, const RunConfig& config, ActionSet mask,
                                bool images_attached)
{
    auto const marker = [&](std::size_t index) {
        return images_attached ? "<attached image " + std::to_string(index) + ">"
                               : std::string("<available, not attached>");
    };
    std::string current = state.current_image ? marker(1) : "none";
    std::string initial = state.initial_image ? marker(state.current_image ? 2 : 1) : "none";

    return text::render(templates::body(policy_template(state.mode)),
                        {
                            { "initial_prompt", text::truncate(text::single_line(state.initial_prompt), kMaxPromptChars) },
                            { "current_prompt", text::truncate(text::single_line(state.current_prompt), kMaxPromptChars) },
                            { "initial_image", initial },
                            { "current_image", current },
                            { "step", std::to_string(state.step_index) },
                            { "t_max", std::to_string(config.t_max) },
                            { "history", render_history(state.history, config.history_window) },
                            { "actions", render_actions(mask) },
                        });
}

std::size_t policy_prompt_ceiling(const RunConfig& config)
{
    std::size_t longestTemplate = std::max(templates::body(templates::TemplateId::PolicyGeneration).size(),
                                           templates::body(templates::TemplateId::PolicyEditing).size());
    std::size_t actions = render_actions(ActionSet::all()).size();
    std::size_t history = kMaxSummaryChars + 1
                          + static_cast<std::size_t>(config.history_window) * (kMaxObservationChars + 1);
    constexpr std::size_t kMarkersAndCounters = 2 * 32 + 2 * 20;
    return longestTemplate + 2 * kMaxPromptChars + actions + history + kMarkersAndCounters;
}

ParseOutcome parse_decision(std::string_view raw, ActionSet mask)
{
    std::optional<ActionKind> action;
    std::string reason;
    if (auto j = scan_for_json(raw))
    {
        action = j->action;
        reason = std::move(j->reason);
    }
    else
    {
        action = scan_for_action(raw);
    }

    if (!action)
        return ParseError { ParseErrorKind::NoAction, std::nullopt, "no action name found" };
    if (!mask.contains(*action))
        return ParseError { ParseErrorKind::MaskedAction, action,
                            "action " + std::string(wire_name(*action)) + " is not permitted now" };

    Decision d;
    d.action = *action;
    d.rationale = text::truncate(text::single_line(reason.empty() ? raw : reason), kMaxRationaleChars);
    if (d.rationale.empty())
        d.rationale = std::string(wire_name(*action));
    d.raw = std::string(raw);
    d.parse_attempts = 1;
    return d;
}

Decision decide(Backend& backend, const AgentState& state, const RunConfig& config)
{
    auto const caps = backend.capabilities();
    auto const mask = action_mask(state, caps);

    UnderstandRequest request;
    request.images = policy_images(state);
    bool omitted = false;
    if (!request.images.empty() && !caps.supports_image_in_understand)
    {
        request.images.clear();
        omitted = true;
    }
    request.template_id = templates::id_string(policy_template(state.mode));
    auto const basePrompt = build_policy_prompt(state, config, mask, !omitted);

    std::string lastRaw;
    for (int attempt = 0; attempt <= config.parse_retries; ++attempt)
    {
        request.seed = derive_seed(config.seed, state.step_index, -1 - attempt);
        request.text = basePrompt;
        if (attempt > 0)
        {
            auto const& previous = std::get<ParseError>(parse_decision(lastRaw, mask));
            request.text += corrective_suffix(previous, mask);
        }
        lastRaw = backend.understand(request);
        auto outcome = parse_decision(lastRaw, mask);
        if (auto* decision = std::get_if<Decision>(&outcome))
        {
            decision->parse_attempts = attempt + 1;
            decision->images_omitted = omitted;
            return *decision;
        }
    }

    Decision fallback;
    fallback.action = state.current_image && mask.contains(ActionKind::Stop) ? ActionKind::Stop
                                                                              : ActionKind::NaiveGeneration;
    fallback.raw = lastRaw;
    fallback.parse_attempts = config.parse_retries + 1;
    fallback.fallback = true;
    fallback.images_omitted = omitted;
    return fallback;
}

} // namespace imagent
