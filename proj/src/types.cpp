// SPDX-License-Identifier: Apache-2.0
#include <imagent/text.hpp>
#include <imagent/types.hpp>

#include <bit>
#include <stdexcept>

namespace imagent
{

std::string_view wire_name(ActionKind action) noexcept
{
    switch (action)
    {
        case ActionKind::NaiveGeneration: return "naive_generation";
        case ActionKind::PromptEnhancement: return "prompt_enhancement";
        case ActionKind::PromptRevision: return "prompt_refinement";
        case ActionKind::ImageDetailRefinement: return "image_detail_refinement";
        case ActionKind::BestOfN: return "best_of_N_sampling";
        case ActionKind::Stop: return "STOP";
    }
    return "unknown";
}

std::optional<ActionKind> action_from_name(std::string_view name)
{
    auto const folded = text::fold_separators(text::trim(name));
    static constexpr std::pair<std::string_view, ActionKind> kSpellings[] = {
        { "naive generation", ActionKind::NaiveGeneration },
        { "naive editing", ActionKind::NaiveGeneration },
        { "naive edit", ActionKind::NaiveGeneration },
        { "prompt enhancement", ActionKind::PromptEnhancement },
        { "prompt enhancement with cot", ActionKind::PromptEnhancement },
        { "prompt refinement", ActionKind::PromptRevision },
        { "prompt revision", ActionKind::PromptRevision },
        { "image detail refinement", ActionKind::ImageDetailRefinement },
        { "best of n sampling", ActionKind::BestOfN },
        { "best of n", ActionKind::BestOfN },
        { "stop", ActionKind::Stop },
    };
    for (auto const& [spelling, kind]: kSpellings)
        if (folded == spelling)
            return kind;
    return std::nullopt;
}

std::size_t ActionSet::size() const noexcept
{
    return static_cast<std::size_t>(std::popcount(_bits));
}

std::vector<ActionKind> ActionSet::to_vector() const
{
    std::vector<ActionKind> out;
    for (auto a: kAllActions)
        if (contains(a))
            out.push_back(a);
    return out;
}

std::string_view mode_name(Mode mode) noexcept
{
    return mode == Mode::Generation ? "generation" : "editing";
}

std::optional<Mode> mode_from_name(std::string_view name)
{
    if (name == "generation")
        return Mode::Generation;
    if (name == "editing")
        return Mode::Editing;
    return std::nullopt;
}

std::string_view format_name(ImageFormat format) noexcept
{
    switch (format)
    {
        case ImageFormat::Png: return "png";
        case ImageFormat::Jpeg: return "jpeg";
        case ImageFormat::SimJson: return "sim-json";
    }
    return "unknown";
}

std::optional<ImageFormat> format_from_name(std::string_view name)
{
    if (name == "png")
        return ImageFormat::Png;
    if (name == "jpeg" || name == "jpg")
        return ImageFormat::Jpeg;
    if (name == "sim-json")
        return ImageFormat::SimJson;
    return std::nullopt;
}

std::string ImageRef::file_name() const
{
    return digest + "." + std::string(format_name(format));
}

void RunConfig::validate() const
{
    if (t_max < 1)
        throw std::invalid_argument("t_max must be >= 1");
    if (best_of_n < 1)
        throw std::invalid_argument("best_of_n must be >= 1");
    if (parse_retries < 0)
        throw std::invalid_argument("parse_retries must be >= 0");
    if (history_window < 1)
        throw std::invalid_argument("history_window must be >= 1");
}

AgentState AgentState::for_generation(std::string prompt)
{
    AgentState s;
    s.initial_prompt = prompt;
    s.current_prompt = std::move(prompt);
    s.mode = Mode::Generation;
    return s;
}

AgentState AgentState::for_editing(std::string prompt, ImageRef image)
{
    AgentState s;
    s.initial_prompt = prompt;
    s.current_prompt = std::move(prompt);
    s.initial_image = image;
    s.current_image = std::move(image);
    s.mode = Mode::Editing;
    return s;
}

std::string_view terminal_name(TerminalStatus status) noexcept
{
    switch (status)
    {
        case TerminalStatus::Stopped: return "stopped";
        case TerminalStatus::MaxStepsReached: return "max_steps_reached";
        case TerminalStatus::Aborted: return "aborted";
    }
    return "unknown";
}

std::optional<TerminalStatus> terminal_from_name(std::string_view name)
{
    for (auto s: { TerminalStatus::Stopped, TerminalStatus::MaxStepsReached, TerminalStatus::Aborted })
        if (terminal_name(s) == name)
            return s;
    return std::nullopt;
}

int Trace::fallback_count() const
{
    int n = 0;
    for (auto const& s: steps)
        n += s.decision.fallback ? 1 : 0;
    if (stop_decision && stop_decision->fallback)
        ++n;
    return n;
}

} // namespace imagent
