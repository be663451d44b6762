// SPDX-License-Identifier: Apache-2.0
#include <imagent/agent.hpp>
#include <imagent/errors.hpp>
#include <imagent/policy.hpp>
#include <imagent/templates.hpp>

#include <chrono>

namespace imagent
{

namespace
{

Trace begin_trace(const RunConfig& config, Backend& backend, Mode mode, const std::string& prompt)
{
    Trace trace;
    trace.config = config;
    trace.mode = mode;
    trace.template_version = std::string(templates::kVersion);
    trace.backend = backend.describe();
    trace.initial_prompt = prompt;
    return trace;
}

void abort_run(Trace& trace, std::string reason)
{
    trace.terminal = { TerminalStatus::Aborted, std::move(reason) };
}

Trace run_loop(Trace trace, AgentState state, Backend& backend, const RunOptions& options)
{
    auto const& config = trace.config;
    auto source = options.decisions ? options.decisions : controller(backend, config);
    trace.terminal = { TerminalStatus::MaxStepsReached, {} };

    for (int t = 1; t <= config.t_max; ++t)
    {
        state.step_index = t;
        Decision decision;
        try
        {
            decision = source(state);
        }
        catch (const std::exception& e)
        {
            abort_run(trace, std::string("decision failed: ") + e.what());
            break;
        }
        if (options.on_decision)
            options.on_decision(t, decision);

        if (decision.action == ActionKind::Stop)
        {
            trace.stop_decision = decision;
            if (state.current_image)
                trace.terminal = { TerminalStatus::Stopped, {} };
            else
                abort_run(trace, "STOP before any image was produced");
            break;
        }

        auto const started = std::chrono::steady_clock::now();
        try
        {
            auto result = step(state, decision, config, backend);
            StepRecord record;
            record.decision = decision;
            record.observation = result.observation;
            record.prompt_before = state.current_prompt;
            record.prompt_after = result.state.current_prompt;
            record.image_before = state.current_image;
            record.image_after = result.state.current_image;
            record.duration_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            trace.steps.push_back(std::move(record));
            state = std::move(result.state);
        }
        catch (const MaskViolation& e)
        {
            abort_run(trace, std::string("mask violation: ") + e.what());
            break;
        }
        catch (const BackendError& e)
        {
            abort_run(trace, std::string(error_kind_name(e.kind())) + ": " + e.what());
            break;
        }
    }

    trace.final_image = state.current_image;
    return trace;
}

} // namespace

DecisionSource controller(Backend& backend, const RunConfig& config)
{
    return [&backend, config](const AgentState& state) { return decide(backend, state, config); };
}

StepResult step(const AgentState& state, const Decision& decision, const RunConfig& config, Backend& backend)
{
    if (decision.action == ActionKind::Stop)
        throw MaskViolation("STOP is not an executable action");
    if (!action_mask(state, backend.capabilities()).contains(decision.action))
        throw MaskViolation(std::string(wire_name(decision.action)) + " is not permitted at step "
                            + std::to_string(state.step_index));

    auto outcome = execute_action(decision.action, backend, state, config);
    outcome.observation.step = state.step_index;
    outcome.observation.action = decision.action;
    outcome.observation.rationale = decision.rationale;

    StepResult result { state, outcome.observation };
    result.state.current_prompt = std::move(outcome.new_prompt);
    result.state.current_image = std::move(outcome.new_image);
    result.state.history.push_back(std::move(outcome.observation));
    result.state.step_index = state.step_index + 1;
    return result;
}

Trace run_generation(const RunConfig& config, Backend& backend, const std::string& prompt,
                     const RunOptions& options)
{
    config.validate();
    auto trace = begin_trace(config, backend, Mode::Generation, prompt);
    if (prompt.find_first_not_of(" \t\r\n") == std::string::npos)
    {
        abort_run(trace, "empty prompt");
        return trace;
    }
    return run_loop(std::move(trace), AgentState::for_generation(prompt), backend, options);
}

Trace run_editing(const RunConfig& config, Backend& backend, const std::string& prompt, const ImageRef& image,
                  const RunOptions& options)
{
    config.validate();
    auto trace = begin_trace(config, backend, Mode::Editing, prompt);
    trace.initial_image = image;
    if (!backend.capabilities().supports_edit)
    {
        abort_run(trace, "CapabilityMissing: backend does not support edit");
        return trace;
    }
    try
    {
        (void) backend.artifacts().read(image);
    }
    catch (const BackendError& e)
    {
        abort_run(trace, std::string("UnreadableImage: ") + e.what());
        return trace;
    }
    return run_loop(std::move(trace), AgentState::for_editing(prompt, image), backend, options);
}

} // namespace imagent
