// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/actions.hpp>
#include <imagent/backend.hpp>
#include <imagent/types.hpp>

#include <functional>
#include <string>

namespace imagent
{

/// Produces the next decision for a state. The default source is the model controller (decide).
using DecisionSource = std::function<Decision(const AgentState&)>;

struct RunOptions
{
    DecisionSource decisions;                                 // empty: use the controller
    std::function<void(int step, const Decision&)> on_decision; // called before each decision is acted on
};

struct StepResult
{
    AgentState state;
    Observation observation;
};

/// Executes one non-STOP decision: applies the action function and appends its observation.
/// Throws MaskViolation when `decision.action` is STOP or not permitted in `state`.
StepResult step(const AgentState& state, const Decision& decision, const RunConfig& config, Backend& backend);

/// The generation loop: decide, break on STOP, otherwise act and record, for at most t_max steps.
Trace run_generation(const RunConfig& config, Backend& backend, const std::string& prompt,
                     const RunOptions& options = {});

/// The editing loop: as run_generation, starting from `image` and editing instead of generating.
Trace run_editing(const RunConfig& config, Backend& backend, const std::string& prompt, const ImageRef& image,
                  const RunOptions& options = {});

DecisionSource controller(Backend& backend, const RunConfig& config);

} // namespace imagent
