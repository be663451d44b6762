// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/backend.hpp>
#include <imagent/types.hpp>

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace imagent
{

/// Actions the controller may pick in `state`. Without an image only the actions that create
/// one are available; in editing mode the first step may not be STOP.
ActionSet action_mask(const AgentState& state);

/// As above, additionally dropping image_detail_refinement when the backend cannot edit, and
/// every action that must look at an image (prompt_refinement, image_detail_refinement,
/// best_of_N_sampling) when the backend cannot take images in understand.
ActionSet action_mask(const AgentState& state, const Capabilities& caps);

/// One-line description shown to the controller next to each permitted action.
std::string_view action_definition(ActionKind action);

/// Images attached to the controller call: the current image, then the input image when editing.
std::vector<ImageRef> policy_images(const AgentState& state);

std::string build_policy_prompt(const AgentState& state, const RunConfig& config);
std::string build_policy_prompt(const AgentState& state, const RunConfig& config, ActionSet mask,
                                bool images_attached = true);

/// Upper bound on build_policy_prompt's length for any state under `config`.
std::size_t policy_prompt_ceiling(const RunConfig& config);

enum class ParseErrorKind
{
    NoAction,
    MaskedAction,
};

struct ParseError
{
    ParseErrorKind kind = ParseErrorKind::NoAction;
    std::optional<ActionKind> action; // the rejected action for MaskedAction
    std::string message;
};

using ParseOutcome = std::variant<Decision, ParseError>;

/// Extracts a decision from a controller reply. Tries the first JSON object carrying a
/// recognizable "action" first, then falls back to the earliest action name in the text.
/// Total: any byte string yields a Decision or a ParseError.
ParseOutcome parse_decision(std::string_view raw, ActionSet mask);

/// Queries the controller, retrying unparseable replies up to `config.parse_retries` times.
/// When every attempt fails, falls back to naive generation without an image and STOP with one
/// (naive generation if STOP is masked) and flags the Decision. BackendError propagates.
Decision decide(Backend& backend, const AgentState& state, const RunConfig& config);

} // namespace imagent
