// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/backend.hpp>
#include <imagent/types.hpp>

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace imagent
{

/// Result of one action function: the next prompt and image plus the observation to append.
struct ActionOutcome
{
    std::string new_prompt;
    std::optional<ImageRef> new_image;
    Observation observation;
};

struct CandidateScore
{
    int index = 0;
    double score = 0.0; // in [0, 1]
    std::string critique;
};

/// One-shot generate (generation mode) or edit (editing mode) from the current prompt.
ActionOutcome naive(Backend& backend, const AgentState& state, const RunConfig& config);

/// Rewrites the prompt through the enhancement template, then regenerates from it.
/// An empty rewrite leaves prompt and image untouched and marks the observation failed.
ActionOutcome enhance_prompt_cot(Backend& backend, const AgentState& state, const RunConfig& config);

/// Image-grounded revision: one understand call summarizes the image, lists discrepancies and
/// emits a revised prompt under templates::kRevisedPromptMarker. The discrepancy text becomes
/// the observation feedback. Requires a current image.
ActionOutcome revise_prompt(Backend& backend, const AgentState& state, const RunConfig& config);

/// Asks for a terse edit instruction and applies it to the current image. Never changes the prompt.
ActionOutcome refine_image_details(Backend& backend, const AgentState& state, const RunConfig& config);

/// Samples `n` candidates with seeds derived from (config.seed, step, k), judges each against
/// the current prompt and keeps the best (lowest index on ties). Failed candidates are skipped;
/// if all fail the state is left unchanged and the observation is marked failed.
ActionOutcome best_of_n(Backend& backend, const AgentState& state, const RunConfig& config, int n);

/// Dispatches on `action` (which must not be Stop).
ActionOutcome execute_action(ActionKind action, Backend& backend, const AgentState& state, const RunConfig& config);

/// Judges `image` against `prompt`. Throws ScoreParseError on an unusable reply.
CandidateScore evaluate_alignment(Backend& backend, std::string_view prompt, const ImageRef& image, int index = 0);

/// Reads "Score: 8 - critique" (8/10), "Score: 8/10" or an exact fraction such as "Score: 2/3".
/// Throws ScoreParseError when no score in [0, 1] can be read.
double parse_score(std::string_view reply, std::string* critique = nullptr);

/// Index of the highest score, lowest index on ties; nullopt if every entry is empty.
std::optional<std::size_t> select_best(std::span<const std::optional<double>> scores);

/// Seed used for the generation/edit issued by `step` (candidate 0 unless best-of-N).
std::uint64_t step_seed(const RunConfig& config, int step, int candidate = 0);

} // namespace imagent
