// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace imagent::templates
{

/// Version of the shipped prompt templates, recorded in every trace.
inline constexpr std::string_view kVersion = "v1";

enum class TemplateId
{
    PolicyGeneration,
    PolicyEditing,
    Enhance,
    Revise,
    Refine,
    Judge,
};

/// Wire identifier, e.g. "policy.generation.v1".
std::string id_string(TemplateId id);
std::optional<TemplateId> from_id_string(std::string_view id);

/// Template text with `{{placeholder}}` slots, as shipped under resources/templates.
std::string_view body(TemplateId id);

/// Delimiter line preceding the revised prompt in revision replies.
inline constexpr std::string_view kRevisedPromptMarker = "### REVISED PROMPT";

} // namespace imagent::templates
