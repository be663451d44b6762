// SPDX-License-Identifier: Apache-2.0
#include <imagent/templates.hpp>

#include <stdexcept>

namespace imagent::templates
{

// Generated from resources/templates/*.txt at configure time.
std::string_view embedded_template(std::string_view file_stem);

namespace
{

std::string_view stem(TemplateId id)
{
    switch (id)
    {
        case TemplateId::PolicyGeneration: return "policy.generation";
        case TemplateId::PolicyEditing: return "policy.editing";
        case TemplateId::Enhance: return "enhance";
        case TemplateId::Revise: return "revise";
        case TemplateId::Refine: return "refine";
        case TemplateId::Judge: return "judge";
    }
    return "";
}

} // namespace

std::string id_string(TemplateId id)
{
    return std::string(stem(id)) + "." + std::string(kVersion);
}

std::optional<TemplateId> from_id_string(std::string_view id)
{
    for (auto t: { TemplateId::PolicyGeneration, TemplateId::PolicyEditing, TemplateId::Enhance,
                   TemplateId::Revise, TemplateId::Refine, TemplateId::Judge })
        if (id_string(t) == id)
            return t;
    return std::nullopt;
}

std::string_view body(TemplateId id)
{
    auto text = embedded_template(id_string(id));
    if (text.empty())
        throw std::logic_error("template not embedded: " + id_string(id));
    return text;
}

} // namespace imagent::templates
