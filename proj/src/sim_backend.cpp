// SPDX-License-Identifier: Apache-2.0
#include <imagent/errors.hpp>
#include <imagent/seeding.hpp>
#include <imagent/sim_backend.hpp>
#include <imagent/templates.hpp>
#include <imagent/text.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <sstream>

namespace imagent
{

using templates::TemplateId;

void SimWorldConfig::validate() const
{
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
        throw std::invalid_argument("noise_rate must be in [0, 1]");
    if (refine_gain < 1)
        throw std::invalid_argument("refine_gain must be >= 1");
    if (vocabulary.empty())
        throw std::invalid_argument("vocabulary must not be empty");
}

SimulatedBackend::SimulatedBackend(SimWorldConfig config, std::shared_ptr<ArtifactStore> store):
    Backend(std::move(store)), _config(std::move(config)), _vocabulary(_config.vocabulary)
{
    _config.validate();
}

std::string SimulatedBackend::describe() const
{
    std::ostringstream out;
    out << "sim(noise_rate=" << _config.noise_rate << ",refine_gain=" << _config.refine_gain
        << ",vocabulary=" << _vocabulary.tokens().size() << (_config.scripted_controller ? ",scripted" : "")
        << ")";
    return out.str();
}

sim::AttributeBag SimulatedBackend::attributes_of(const ImageRef& image) const
{
    auto bag = sim::decode_attributes(artifacts().read(image));
    if (!bag)
        throw BackendError(BackendErrorKind::UnreadableImage, "not a sim-json image: " + image.file_name());
    return *bag;
}

std::string SimulatedBackend::understand(const UnderstandRequest& request)
{
    require_understand_images(_config.capabilities, request);
    auto id = templates::from_id_string(request.template_id);
    if (!id)
        throw BackendError(BackendErrorKind::BadRequest, "unknown template_id: " + request.template_id);
    switch (*id)
    {
        case TemplateId::PolicyGeneration:
        case TemplateId::PolicyEditing: return policy_reply(request);
        case TemplateId::Enhance: return enhance_reply(request);
        case TemplateId::Revise: return revise_reply(request);
        case TemplateId::Refine: return refine_reply(request);
        case TemplateId::Judge: return judge_reply(request);
    }
    throw BackendError(BackendErrorKind::BadRequest, "unhandled template");
}

namespace
{

std::vector<ActionKind> permitted_actions(std::string_view body)
{
    std::vector<ActionKind> out;
    auto pos = body.find("Permitted actions:");
    if (pos == std::string_view::npos)
        return out;
    std::istringstream lines { std::string(body.substr(pos)) };
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line) && line.starts_with("- "))
    {
        auto name = line.substr(2, line.find(':') == std::string::npos ? std::string::npos : line.find(':') - 2);
        if (auto a = action_from_name(name))
            out.push_back(*a);
    }
    return out;
}

int parse_step(std::string_view body)
{
    auto value = text::line_value(body, "Step:");
    try
    {
        return value.empty() ? 1 : std::stoi(value);
    }
    catch (const std::exception&)
    {
        return 1;
    }
}

std::string envelope(ActionKind action, std::string_view reason)
{
    nlohmann::json j;
    j["action"] = wire_name(action);
    j["reason"] = reason;
    return j.dump();
}

std::string list_or(const std::vector<std::string>& items, std::string_view empty)
{
    return items.empty() ? std::string(empty) : text::join(items, ", ");
}

} // namespace

std::string SimulatedBackend::policy_reply(const UnderstandRequest& request) const
{
    auto const step = parse_step(request.text);
    if (_config.scripted_controller)
    {
        auto const& script = *_config.scripted_controller;
        auto idx = static_cast<std::size_t>(std::max(step - 1, 0));
        if (idx >= script.size())
            return envelope(ActionKind::Stop, "script exhausted");
        if (auto a = action_from_name(script[idx]))
            return envelope(*a, "scripted");
        return script[idx];
    }

    auto const permitted = permitted_actions(request.text);
    auto const allowed = [&](ActionKind a) { return std::ranges::find(permitted, a) != permitted.end(); };
    auto const hasImage = text::line_value(request.text, "Current image:") != "none" && !request.images.empty();

    if (!hasImage)
    {
        if (allowed(ActionKind::BestOfN))
            return envelope(ActionKind::BestOfN,
                            "No image exists yet; sampling several candidates and keeping the best reduces "
                            "generation randomness.");
        return envelope(ActionKind::NaiveGeneration, "No image exists yet; starting with a simple generation.");
    }

    auto const wanted = _vocabulary.keywords(text::line_value(request.text, "Original request:"));
    auto const currentPrompt = _vocabulary.keywords(text::line_value(request.text, "Current prompt:"));
    auto const gaps = sim::overlap(wanted, attributes_of(request.images.front())).missing;

    if (gaps.empty())
    {
        if (allowed(ActionKind::Stop))
            return envelope(ActionKind::Stop, "The current image matches every element of the request.");
        return envelope(ActionKind::NaiveGeneration, "The image already matches; applying the edit directly.");
    }

    auto const gapList = text::join(gaps, ", ");
    bool promptLacksGap = std::ranges::any_of(gaps, [&](auto const& g) { return !currentPrompt.contains(g); });
    if (promptLacksGap && allowed(ActionKind::PromptRevision))
        return envelope(ActionKind::PromptRevision,
                        "The current prompt no longer asks for " + gapList + "; revising it against the image.");
    if (allowed(ActionKind::ImageDetailRefinement))
        return envelope(ActionKind::ImageDetailRefinement,
                        "The current image does not clearly show " + gapList
                            + "; editing the image to add the missing details.");
    return envelope(permitted.empty() ? ActionKind::NaiveGeneration : permitted.front(), "fallback choice");
}

std::string SimulatedBackend::enhance_reply(const UnderstandRequest& request) const
{
    auto const current = text::line_value(request.text, "Prompt:");
    auto keywords = _vocabulary.keywords(text::line_value(request.text, "Original request:"));
    keywords.merge(_vocabulary.keywords(current));
    if (keywords.empty())
        return current;
    return current + ", highly detailed, clearly showing "
           + text::join(std::vector<std::string>(keywords.begin(), keywords.end()), ", ");
}

std::string SimulatedBackend::revise_reply(const UnderstandRequest& request) const
{
    if (request.images.empty())
        throw BackendError(BackendErrorKind::BadRequest, "revision needs an image");
    auto const current = text::line_value(request.text, "Prompt:");
    auto target = _vocabulary.keywords(current);
    target.merge(_vocabulary.keywords(text::line_value(request.text, "Original request:")));
    auto const attrs = attributes_of(request.images.front());
    auto const gaps = sim::overlap(target, attrs).missing;

    std::ostringstream out;
    out << "Summary: the image shows " << list_or({ attrs.begin(), attrs.end() }, "nothing recognizable") << "\n";
    out << "Discrepancies: " << (gaps.empty() ? "none" : "missing " + text::join(gaps, ", ")) << "\n";
    out << templates::kRevisedPromptMarker << "\n";
    out << (gaps.empty() ? current : current + ", clearly showing " + text::join(gaps, ", ")) << "\n";
    return out.str();
}

std::string SimulatedBackend::refine_reply(const UnderstandRequest& request) const
{
    if (request.images.empty())
        throw BackendError(BackendErrorKind::BadRequest, "refinement needs an image");
    auto const wanted = _vocabulary.keywords(text::line_value(request.text, "Prompt:"));
    auto const gaps = sim::overlap(wanted, attributes_of(request.images.front())).missing;
    if (gaps.empty())
        return "keep the image unchanged";
    return "add " + text::join(gaps, ", ");
}

std::string SimulatedBackend::judge_reply(const UnderstandRequest& request) const
{
    if (request.images.empty())
        throw BackendError(BackendErrorKind::BadRequest, "judging needs an image");
    auto const wanted = _vocabulary.keywords(text::line_value(request.text, "Prompt:"));
    auto const o = sim::overlap(wanted, attributes_of(request.images.front()));

    // Integer 0-10 when exact, otherwise the exact fraction, so the normalized score is exact.
    std::string score;
    if (o.total == 0)
        score = "10";
    else if ((10 * o.matched) % o.total == 0)
        score = std::to_string(10 * o.matched / o.total);
    else
        score = std::to_string(o.matched) + "/" + std::to_string(o.total);

    std::string critique = o.total == 0       ? "nothing specific to check"
                           : o.missing.empty() ? "all requested elements present"
                                               : "missing: " + text::join(o.missing, ", ");
    return "Score: " + score + " \xE2\x80\x94 " + critique;
}

ImageRef SimulatedBackend::generate(std::string_view prompt, std::uint64_t seed)
{
    if (text::trim(prompt).empty())
        throw BackendError(BackendErrorKind::BadRequest, "empty prompt");
    std::mt19937_64 rng(splitmix64(fnv1a64(prompt) ^ splitmix64(seed)));
    sim::AttributeBag bag;
    for (auto const& [keyword, count]: _vocabulary.mentions(prompt))
    {
        bool rendered = false;
        for (int i = 0; i < count; ++i)
            rendered |= unit_interval(rng()) >= _config.noise_rate;
        if (rendered)
            bag.insert(keyword);
    }
    return artifacts().put(sim::encode_attributes(bag), ImageFormat::SimJson);
}

ImageRef SimulatedBackend::edit(std::string_view prompt, const ImageRef& image, std::uint64_t seed)
{
    require_edit(_config.capabilities);
    auto bag = attributes_of(image);
    if (_config.identity_edit)
        return artifacts().put(sim::encode_attributes(bag), ImageFormat::SimJson);

    auto gaps = sim::overlap(_vocabulary.keywords(prompt), bag).missing;
    std::mt19937_64 rng(splitmix64(fnv1a64(prompt) ^ splitmix64(seed) ^ fnv1a64(image.digest)));
    for (std::size_t i = gaps.size(); i > 1; --i)
        std::swap(gaps[i - 1], gaps[rng() % i]);
    auto const n = std::min(gaps.size(), static_cast<std::size_t>(_config.refine_gain));
    bag.insert(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(n));
    return artifacts().put(sim::encode_attributes(bag), ImageFormat::SimJson);
}

} // namespace imagent
