// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/backend.hpp>
#include <imagent/sim_world.hpp>

#include <optional>
#include <string>
#include <vector>

namespace imagent
{

struct SimWorldConfig
{
    std::vector<std::string> vocabulary = sim::default_vocabulary();
    /// Probability that one mention of a keyword fails to render. A keyword mentioned k times
    /// in the prompt is missing from the image with probability noise_rate^k.
    double noise_rate = 0.0;
    /// Keyword gaps closed per edit call.
    int refine_gain = 1;
    /// Overrides the controller: entry t-1 answers the policy call of step t; past the end, STOP.
    /// Known action names are wrapped in the JSON envelope, anything else is replied verbatim.
    std::optional<std::vector<std::string>> scripted_controller;
    /// Edit returns its input unchanged.
    bool identity_edit = false;
    Capabilities capabilities;

    void validate() const;
};

/// Deterministic stand-in for a unified multimodal model. Images are attribute bags, the
/// judge is exact keyword overlap, and all randomness is derived from call arguments.
class SimulatedBackend final: public Backend
{
public:
    SimulatedBackend(SimWorldConfig config, std::shared_ptr<ArtifactStore> store);

    [[nodiscard]] Capabilities capabilities() const override { return _config.capabilities; }
    [[nodiscard]] std::string describe() const override;

    std::string understand(const UnderstandRequest& request) override;
    ImageRef generate(std::string_view prompt, std::uint64_t seed) override;
    ImageRef edit(std::string_view prompt, const ImageRef& image, std::uint64_t seed) override;

    [[nodiscard]] const SimWorldConfig& config() const noexcept { return _config; }
    [[nodiscard]] const sim::Vocabulary& vocabulary() const noexcept { return _vocabulary; }

    /// Decodes a stored sim-json image. Throws BackendError(UnreadableImage).
    [[nodiscard]] sim::AttributeBag attributes_of(const ImageRef& image) const;

private:
    std::string policy_reply(const UnderstandRequest& request) const;
    std::string enhance_reply(const UnderstandRequest& request) const;
    std::string revise_reply(const UnderstandRequest& request) const;
    std::string refine_reply(const UnderstandRequest& request) const;
    std::string judge_reply(const UnderstandRequest& request) const;

    SimWorldConfig _config;
    sim::Vocabulary _vocabulary;
};

} // namespace imagent
