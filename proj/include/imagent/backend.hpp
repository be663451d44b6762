// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/artifact_store.hpp>
#include <imagent/types.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace imagent
{

struct Capabilities
{
    bool supports_edit = true;
    bool supports_image_in_understand = true;

    friend bool operator==(const Capabilities&, const Capabilities&) = default;
};

struct UnderstandRequest
{
    std::string text;
    std::vector<ImageRef> images;
    std::string template_id;
    std::uint64_t seed = 0;
};

/// The model protocol: one understanding verb and two image verbs. Every call may throw
/// BackendError. Implementations must tolerate concurrent calls from multiple threads.
class Backend
{
public:
    explicit Backend(std::shared_ptr<ArtifactStore> store): _store(std::move(store)) {}
    virtual ~Backend() = default;

    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    [[nodiscard]] virtual Capabilities capabilities() const = 0;
    [[nodiscard]] virtual std::string describe() const = 0;

    virtual std::string understand(const UnderstandRequest& request) = 0;
    virtual ImageRef generate(std::string_view prompt, std::uint64_t seed) = 0;
    virtual ImageRef edit(std::string_view prompt, const ImageRef& image, std::uint64_t seed) = 0;

    [[nodiscard]] ArtifactStore& artifacts() const noexcept { return *_store; }
    [[nodiscard]] const std::shared_ptr<ArtifactStore>& artifacts_ptr() const noexcept { return _store; }

private:
    std::shared_ptr<ArtifactStore> _store;
};

/// Throws BackendError(CapabilityMissing) unless the request is admissible for `caps`.
void require_understand_images(const Capabilities& caps, const UnderstandRequest& request);
void require_edit(const Capabilities& caps);

} // namespace imagent
