// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/backend.hpp>

#include <chrono>
#include <mutex>
#include <optional>
#include <string>

namespace imagent
{

struct HttpConfig
{
    std::string endpoint; // e.g. "http://127.0.0.1:8080"
    std::string api_key;  // sent as "Authorization: Bearer <key>" when non-empty
    std::chrono::seconds connect_timeout { 10 };
    std::chrono::seconds understand_timeout { 60 };
    std::chrono::seconds image_timeout { 120 }; // generate and edit
    int max_retries = 2;                        // extra attempts after Unreachable/Timeout
    std::chrono::milliseconds retry_backoff { 250 };
    /// Used when the server does not answer GET /v1/capabilities.
    Capabilities assumed_capabilities;
};

/// Client for a remote model server speaking the wire protocol in wire.hpp.
/// Each call opens its own connection, so one instance may be shared across threads.
class HttpBackend final: public Backend
{
public:
    HttpBackend(HttpConfig config, std::shared_ptr<ArtifactStore> store);

    [[nodiscard]] Capabilities capabilities() const override;
    [[nodiscard]] std::string describe() const override;

    std::string understand(const UnderstandRequest& request) override;
    ImageRef generate(std::string_view prompt, std::uint64_t seed) override;
    ImageRef edit(std::string_view prompt, const ImageRef& image, std::uint64_t seed) override;

private:
    std::string post(const std::string& path, const std::string& body, std::chrono::seconds timeout) const;
    ImageRef store_image_response(const std::string& body);

    HttpConfig _config;
    mutable std::mutex _capsMutex;
    mutable std::optional<Capabilities> _caps;
};

} // namespace imagent
