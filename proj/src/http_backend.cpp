// SPDX-License-Identifier: Apache-2.0
#include <imagent/errors.hpp>
#include <imagent/http_backend.hpp>
#include <imagent/http_service.hpp>
#include <imagent/wire.hpp>

#include <thread>

namespace imagent
{

using nlohmann::json;

namespace
{

BackendError transport_error(httplib::Error error, const std::string& endpoint)
{
    auto const what = endpoint + ": " + httplib::to_string(error);
    switch (error)
    {
        case httplib::Error::Read:
        case httplib::Error::ConnectionTimeout: return { BackendErrorKind::Timeout, what };
        default: return { BackendErrorKind::Unreachable, what };
    }
}

bool retryable(BackendErrorKind kind)
{
    return kind == BackendErrorKind::Unreachable || kind == BackendErrorKind::Timeout;
}

json parse_body(const std::string& body)
{
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw BackendError(BackendErrorKind::Internal, "server replied with malformed JSON");
    return j;
}

} // namespace

HttpBackend::HttpBackend(HttpConfig config, std::shared_ptr<ArtifactStore> store):
    Backend(std::move(store)), _config(std::move(config))
{
    if (_config.endpoint.empty())
        throw std::invalid_argument("HTTP backend needs an endpoint");
}

std::string HttpBackend::describe() const
{
    return "http(" + _config.endpoint + ")";
}

Capabilities HttpBackend::capabilities() const
{
    std::lock_guard lock(_capsMutex);
    if (_caps)
        return *_caps;
    httplib::Client client(_config.endpoint);
    client.set_connection_timeout(_config.connect_timeout);
    client.set_read_timeout(_config.understand_timeout);
    httplib::Headers headers;
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);
    auto caps = _config.assumed_capabilities;
    if (auto res = client.Get("/v1/capabilities", headers); res && res->status == 200)
    {
        auto j = json::parse(res->body, nullptr, false);
        if (!j.is_discarded() && j.is_object())
        {
            caps.supports_edit = j.value("supports_edit", caps.supports_edit);
            caps.supports_image_in_understand =
                j.value("supports_image_in_understand", caps.supports_image_in_understand);
            _caps = caps;
        }
    }
    return caps;
}

std::string HttpBackend::post(const std::string& path, const std::string& body, std::chrono::seconds timeout) const
{
    httplib::Headers headers;
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);

    for (int attempt = 0;; ++attempt)
    {
        httplib::Client client(_config.endpoint);
        if (!client.is_valid())
            throw BackendError(BackendErrorKind::Unreachable, "unsupported endpoint: " + _config.endpoint);
        client.set_connection_timeout(_config.connect_timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        auto res = client.Post(path, headers, body, "application/json");
        std::optional<BackendError> error;
        if (!res)
            error = transport_error(res.error(), _config.endpoint);
        else if (res->status < 200 || res->status >= 300)
            error = wire::error_from_response(res->status, res->body);
        else
            return res->body;

        if (!retryable(error->kind()) || attempt >= _config.max_retries)
            throw *error;
        std::this_thread::sleep_for(_config.retry_backoff * (attempt + 1));
    }
}

std::string HttpBackend::understand(const UnderstandRequest& request)
{
    require_understand_images(capabilities(), request);
    auto j = parse_body(post("/v1/understand", wire::understand_request(request, artifacts()).dump(),
                             _config.understand_timeout));
    if (!j.contains("text") || !j["text"].is_string())
        throw BackendError(BackendErrorKind::Internal, "understand reply lacks text");
    return j["text"].get<std::string>();
}

ImageRef HttpBackend::store_image_response(const std::string& body)
{
    auto j = parse_body(body);
    try
    {
        auto image = wire::decode_image({ { "format", j.value("format", "") }, { "data_b64", j.value("image_b64", "") } });
        return artifacts().put(image.bytes, image.format);
    }
    catch (const BackendError& e)
    {
        throw BackendError(BackendErrorKind::Internal, std::string("server returned a bad image: ") + e.what());
    }
}

ImageRef HttpBackend::generate(std::string_view prompt, std::uint64_t seed)
{
    return store_image_response(post("/v1/generate", wire::generate_request(prompt, seed).dump(), _config.image_timeout));
}

ImageRef HttpBackend::edit(std::string_view prompt, const ImageRef& image, std::uint64_t seed)
{
    require_edit(capabilities());
    wire::WireImage input { image.format, artifacts().read(image) };
    return store_image_response(
        post("/v1/edit", wire::edit_request(prompt, input, seed).dump(), _config.image_timeout));
}

// -- server side --------------------------------------------------------------------------------

namespace
{

void reply_error(httplib::Response& res, const BackendError& e)
{
    res.status = wire::http_status(e.kind());
    res.set_content(wire::error_response(e.kind(), e.what()).dump(), "application/json");
}

template <typename Handler>
void guarded(httplib::Response& res, Handler&& handler)
{
    try
    {
        res.status = 200;
        res.set_content(handler().dump(), "application/json");
    }
    catch (const BackendError& e)
    {
        reply_error(res, e);
    }
    catch (const std::exception& e)
    {
        reply_error(res, BackendError(BackendErrorKind::Internal, e.what()));
    }
}

json parse_request(const httplib::Request& req)
{
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded())
        throw BackendError(BackendErrorKind::BadRequest, "body is not JSON");
    wire::require_schema(j);
    return j;
}

std::string string_field(const json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_string())
        throw BackendError(BackendErrorKind::BadRequest, std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

std::uint64_t seed_field(const json& j)
{
    if (!j.contains("seed"))
        return 0;
    if (!j["seed"].is_number_unsigned())
        throw BackendError(BackendErrorKind::BadRequest, "seed must be a non-negative integer");
    return j["seed"].get<std::uint64_t>();
}

std::vector<ImageRef> image_fields(const json& j, ArtifactStore& store)
{
    std::vector<ImageRef> out;
    if (!j.contains("images"))
        return out;
    if (!j["images"].is_array())
        throw BackendError(BackendErrorKind::BadRequest, "images must be an array");
    for (auto const& img: j["images"])
    {
        auto decoded = wire::decode_image(img);
        out.push_back(store.put(decoded.bytes, decoded.format));
    }
    return out;
}

json image_reply(Backend& backend, const ImageRef& image)
{
    return wire::image_response({ image.format, backend.artifacts().read(image) });
}

} // namespace

void serve_backend(httplib::Server& server, Backend& backend)
{
    server.Get("/v1/capabilities", [&backend](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { return wire::capabilities_response(backend.capabilities()); });
    });
    server.Post("/v1/understand", [&backend](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto j = parse_request(req);
            UnderstandRequest request;
            request.text = string_field(j, "text");
            request.template_id = string_field(j, "template_id");
            request.seed = seed_field(j);
            request.images = image_fields(j, backend.artifacts());
            return wire::text_response(backend.understand(request));
        });
    });
    server.Post("/v1/generate", [&backend](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto j = parse_request(req);
            return image_reply(backend, backend.generate(string_field(j, "prompt"), seed_field(j)));
        });
    });
    server.Post("/v1/edit", [&backend](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto j = parse_request(req);
            if (!backend.capabilities().supports_edit)
                throw BackendError(BackendErrorKind::CapabilityMissing, "edit is not supported");
            auto images = image_fields(j, backend.artifacts());
            if (images.size() != 1)
                throw BackendError(BackendErrorKind::BadRequest, "edit takes exactly one image");
            return image_reply(backend, backend.edit(string_field(j, "prompt"), images.front(), seed_field(j)));
        });
    });
}

} // namespace imagent
