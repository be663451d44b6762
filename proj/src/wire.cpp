// SPDX-License-Identifier: Apache-2.0
#include <imagent/wire.hpp>

namespace imagent::wire
{

using nlohmann::json;

namespace
{

[[noreturn]] void bad_request(const std::string& what)
{
    throw BackendError(BackendErrorKind::BadRequest, what);
}

} // namespace

json encode_image(const WireImage& image)
{
    return { { "format", format_name(image.format) }, { "data_b64", base64_encode(image.bytes) } };
}

WireImage decode_image(const json& j)
{
    if (!j.is_object() || !j.contains("format") || !j.contains("data_b64") || !j["format"].is_string()
        || !j["data_b64"].is_string())
        bad_request("image must be {\"format\", \"data_b64\"}");
    auto format = format_from_name(j["format"].get<std::string>());
    if (!format)
        bad_request("unknown image format: " + j["format"].get<std::string>());
    auto bytes = base64_decode(j["data_b64"].get<std::string>());
    if (!bytes)
        bad_request("malformed base64 image");
    return { *format, std::move(*bytes) };
}

json understand_request(const UnderstandRequest& request, const ArtifactStore& store)
{
    json images = json::array();
    for (auto const& image: request.images)
        images.push_back(encode_image({ image.format, store.read(image) }));
    return {
        { "schema_version", kSchemaVersion }, { "text", request.text },   { "images", images },
        { "template_id", request.template_id }, { "seed", request.seed },
    };
}

json generate_request(std::string_view prompt, std::uint64_t seed)
{
    return { { "schema_version", kSchemaVersion }, { "prompt", prompt }, { "seed", seed } };
}

json edit_request(std::string_view prompt, const WireImage& image, std::uint64_t seed)
{
    return { { "schema_version", kSchemaVersion },
             { "prompt", prompt },
             { "images", json::array({ encode_image(image) }) },
             { "seed", seed } };
}

json text_response(std::string_view text)
{
    return { { "schema_version", kSchemaVersion }, { "text", text } };
}

json image_response(const WireImage& image)
{
    return { { "schema_version", kSchemaVersion },
             { "image_b64", base64_encode(image.bytes) },
             { "format", format_name(image.format) } };
}

json error_response(BackendErrorKind kind, std::string_view message)
{
    return { { "error", { { "kind", error_kind_name(kind) }, { "message", message } } } };
}

json capabilities_response(const Capabilities& caps)
{
    return { { "schema_version", kSchemaVersion },
             { "supports_edit", caps.supports_edit },
             { "supports_image_in_understand", caps.supports_image_in_understand } };
}

int http_status(BackendErrorKind kind)
{
    switch (kind)
    {
        case BackendErrorKind::BadRequest:
        case BackendErrorKind::UnreadableImage: return 400;
        case BackendErrorKind::CapabilityMissing: return 501;
        case BackendErrorKind::Unreachable: return 503;
        case BackendErrorKind::Timeout: return 504;
        case BackendErrorKind::Internal: return 500;
    }
    return 500;
}

BackendError error_from_response(int status, std::string_view body)
{
    auto j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("error") && j["error"].is_object())
    {
        auto const& e = j["error"];
        auto kind = e.contains("kind") && e["kind"].is_string() ? error_kind_from_name(e["kind"].get<std::string>())
                                                                : std::nullopt;
        auto message = e.contains("message") && e["message"].is_string() ? e["message"].get<std::string>() : "";
        if (kind)
            return { *kind, message.empty() ? "HTTP " + std::to_string(status) : message };
    }
    auto const what = "HTTP " + std::to_string(status);
    if (status == 502 || status == 503)
        return { BackendErrorKind::Unreachable, what };
    if (status == 504)
        return { BackendErrorKind::Timeout, what };
    if (status >= 400 && status < 500)
        return { BackendErrorKind::BadRequest, what };
    return { BackendErrorKind::Internal, what };
}

void require_schema(const json& j)
{
    if (!j.is_object())
        bad_request("body must be a JSON object");
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()
        || j["schema_version"].get<int>() != kSchemaVersion)
        bad_request("schema_version must be " + std::to_string(kSchemaVersion));
}

} // namespace imagent::wire
