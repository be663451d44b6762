// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON-over-HTTP model protocol, version 1. docs/wire_protocol.md is the reference; the golden
// fixtures under tests/fixtures/wire pin the exact bytes.
//
//   GET  /v1/capabilities -> {"schema_version":1,"supports_edit":b,"supports_image_in_understand":b}
//   POST /v1/understand   {"schema_version":1,"text":s,"images":[img...],"template_id":s,"seed":u64}
//                         -> {"schema_version":1,"text":s}
//   POST /v1/generate     {"schema_version":1,"prompt":s,"seed":u64}
//                         -> {"schema_version":1,"image_b64":s,"format":s}
//   POST /v1/edit         {"schema_version":1,"prompt":s,"images":[img],"seed":u64}
//                         -> {"schema_version":1,"image_b64":s,"format":s}
//   img   = {"format":"png"|"jpeg"|"sim-json","data_b64":s}
//   error = non-2xx status with {"error":{"kind":s,"message":s}}

#include <imagent/artifact_store.hpp>
#include <imagent/backend.hpp>
#include <imagent/errors.hpp>

#include <nlohmann/json.hpp>

#include <string>

namespace imagent::wire
{

inline constexpr int kSchemaVersion = 1;

struct WireImage
{
    ImageFormat format = ImageFormat::Png;
    std::string bytes;
};

nlohmann::json encode_image(const WireImage& image);
/// Throws BackendError(BadRequest) on a malformed image object or base64 payload.
WireImage decode_image(const nlohmann::json& j);

nlohmann::json understand_request(const UnderstandRequest& request, const ArtifactStore& store);
nlohmann::json generate_request(std::string_view prompt, std::uint64_t seed);
nlohmann::json edit_request(std::string_view prompt, const WireImage& image, std::uint64_t seed);

nlohmann::json text_response(std::string_view text);
nlohmann::json image_response(const WireImage& image);
nlohmann::json error_response(BackendErrorKind kind, std::string_view message);
nlohmann::json capabilities_response(const Capabilities& caps);

/// HTTP status used for each error kind.
int http_status(BackendErrorKind kind);

/// Maps a failed HTTP exchange to the error taxonomy: the body's error.kind when present,
/// else by status (502/503 Unreachable, 504 Timeout, 4xx BadRequest, other Internal).
BackendError error_from_response(int status, std::string_view body);

/// Throws BackendError(BadRequest) unless `j` is an object carrying schema_version 1.
void require_schema(const nlohmann::json& j);

} // namespace imagent::wire
