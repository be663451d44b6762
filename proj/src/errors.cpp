// SPDX-License-Identifier: Apache-2.0
#include <imagent/backend.hpp>
#include <imagent/errors.hpp>

namespace imagent
{

std::string_view error_kind_name(BackendErrorKind kind) noexcept
{
    switch (kind)
    {
        case BackendErrorKind::Timeout: return "Timeout";
        case BackendErrorKind::Unreachable: return "Unreachable";
        case BackendErrorKind::CapabilityMissing: return "CapabilityMissing";
        case BackendErrorKind::BadRequest: return "BadRequest";
        case BackendErrorKind::UnreadableImage: return "UnreadableImage";
        case BackendErrorKind::Internal: return "Internal";
    }
    return "Internal";
}

std::optional<BackendErrorKind> error_kind_from_name(std::string_view name)
{
    for (auto k: { BackendErrorKind::Timeout, BackendErrorKind::Unreachable, BackendErrorKind::CapabilityMissing,
                   BackendErrorKind::BadRequest, BackendErrorKind::UnreadableImage, BackendErrorKind::Internal })
        if (error_kind_name(k) == name)
            return k;
    return std::nullopt;
}

std::string_view trace_error_kind_name(TraceErrorKind kind) noexcept
{
    switch (kind)
    {
        case TraceErrorKind::Io: return "IoError";
        case TraceErrorKind::DanglingArtifact: return "DanglingArtifact";
        case TraceErrorKind::SchemaMismatch: return "SchemaMismatch";
        case TraceErrorKind::Malformed: return "Malformed";
    }
    return "Malformed";
}

void require_understand_images(const Capabilities& caps, const UnderstandRequest& request)
{
    if (!request.images.empty() && !caps.supports_image_in_understand)
        throw BackendError(BackendErrorKind::CapabilityMissing, "backend cannot take images in understand");
}

void require_edit(const Capabilities& caps)
{
    if (!caps.supports_edit)
        throw BackendError(BackendErrorKind::CapabilityMissing, "backend does not support edit");
}

} // namespace imagent
