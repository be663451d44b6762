// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace imagent
{

/// Error taxonomy shared by every backend and by the HTTP wire format.
enum class BackendErrorKind
{
    Timeout,
    Unreachable,
    CapabilityMissing,
    BadRequest,
    UnreadableImage,
    Internal,
};

std::string_view error_kind_name(BackendErrorKind kind) noexcept;
std::optional<BackendErrorKind> error_kind_from_name(std::string_view name);

class BackendError: public std::runtime_error
{
public:
    BackendError(BackendErrorKind kind, const std::string& message):
        std::runtime_error(message), _kind(kind)
    {
    }

    [[nodiscard]] BackendErrorKind kind() const noexcept { return _kind; }

private:
    BackendErrorKind _kind;
};

/// A decision reached `step` that the action mask forbids. Indicates a policy bug.
class MaskViolation: public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

class ScoreParseError: public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class TraceErrorKind
{
    Io,
    DanglingArtifact,
    SchemaMismatch,
    Malformed,
};

std::string_view trace_error_kind_name(TraceErrorKind kind) noexcept;

class TraceError: public std::runtime_error
{
public:
    TraceError(TraceErrorKind kind, const std::string& message): std::runtime_error(message), _kind(kind) {}

    [[nodiscard]] TraceErrorKind kind() const noexcept { return _kind; }

private:
    TraceErrorKind _kind;
};

} // namespace imagent
