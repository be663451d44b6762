// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/types.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace imagent
{

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);
std::optional<std::string> base64_decode(std::string_view encoded);

/// Sniffs PNG / JPEG magic numbers, else accepts a well-formed sim-json attribute bag.
std::optional<ImageFormat> detect_format(std::string_view bytes);

/// Content-addressed image storage. Files are named `<digest>.<format>`; writing the same
/// bytes twice is a no-op. Without a root directory, bytes are kept in memory.
/// Safe for concurrent use.
class ArtifactStore
{
public:
    ArtifactStore() = default;
    explicit ArtifactStore(std::filesystem::path root);

    ArtifactStore(const ArtifactStore&) = delete;
    ArtifactStore& operator=(const ArtifactStore&) = delete;

    ImageRef put(std::string_view bytes, ImageFormat format);

    /// Reads and digest-checks. Throws BackendError(UnreadableImage).
    [[nodiscard]] std::string read(const ImageRef& image) const;

    /// Copies an external image file into the store.
    ImageRef import_file(const std::filesystem::path& file);

    [[nodiscard]] bool contains(const ImageRef& image) const;
    [[nodiscard]] const std::optional<std::filesystem::path>& root() const noexcept { return _root; }

    /// Writes the artifact into `dir` (content-addressed), creating `dir` if needed.
    void export_to(const ImageRef& image, const std::filesystem::path& dir) const;

private:
    std::optional<std::filesystem::path> _root;
    mutable std::mutex _mutex;
    std::map<std::string, std::string> _memory;
};

} // namespace imagent
