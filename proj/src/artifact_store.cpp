// SPDX-License-Identifier: Apache-2.0
#include <imagent/artifact_store.hpp>
#include <imagent/errors.hpp>
#include <imagent/sim_world.hpp>

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <sstream>

namespace imagent
{

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md {};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i)
    {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                             reinterpret_cast<const unsigned char*>(bytes.data()),
                             static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::optional<std::string> base64_decode(std::string_view encoded)
{
    if (encoded.size() % 4 != 0)
        return std::nullopt;
    for (char c: encoded)
    {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+'
                  || c == '/' || c == '=';
        if (!ok)
            return std::nullopt;
    }
    std::string out(3 * (encoded.size() / 4), '\0');
    auto n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                             reinterpret_cast<const unsigned char*>(encoded.data()),
                             static_cast<int>(encoded.size()));
    if (n < 0)
        return std::nullopt;
    // EVP_DecodeBlock does not strip the bytes contributed by '=' padding.
    std::size_t pad = 0;
    if (!encoded.empty() && encoded.back() == '=')
        pad = encoded.size() >= 2 && encoded[encoded.size() - 2] == '=' ? 2 : 1;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::optional<ImageFormat> detect_format(std::string_view bytes)
{
    if (bytes.starts_with("\x89PNG\r\n\x1a\n"))
        return ImageFormat::Png;
    if (bytes.starts_with("\xFF\xD8\xFF"))
        return ImageFormat::Jpeg;
    if (sim::decode_attributes(bytes))
        return ImageFormat::SimJson;
    return std::nullopt;
}

namespace
{

std::optional<std::string> read_file(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomically(const fs::path& target, std::string_view bytes)
{
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw BackendError(BackendErrorKind::Internal, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
        throw BackendError(BackendErrorKind::Internal, "cannot rename " + tmp.string() + ": " + ec.message());
}

void fill_dimensions(ImageRef& ref, std::string_view bytes)
{
    // PNG IHDR: width and height are big-endian u32 at offsets 16 and 20.
    if (ref.format != ImageFormat::Png || bytes.size() < 24)
        return;
    auto u32 = [&](std::size_t at) {
        return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) << 24)
               | (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 16)
               | (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 8)
               | static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3]));
    };
    ref.width = static_cast<int>(u32(16));
    ref.height = static_cast<int>(u32(20));
}

} // namespace

ArtifactStore::ArtifactStore(fs::path root): _root(std::move(root))
{
    fs::create_directories(*_root);
}

ImageRef ArtifactStore::put(std::string_view bytes, ImageFormat format)
{
    ImageRef ref;
    ref.digest = sha256_hex(bytes);
    ref.format = format;
    fill_dimensions(ref, bytes);

    std::lock_guard lock(_mutex);
    if (_root)
    {
        auto target = *_root / ref.file_name();
        ref.path = target.string();
        if (!fs::exists(target))
            write_atomically(target, bytes);
    }
    else
    {
        _memory.try_emplace(ref.digest, bytes);
    }
    return ref;
}

std::string ArtifactStore::read(const ImageRef& image) const
{
    std::optional<std::string> bytes;
    {
        std::lock_guard lock(_mutex);
        if (auto it = _memory.find(image.digest); it != _memory.end())
            return it->second;
    }
    if (!image.path.empty())
        bytes = read_file(image.path);
    if (!bytes && _root)
        bytes = read_file(*_root / image.file_name());
    if (!bytes)
        throw BackendError(BackendErrorKind::UnreadableImage, "artifact not found: " + image.file_name());
    if (sha256_hex(*bytes) != image.digest)
        throw BackendError(BackendErrorKind::UnreadableImage, "digest mismatch for " + image.file_name());
    return *bytes;
}

ImageRef ArtifactStore::import_file(const fs::path& file)
{
    auto bytes = read_file(file);
    if (!bytes)
        throw BackendError(BackendErrorKind::UnreadableImage, "cannot read " + file.string());
    auto format = detect_format(*bytes);
    if (!format)
        throw BackendError(BackendErrorKind::UnreadableImage, "unrecognized image format: " + file.string());
    return put(*bytes, *format);
}

bool ArtifactStore::contains(const ImageRef& image) const
{
    try
    {
        (void) read(image);
        return true;
    }
    catch (const BackendError&)
    {
        return false;
    }
}

void ArtifactStore::export_to(const ImageRef& image, const fs::path& dir) const
{
    fs::create_directories(dir);
    auto target = dir / image.file_name();
    if (fs::exists(target))
        return;
    write_atomically(target, read(image));
}

} // namespace imagent
