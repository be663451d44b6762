// SPDX-License-Identifier: Apache-2.0
#pragma once

// Attribute-bag model used by the simulated backend. A simulated "image" is the sorted set of
// vocabulary tokens it depicts, serialized canonically so equal bags have equal digests.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace imagent::sim
{

using AttributeBag = std::set<std::string>;

/// Canonical bytes: `{"attributes":[...sorted...],"format":"sim-json"}`.
std::string encode_attributes(const AttributeBag& bag);
std::optional<AttributeBag> decode_attributes(std::string_view bytes);

const std::vector<std::string>& default_vocabulary();

class Vocabulary
{
public:
    Vocabulary(): Vocabulary(default_vocabulary()) {}
    explicit Vocabulary(const std::vector<std::string>& tokens);

    [[nodiscard]] bool contains(std::string_view token) const;

    /// Vocabulary tokens in `prompt`, with the number of times each is mentioned.
    [[nodiscard]] std::map<std::string, int> mentions(std::string_view prompt) const;
    [[nodiscard]] AttributeBag keywords(std::string_view prompt) const;

    [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return _tokens; }

private:
    std::vector<std::string> _tokens;
    std::set<std::string, std::less<>> _index;
};

struct Overlap
{
    std::size_t matched = 0;
    std::size_t total = 0;
    std::vector<std::string> missing; // sorted

    /// matched / total; a prompt without keywords is fully satisfied.
    [[nodiscard]] double fraction() const noexcept
    {
        return total == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(total);
    }
};

Overlap overlap(const AttributeBag& keywords, const AttributeBag& attributes);

} // namespace imagent::sim
