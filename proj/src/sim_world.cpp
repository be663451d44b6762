// SPDX-License-Identifier: Apache-2.0
#include <imagent/sim_world.hpp>
#include <imagent/text.hpp>

#include <nlohmann/json.hpp>

namespace imagent::sim
{

std::string encode_attributes(const AttributeBag& bag)
{
    nlohmann::json j;
    j["attributes"] = std::vector<std::string>(bag.begin(), bag.end());
    j["format"] = "sim-json";
    return j.dump();
}

std::optional<AttributeBag> decode_attributes(std::string_view bytes)
{
    auto j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", "") != "sim-json")
        return std::nullopt;
    auto it = j.find("attributes");
    if (it == j.end() || !it->is_array())
        return std::nullopt;
    AttributeBag bag;
    for (auto const& a: *it)
    {
        if (!a.is_string())
            return std::nullopt;
        bag.insert(a.get<std::string>());
    }
    return bag;
}

const std::vector<std::string>& default_vocabulary()
{
    static const std::vector<std::string> kTokens = {
        // objects
        "bread", "cube", "sphere", "cat", "dog", "horse", "tree", "house", "car", "boat", "apple", "banana",
        "cup", "chair", "table", "book", "lamp", "flower", "bird", "fish", "mountain", "river", "bridge",
        "clock", "hat", "umbrella", "robot", "castle", "moon", "sun",
        // colors
        "red", "green", "blue", "yellow", "black", "white", "purple", "orange", "golden", "silver",
        // materials and states
        "moldy", "mold", "wooden", "glass", "metal", "stone", "frozen", "burning", "wet", "rusty",
        // scene and style
        "night", "sunset", "snow", "rain", "fog", "forest", "desert", "ocean", "city", "watercolor",
        "photorealistic", "cartoon", "vintage", "neon",
    };
    return kTokens;
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens)
{
    for (auto const& t: tokens)
    {
        auto lowered = text::to_lower(text::trim(t));
        if (!lowered.empty() && _index.insert(lowered).second)
            _tokens.push_back(lowered);
    }
}

bool Vocabulary::contains(std::string_view token) const
{
    return _index.find(token) != _index.end();
}

std::map<std::string, int> Vocabulary::mentions(std::string_view prompt) const
{
    std::map<std::string, int> out;
    for (auto const& w: text::words(prompt))
        if (contains(w))
            ++out[w];
    return out;
}

AttributeBag Vocabulary::keywords(std::string_view prompt) const
{
    AttributeBag out;
    for (auto const& w: text::words(prompt))
        if (contains(w))
            out.insert(w);
    return out;
}

Overlap overlap(const AttributeBag& keywords, const AttributeBag& attributes)
{
    Overlap o;
    o.total = keywords.size();
    for (auto const& k: keywords)
    {
        if (attributes.contains(k))
            ++o.matched;
        else
            o.missing.push_back(k);
    }
    return o;
}

} // namespace imagent::sim
