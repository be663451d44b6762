// SPDX-License-Identifier: Apache-2.0
#include <imagent/text.hpp>

#include <cctype>

namespace imagent::text
{

std::string to_lower(std::string_view s)
{
    std::string out(s);
    for (auto& c: out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s)
{
    auto const isSpace = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string> words(std::string_view s)
{
    std::vector<std::string> out;
    std::string current;
    for (unsigned char c: s)
    {
        if (std::isalnum(c))
            current.push_back(static_cast<char>(std::tolower(c)));
        else if (!current.empty())
            out.push_back(std::exchange(current, {}));
    }
    if (!current.empty())
        out.push_back(std::move(current));
    return out;
}

std::string single_line(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool pendingSpace = false;
    for (unsigned char c: trim(s))
    {
        if (std::isspace(c))
        {
            pendingSpace = true;
            continue;
        }
        if (pendingSpace)
            out.push_back(' ');
        pendingSpace = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string truncate(std::string_view s, std::size_t max_chars)
{
    if (s.size() <= max_chars)
        return std::string(s);
    if (max_chars <= 3)
        return std::string(s.substr(0, max_chars));
    return std::string(s.substr(0, max_chars - 3)) + "...";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
    {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (auto pos = s.find(sep); pos != std::string_view::npos; pos = s.find(sep, start))
    {
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    out.emplace_back(s.substr(start));
    return out;
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars)
{
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t pos = 0;
    while (pos < tmpl.size())
    {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos)
        {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        auto key = tmpl.substr(open + 2, close - open - 2);
        bool replaced = false;
        for (auto const& [k, v]: vars)
        {
            if (k == key)
            {
                out += v;
                replaced = true;
                break;
            }
        }
        if (!replaced)
            out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    return out;
}

std::string line_value(std::string_view body, std::string_view label)
{
    std::size_t pos = 0;
    while (pos <= body.size())
    {
        auto eol = body.find('\n', pos);
        auto line = body.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (line.starts_with(label))
            return std::string(trim(line.substr(label.size())));
        if (eol == std::string_view::npos)
            break;
        pos = eol + 1;
    }
    return {};
}

} // namespace imagent::text

namespace imagent::text
{

std::string fold_separators(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool pendingSpace = false;
    std::size_t i = 0;
    while (i < s.size())
    {
        std::size_t skip = 0;
        if (s.substr(i).starts_with("$\\_$"))
            skip = 4;
        else if (s.substr(i).starts_with("\\_"))
            skip = 2;
        else if (s[i] == '_' || s[i] == '-' || std::isspace(static_cast<unsigned char>(s[i])))
            skip = 1;
        if (skip)
        {
            pendingSpace = !out.empty();
            i += skip;
            continue;
        }
        if (pendingSpace)
            out.push_back(' ');
        pendingSpace = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
        ++i;
    }
    return out;
}

} // namespace imagent::text
