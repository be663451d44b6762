// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imagent::text
{

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

/// Lowercase alphanumeric words, in order of appearance.
std::vector<std::string> words(std::string_view s);

/// Collapses newlines and runs of whitespace to single spaces.
std::string single_line(std::string_view s);

/// Cuts `s` to at most `max_chars` bytes, appending "..." when cut.
std::string truncate(std::string_view s, std::size_t max_chars);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);

/// Replaces every `{{key}}` occurrence. Unknown placeholders are left as-is.
std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& vars);

/// Text following the first line that starts with `label` (e.g. "Prompt:"), up to end of line.
std::string line_value(std::string_view body, std::string_view label);

/// Lowercases and folds `$\_$`, `\_`, `_`, `-` and whitespace runs into single spaces.
/// Used to match action names written in any of their common spellings.
std::string fold_separators(std::string_view s);

} // namespace imagent::text
