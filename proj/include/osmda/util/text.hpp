#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace osmda::util {

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);

// Collapses every run of whitespace (including newlines) to one space and
// trims the ends.
std::string collapse_whitespace(std::string_view s);

// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);

// Single-pass placeholder substitution: each occurrence of a key in
// `templ` is replaced by its value; substituted text is never rescanned.
std::string substitute(std::string_view templ,
                       const std::map<std::string, std::string>& values);

}  // namespace osmda::util
