#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace osmda::prompts {

struct TemplateInfo {
  std::string_view name;
  std::vector<std::string_view> placeholders;
};

// Every template shipped under data/prompts, compiled into the library.
const std::vector<TemplateInfo>& registry();

// Template text (override if one is installed, else the embedded file).
std::string text(std::string_view name);
std::string digest(std::string_view name);

// Replaces the text of one template for the rest of the process.
void set_override(std::string_view name, std::string text);
void clear_overrides();

// Substitutes every placeholder of `name`. Throws kInvalidSample naming the
// placeholder when a value is missing.
std::string render(std::string_view name, const std::map<std::string, std::string>& values);

}  // namespace osmda::prompts
