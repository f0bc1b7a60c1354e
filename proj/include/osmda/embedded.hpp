#pragma once

#include <string_view>
#include <vector>

namespace osmda {

// Data files compiled into the library (prompt templates, default style
// table). Throws kInvalidArgument for an unknown name.
std::string_view embedded_file(std::string_view name);
std::vector<std::string_view> embedded_file_names();

}  // namespace osmda
