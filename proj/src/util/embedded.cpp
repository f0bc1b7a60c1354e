#include "osmda/embedded.hpp"

#include <string>
#include <utility>

#include "osmda/error.hpp"

namespace osmda::detail {
extern const std::pair<std::string_view, std::string_view> kEmbeddedFiles[];
extern const std::size_t kEmbeddedFileCount;
}  // namespace osmda::detail

namespace osmda {

std::string_view embedded_file(std::string_view name) {
  for (std::size_t i = 0; i < detail::kEmbeddedFileCount; ++i) {
    if (detail::kEmbeddedFiles[i].first == name) return detail::kEmbeddedFiles[i].second;
  }
  throw Error(ErrorCode::kInvalidArgument, "no embedded file named " + std::string(name));
}

std::vector<std::string_view> embedded_file_names() {
  std::vector<std::string_view> names;
  for (std::size_t i = 0; i < detail::kEmbeddedFileCount; ++i) {
    names.push_back(detail::kEmbeddedFiles[i].first);
  }
  return names;
}

}  // namespace osmda
