#pragma once

#include <string_view>

#include <json.hpp>

namespace osmda::log {

enum class Level { kDebug, kInfo, kWarn, kError };

void set_min_level(Level level);

// One JSON object per line on stderr.
void write(Level level, std::string_view stage, std::string_view message,
           const nlohmann::json& fields = nlohmann::json::object());

inline void info(std::string_view stage, std::string_view msg,
                 const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kInfo, stage, msg, fields);
}
inline void warn(std::string_view stage, std::string_view msg,
                 const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kWarn, stage, msg, fields);
}
inline void error(std::string_view stage, std::string_view msg,
                  const nlohmann::json& fields = nlohmann::json::object()) {
  write(Level::kError, stage, msg, fields);
}

}  // namespace osmda::log
