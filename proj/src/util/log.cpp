#include "osmda/util/log.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>

namespace osmda::log {

namespace {
std::atomic<Level> g_min_level{Level::kInfo};
std::mutex g_mutex;

const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "info";
}
}  // namespace

void set_min_level(Level level) { g_min_level = level; }

void write(Level level, std::string_view stage, std::string_view message,
           const nlohmann::json& fields) {
  if (level < g_min_level.load()) return;
  nlohmann::json line = fields.is_object() ? fields : nlohmann::json::object();
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  line["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  line["level"] = level_name(level);
  line["stage"] = std::string(stage);
  line["msg"] = std::string(message);
  std::lock_guard lock(g_mutex);
  std::cerr << line.dump() << '\n';
}

}  // namespace osmda::log
