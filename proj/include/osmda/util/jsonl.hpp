#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace osmda::util {

using Json = nlohmann::json;

// Reads every non-empty line as JSON. Throws kLoadError naming the line
// number on a parse failure.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// Append-only JSONL log keyed by a string field. Reopening an existing file
// restores the set of finished keys, which makes interrupted endpoint-bound
// stages resumable without repeating requests.
class JsonlCheckpoint {
 public:
  JsonlCheckpoint(std::filesystem::path path, std::string key_field);

  bool contains(const std::string& key) const;
  const std::vector<Json>& records() const { return records_; }

  // Thread-safe; flushes after every record.
  void append(const Json& record);

 private:
  std::filesystem::path path_;
  std::string key_field_;
  std::vector<Json> records_;
  std::set<std::string> keys_;
  std::ofstream out_;
  mutable std::mutex mutex_;
};

}  // namespace osmda::util
