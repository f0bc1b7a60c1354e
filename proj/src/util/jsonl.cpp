#include "osmda/util/jsonl.hpp"

#include <sstream>

#include "osmda/error.hpp"

namespace osmda::util {

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kLoadError, path.string() + ":" + std::to_string(line_no) +
                                             ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::ostringstream out;
  for (const auto& row : rows) out << row.dump() << '\n';
  write_text(path, out.str());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Readers never see a half-written artifact.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot replace " + path.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

JsonlCheckpoint::JsonlCheckpoint(std::filesystem::path path, std::string key_field)
    : path_(std::move(path)), key_field_(std::move(key_field)) {
  if (std::filesystem::exists(path_)) {
    // A torn final line from an interrupted run is dropped.
    std::ifstream in(path_);
    std::string line;
    std::string good;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto row = Json::parse(line);
        if (row.contains(key_field_)) {
          keys_.insert(row.at(key_field_).get<std::string>());
          records_.push_back(std::move(row));
          good += line + '\n';
        }
      } catch (const Json::exception&) {
      }
    }
    write_text(path_, good);
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::kIoError, "cannot open checkpoint " + path_.string());
}

bool JsonlCheckpoint::contains(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return keys_.count(key) > 0;
}

void JsonlCheckpoint::append(const Json& record) {
  std::lock_guard lock(mutex_);
  const auto key = record.at(key_field_).get<std::string>();
  if (!keys_.insert(key).second) return;
  out_ << record.dump() << '\n';
  out_.flush();
  records_.push_back(record);
}

}  // namespace osmda::util
