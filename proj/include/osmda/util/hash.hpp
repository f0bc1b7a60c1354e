#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace osmda::util {

// 64-bit FNV-1a. Stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::string_view data);

}  // namespace osmda::util
