#pragma once

#include <string>
#include <vector>

namespace osmda::cli {

// Exit statuses shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitEndpoint = 3;

// Entry point of the `osmda` executable; never throws.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace osmda::cli
