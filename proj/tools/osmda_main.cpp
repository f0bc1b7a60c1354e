#include "osmda/cli/cli.hpp"

int main(int argc, char** argv) { return osmda::cli::run_cli(argc, argv); }
