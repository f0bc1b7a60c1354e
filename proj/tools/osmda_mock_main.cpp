#include <CLI11.hpp>

#include <iostream>

#include "mock/mock_endpoints.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic mock OSM / LLM / VLM / judge endpoints", "osmda-mock"};
  int port = 0;
  std::string extract;
  std::vector<std::string> answers;
  app.add_option("--port", port, "Port to bind on 127.0.0.1 (0 = any free port)");
  app.add_option("--osm-extract", extract, "Extract served by POST /osm");
  app.add_option("--answers", answers, "Benchmark dataset used as the answer key, repeatable");
  CLI11_PARSE(app, argc, argv);

  osmda::mock::MockOptions options;
  if (!extract.empty()) options.osm_extract = extract;
  for (const auto& a : answers) options.answer_keys.emplace_back(a);
  try {
    osmda::mock::MockServer server(options, port);
    std::cout << "listening on " << server.url("") << std::endl;
    server.wait();
  } catch (const std::exception& e) {
    std::cerr << "osmda-mock: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
