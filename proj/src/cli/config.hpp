#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/curator.hpp"
#include "osmda/net/http.hpp"

namespace osmda::cli {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path workdir = "osmda-work";

  std::optional<fs::path> images;
  std::optional<fs::path> osm_extract;
  std::optional<fs::path> embeddings;
  std::optional<fs::path> label_cache;
  std::optional<fs::path> style_table;
  std::optional<fs::path> xlrs_caption_prompt;

  std::string osm_endpoint;
  std::string llm_endpoint;
  std::string llm_model = "labeler";
  std::string vlm_endpoint;
  std::string vlm_model = "captioner";
  std::string model_endpoint;
  std::string model_name = "model";
  std::string judge_endpoint;
  std::string judge_model = "judge";

  curate::CurationParams curation;
  double caption_temperature = 1.0;
  int caption_max_tokens = 768;
  bool with_map = true;
  bool rural_urban_literal = false;
  bool svg = false;

  std::size_t jobs = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;
  int retries = 3;
  int retry_backoff_ms = 500;

  // mix
  std::vector<std::string> components;  // name=path
  std::size_t mix_target = 0;

  // evaluate / report
  std::string benchmark;
  std::optional<fs::path> dataset;
  std::optional<fs::path> out;
  std::vector<fs::path> reports;

  std::size_t workers(std::size_t cap) const;
  net::RetryPolicy retry_policy() const;

  // Everything except endpoint URLs, model names and paths.
  nlohmann::json digest_inputs() const;
};

// Applies `[section] key = value` entries of an INI file.
void apply_config_file(PipelineConfig& cfg, const fs::path& path);
// Applies OSMDA_*_ENDPOINT variables.
void apply_environment(PipelineConfig& cfg);

}  // namespace osmda::cli
