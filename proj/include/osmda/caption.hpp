#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/geo.hpp"
#include "osmda/net/chat.hpp"

namespace osmda::caption {

struct CaptionSample {
  std::string image_id;
  std::string image_path;
  std::string map_path;  // provenance only; empty without the map
  std::string caption;
  double resolution_m = 0.0;
  double temperature = 1.0;
  std::string prompt_hash;
  std::string model;

  // Throws kInvalidSample for an empty or multi-paragraph caption.
  void validate() const;
  friend bool operator==(const CaptionSample&, const CaptionSample&) = default;
};

nlohmann::json to_json(const CaptionSample& s);
CaptionSample sample_from_json(const nlohmann::json& j);

// Throws kInvalidArgument for resolution <= 0.
std::string build_caption_prompt(double resolution_m);

// Collapses every whitespace run (newlines included) to a single space.
std::string single_paragraph(std::string_view text);

struct CaptionParams {
  std::string model;
  double temperature = 1.0;
  int max_tokens = 768;
  int max_attempts = 3;
  bool with_map = true;
  // Relative image and map paths are read from these; samples keep them as given.
  std::filesystem::path image_root;
  std::filesystem::path map_root;
};

struct CaptionOutcome {
  std::optional<CaptionSample> sample;
  std::string failure;  // set when !sample
};

// Sends [satellite, map] (or just the satellite image without the map) and
// the captioning prompt. Transport errors are retried, then rethrown; an
// empty caption after all attempts yields a failed outcome.
CaptionOutcome generate_caption(const geo::ImageRecord& rec, const std::string& map_path,
                                net::ChatBackend& backend, const CaptionParams& params);

struct CorpusSummary {
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::map<std::string, std::string> failures;  // image_id -> reason

  nlohmann::json to_json() const;
};

struct CaptionJob {
  geo::ImageRecord record;
  std::string map_path;
};

struct CaptionRun {
  std::vector<CaptionSample> samples;
  CorpusSummary summary;
};

// Captions every job with at most `max_in_flight` requests outstanding.
// Finished samples are appended to `checkpoint` (when given) as they arrive;
// jobs already present there are not requested again.
CaptionRun caption_corpus(const std::vector<CaptionJob>& jobs, net::ChatBackend& backend,
                          const CaptionParams& params, const std::optional<std::filesystem::path>& checkpoint,
                          std::size_t max_in_flight = 4);

// Writes samples sorted by image_id. Throws kEmptyCorpus when there are none.
void emit_corpus(std::vector<CaptionSample> samples, const std::filesystem::path& path);
std::vector<CaptionSample> read_corpus(const std::filesystem::path& path);

struct MixtureComponent {
  std::string name;
  std::filesystem::path path;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;
  // Per-component contribution; 0 picks the largest component size.
  std::size_t target = 0;
  std::uint64_t seed = 0;
};

struct MixtureResult {
  std::vector<nlohmann::json> rows;  // each carries "mix_component"
  std::map<std::string, std::size_t> contributed;
  nlohmann::json manifest;
};

// Rows drawn from one component: subsample without replacement when larger
// than target, otherwise whole repeats plus a sampled remainder.
std::vector<std::size_t> mixture_indices(std::size_t size, std::size_t target, std::uint64_t seed);

MixtureResult mix_corpora(const MixtureSpec& spec);

}  // namespace osmda::caption
