#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "osmda/geo.hpp"

namespace osmda::cli {

// Each stage returns an exit status (0 or kExitEndpoint); validation
// problems are thrown as osmda::Error.
int run_ingest(const PipelineConfig& cfg);
int run_filter(const PipelineConfig& cfg);
int run_relabel(const PipelineConfig& cfg);
int run_curate(const PipelineConfig& cfg);
int run_render(const PipelineConfig& cfg);
int run_caption(const PipelineConfig& cfg);
int run_mix(const PipelineConfig& cfg);
int run_evaluate(const PipelineConfig& cfg);
int run_report(const PipelineConfig& cfg);

// Image manifest rows: {"id", "bbox": [min_lon, min_lat, max_lon, max_lat],
// "width", "height", "resolution_m", "image_path"}.
geo::ImageRecord image_from_json(const nlohmann::json& j);
nlohmann::json image_to_json(const geo::ImageRecord& rec);

// Digest of the configuration subset a stage depends on.
std::string stage_digest(const PipelineConfig& cfg, const std::string& stage);

}  // namespace osmda::cli
