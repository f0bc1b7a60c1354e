#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "osmda/eval/metrics.hpp"
#include "osmda/eval/tasks.hpp"
#include "osmda/net/chat.hpp"

namespace osmda::eval {

struct DecodeOutcome {
  std::string raw;
  bool transport_error = false;
  std::string error;
};

// Greedy decoding (temperature 0) with the task's token limit. Transport
// failures are reported in the outcome, not thrown.
DecodeOutcome decode_prediction(net::ChatBackend& model, const std::string& model_name, const std::string& prompt,
                                const std::string& image_path, const BenchmarkTask& task);

struct HarnessOptions {
  std::string model_name;
  std::string judge_model;
  TaskOptions task_options;
  MetricParams metric_params;
  std::size_t max_in_flight = 8;
  // Per-sample resume log.
  std::optional<std::filesystem::path> checkpoint;
};

// Prompt -> decode -> parse -> score for every sample. Open-text tasks are
// judged with G-Eval and need `judge`. The report keeps every raw
// prediction next to the metrics derived from it.
nlohmann::json run_benchmark(net::ChatBackend& model, net::ChatBackend* judge, Benchmark benchmark,
                             const std::filesystem::path& dataset, const HarnessOptions& options);

// Recomputes the metric block of a report from its stored samples.
nlohmann::json score_samples(Benchmark benchmark, const nlohmann::json& samples, const MetricParams& params);

}  // namespace osmda::eval
