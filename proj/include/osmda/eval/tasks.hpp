#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace osmda::eval {

enum class Benchmark {
  kNwpuCaptions,
  kUcmCaptions,
  kRsvqaLr,
  kRsvqaHr,
  kVrsbenchCap,
  kVrsbenchVqa,
  kAid,
  kEurosat,
  kSkyscriptBench,
  kMillionAid,
  kXlrsCap,
  kXlrsVqa,
};

inline constexpr std::size_t kBenchmarkCount = 12;

enum class TaskKind { kCaption, kPresence, kCount, kComparison, kArea, kRuralUrban, kClassify, kMcMulti, kOpenVqa };

enum class Split { kFineTuning, kGeneralization };

std::string_view to_string(Benchmark b);
std::string_view to_string(TaskKind k);
std::string_view to_string(Split s);
std::optional<Benchmark> benchmark_from_string(std::string_view s);
std::optional<TaskKind> task_kind_from_string(std::string_view s);

Split split_of(Benchmark b);
// Task kinds a benchmark's samples may carry.
std::vector<TaskKind> task_kinds(Benchmark b);
// Headline metric name ("g_eval", "agg", "f1").
std::string_view primary_metric(Benchmark b);

struct BenchmarkTask {
  Benchmark benchmark = Benchmark::kAid;
  TaskKind kind = TaskKind::kClassify;
  int max_new_tokens = 16;
  std::string template_name;
  // Closed class list for classification with a built-in list.
  std::vector<std::string> classes;
};

struct TaskOptions {
  // Literal yes/no answer list for rural/urban questions.
  bool rural_urban_literal = false;
};

// Throws kInvalidArgument when the benchmark has no such task kind.
BenchmarkTask make_task(Benchmark b, TaskKind kind, const TaskOptions& opts = {});

const std::vector<std::string>& aid_classes();
const std::vector<std::string>& eurosat_classes();

struct Sample {
  std::string id;
  std::string image_path;
  TaskKind task = TaskKind::kCaption;
  std::optional<std::string> question;
  std::vector<std::string> options;
  nlohmann::json gold;
};

// Throws kLoadError naming a description of the offending field.
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Sample& s);

// Reads a dataset file; throws kLoadError listing every offending line.
std::vector<Sample> load_dataset(const std::string& path);

// Throws kInvalidSample when a field the template needs is missing.
std::string build_benchmark_prompt(const BenchmarkTask& task, const Sample& sample,
                                   const std::vector<std::string>& classes = {});

}  // namespace osmda::eval
