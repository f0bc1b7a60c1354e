#include "osmda/eval/tasks.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <fstream>

#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/text.hpp"

namespace osmda::eval {

namespace {

constexpr std::array<std::string_view, kBenchmarkCount> kBenchmarkNames = {
    "nwpu_captions", "ucm_captions", "rsvqa_lr",        "rsvqa_hr",    "vrsbench_cap", "vrsbench_vqa",
    "aid",           "eurosat",      "skyscript_bench", "million_aid", "xlrs_cap",     "xlrs_vqa"};

constexpr std::array<std::string_view, 9> kTaskNames = {"caption",     "presence", "count",    "comparison", "area",
                                                        "rural_urban", "classify", "mc_multi", "open_vqa"};

}  // namespace

std::string_view to_string(Benchmark b) { return kBenchmarkNames[static_cast<std::size_t>(b)]; }
std::string_view to_string(TaskKind k) { return kTaskNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(Split s) { return s == Split::kFineTuning ? "fine_tuning" : "generalization"; }

std::optional<Benchmark> benchmark_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kBenchmarkNames.size(); ++i)
    if (kBenchmarkNames[i] == s) return static_cast<Benchmark>(i);
  return std::nullopt;
}

std::optional<TaskKind> task_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i)
    if (kTaskNames[i] == s) return static_cast<TaskKind>(i);
  return std::nullopt;
}

Split split_of(Benchmark b) {
  return static_cast<std::size_t>(b) <= static_cast<std::size_t>(Benchmark::kVrsbenchVqa) ? Split::kFineTuning
                                                                                          : Split::kGeneralization;
}

std::vector<TaskKind> task_kinds(Benchmark b) {
  switch (b) {
    case Benchmark::kNwpuCaptions:
    case Benchmark::kUcmCaptions:
    case Benchmark::kVrsbenchCap:
    case Benchmark::kXlrsCap:
      return {TaskKind::kCaption};
    case Benchmark::kRsvqaLr:
      return {TaskKind::kRuralUrban, TaskKind::kPresence, TaskKind::kCount, TaskKind::kComparison};
    case Benchmark::kRsvqaHr:
      return {TaskKind::kPresence, TaskKind::kCount, TaskKind::kArea, TaskKind::kComparison};
    case Benchmark::kVrsbenchVqa:
      return {TaskKind::kOpenVqa};
    case Benchmark::kAid:
    case Benchmark::kEurosat:
    case Benchmark::kSkyscriptBench:
    case Benchmark::kMillionAid:
      return {TaskKind::kClassify};
    case Benchmark::kXlrsVqa:
      return {TaskKind::kMcMulti};
  }
  return {};
}

std::string_view primary_metric(Benchmark b) {
  switch (b) {
    case Benchmark::kRsvqaLr:
    case Benchmark::kRsvqaHr:
      return "agg";
    case Benchmark::kAid:
    case Benchmark::kEurosat:
    case Benchmark::kSkyscriptBench:
    case Benchmark::kMillionAid:
    case Benchmark::kXlrsVqa:
      return "f1";
    default:
      return "g_eval";
  }
}

const std::vector<std::string>& aid_classes() {
  static const std::vector<std::string> k = {
      "Airport",  "BareLand",  "BaseballField",     "Beach",    "Bridge",         "Center",
      "Church",   "Commercial", "DenseResidential", "Desert",   "Farmland",       "Forest",
      "Industrial", "Meadow",  "MediumResidential", "Mountain", "Park",           "Parking",
      "Playground", "Pond",    "Port",              "RailwayStation", "Resort",   "River",
      "School",   "SparseResidential", "Square",    "Stadium",  "StorageTanks",   "Viaduct"};
  return k;
}

const std::vector<std::string>& eurosat_classes() {
  static const std::vector<std::string> k = {"AnnualCrop", "Forest",      "HerbaceousVegetation", "Highway",
                                             "Industrial", "Pasture",     "PermanentCrop",        "Residential",
                                             "River",      "SeaLake"};
  return k;
}

BenchmarkTask make_task(Benchmark b, TaskKind kind, const TaskOptions& opts) {
  const auto kinds = task_kinds(b);
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(b)) + " has no task kind " + std::string(to_string(kind)));
  }
  BenchmarkTask t;
  t.benchmark = b;
  t.kind = kind;
  switch (b) {
    case Benchmark::kNwpuCaptions:
    case Benchmark::kUcmCaptions:
      t.max_new_tokens = 128;
      t.template_name = "short_caption";
      break;
    case Benchmark::kRsvqaLr:
    case Benchmark::kRsvqaHr:
      t.max_new_tokens = 16;
      switch (kind) {
        case TaskKind::kPresence: t.template_name = "rsvqa_presence"; break;
        case TaskKind::kCount: t.template_name = "rsvqa_count"; break;
        case TaskKind::kComparison: t.template_name = "rsvqa_comparison"; break;
        case TaskKind::kArea: t.template_name = "rsvqa_area"; break;
        default:
          t.template_name = opts.rural_urban_literal ? "rsvqa_rural_urban_literal" : "rsvqa_rural_urban";
      }
      break;
    case Benchmark::kVrsbenchCap:
      t.max_new_tokens = 512;
      t.template_name = "vrsbench_caption";
      break;
    case Benchmark::kVrsbenchVqa:
      t.max_new_tokens = 32;
      t.template_name = "vrsbench_vqa";
      break;
    case Benchmark::kAid:
      t.max_new_tokens = 16;
      t.template_name = "classification";
      t.classes = aid_classes();
      break;
    case Benchmark::kEurosat:
      t.max_new_tokens = 16;
      t.template_name = "classification";
      t.classes = eurosat_classes();
      break;
    case Benchmark::kSkyscriptBench:
      t.max_new_tokens = 16;
      t.template_name = "classification";
      break;
    case Benchmark::kMillionAid:
      t.max_new_tokens = 32;
      t.template_name = "million_aid";
      break;
    case Benchmark::kXlrsCap:
      t.max_new_tokens = 1024;
      t.template_name = "xlrs_caption";
      break;
    case Benchmark::kXlrsVqa:
      t.max_new_tokens = 4;
      t.template_name = "xlrs_vqa";
      break;
  }
  return t;
}

Sample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kLoadError, "sample is not an object");
  auto need_string = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw Error(ErrorCode::kLoadError, std::string("missing or non-string \"") + key + "\"");
    }
    return j[key].get<std::string>();
  };
  Sample s;
  s.id = need_string("id");
  s.image_path = need_string("image_path");
  const auto task = need_string("task");
  const auto kind = task_kind_from_string(task);
  if (!kind) throw Error(ErrorCode::kLoadError, "unknown task \"" + task + "\"");
  s.task = *kind;
  if (j.contains("question")) {
    if (!j["question"].is_string()) throw Error(ErrorCode::kLoadError, "\"question\" must be a string");
    s.question = j["question"].get<std::string>();
  }
  if (j.contains("options")) {
    if (!j["options"].is_array()) throw Error(ErrorCode::kLoadError, "\"options\" must be an array");
    for (const auto& o : j["options"]) {
      if (!o.is_string()) throw Error(ErrorCode::kLoadError, "\"options\" entries must be strings");
      s.options.push_back(o.get<std::string>());
    }
  }
  if (!j.contains("gold")) throw Error(ErrorCode::kLoadError, "missing \"gold\"");
  s.gold = j["gold"];
  switch (s.task) {
    case TaskKind::kCount:
    case TaskKind::kArea:
      if (!s.gold.is_number()) throw Error(ErrorCode::kLoadError, "numeric task needs a numeric \"gold\"");
      break;
    case TaskKind::kMcMulti:
      if (!s.gold.is_string() && !s.gold.is_array()) {
        throw Error(ErrorCode::kLoadError, "multi-choice \"gold\" must be letters or an array of letters");
      }
      break;
    default:
      if (!s.gold.is_string()) throw Error(ErrorCode::kLoadError, "\"gold\" must be a string");
  }
  return s;
}

nlohmann::json to_json(const Sample& s) {
  nlohmann::json j{{"id", s.id}, {"image_path", s.image_path}, {"task", to_string(s.task)}};
  if (s.question) j["question"] = *s.question;
  if (!s.options.empty()) j["options"] = s.options;
  j["gold"] = s.gold;
  return j;
}

std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kLoadError, "cannot read dataset " + path);
  std::vector<Sample> out;
  std::vector<std::string> problems;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      problems.push_back("line " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(n) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::kLoadError, path + ": schema violations\n  " + util::join(problems, "\n  "));
  }
  return out;
}

std::string build_benchmark_prompt(const BenchmarkTask& task, const Sample& sample,
                                   const std::vector<std::string>& classes) {
  std::map<std::string, std::string> values;
  if (sample.question) {
    values["<question>"] = *sample.question;
  }
  const auto& list = !classes.empty() ? classes : !task.classes.empty() ? task.classes : sample.options;
  if (task.template_name == "classification" && !list.empty()) {
    values["<comma_separated_MC_list>"] = util::join(list, ", ");
  }
  if (task.template_name == "million_aid" && !list.empty()) {
    values["<comma_separated_hyphen_fused_hierarchical_classes>"] = util::join(list, ", ");
  }
  if (task.template_name == "xlrs_vqa" && !sample.options.empty()) {
    values["<comma_separated_options>"] = util::join(sample.options, ", ");
  }
  try {
    return prompts::render(task.template_name, values);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidSample, "sample " + sample.id + ": " + e.what());
  }
}

}  // namespace osmda::eval
