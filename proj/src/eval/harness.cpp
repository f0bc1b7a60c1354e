#include "osmda/eval/harness.hpp"

#include <algorithm>

#include "osmda/error.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"
#include "osmda/util/text.hpp"

namespace osmda::eval {

DecodeOutcome decode_prediction(net::ChatBackend& model, const std::string& model_name, const std::string& prompt,
                                const std::string& image_path, const BenchmarkTask& task) {
  net::ChatRequest req;
  req.model = model_name;
  req.prompt = prompt;
  req.temperature = 0.0;
  req.max_tokens = task.max_new_tokens;
  if (!image_path.empty()) req.images.push_back(net::load_image(image_path));
  DecodeOutcome out;
  try {
    out.raw = model.complete(req).text;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTransportError && e.code() != ErrorCode::kRemoteError) throw;
    out.transport_error = true;
    out.error = e.what();
  }
  return out;
}

namespace {

bool lowercase_gold(TaskKind k) {
  return k == TaskKind::kPresence || k == TaskKind::kComparison || k == TaskKind::kRuralUrban;
}

std::set<char> letters_of(const nlohmann::json& j) {
  std::set<char> out;
  auto add = [&](const std::string& s) {
    for (char c : s)
      if (c >= 'A' && c <= 'Z') out.insert(c);
  };
  if (j.is_string()) add(j.get<std::string>());
  if (j.is_array())
    for (const auto& e : j) add(e.get<std::string>());
  return out;
}

std::vector<std::string> resolve_classes(const BenchmarkTask& task, const std::vector<Sample>& samples) {
  if (task.kind != TaskKind::kClassify) return {};
  if (!task.classes.empty()) return task.classes;
  std::optional<std::vector<std::string>> classes;
  for (const auto& s : samples) {
    if (s.task != TaskKind::kClassify) continue;
    if (s.options.empty()) {
      throw Error(ErrorCode::kLoadError, "sample " + s.id + ": classification needs \"options\" for this benchmark");
    }
    if (classes && *classes != s.options) {
      throw Error(ErrorCode::kLoadError, "sample " + s.id + ": class list differs from earlier samples");
    }
    classes = s.options;
  }
  return classes.value_or(std::vector<std::string>{});
}

nlohmann::json evaluate_sample(net::ChatBackend& model, net::ChatBackend* judge, const BenchmarkTask& task,
                               const Sample& sample, const std::vector<std::string>& classes,
                               const HarnessOptions& options, const std::filesystem::path& base) {
  const std::string prompt = build_benchmark_prompt(task, sample, classes);
  std::string image = sample.image_path;
  if (!image.empty() && std::filesystem::path(image).is_relative()) image = (base / image).string();
  const auto decoded = decode_prediction(model, options.model_name, prompt, image, task);
  const auto& parse_classes = classes.empty() ? sample.options : classes;
  const Answer answer = parse_answer(task.kind, decoded.raw, parse_classes);

  nlohmann::json rec{{"id", sample.id},
                     {"task", to_string(task.kind)},
                     {"prompt_sha256", util::sha256_hex(prompt)},
                     {"max_new_tokens", task.max_new_tokens},
                     {"raw", decoded.raw},
                     {"parsed", answer.to_json()},
                     {"gold", sample.gold},
                     {"flags", nlohmann::json::array()}};
  if (decoded.transport_error) {
    rec["flags"].push_back("transport-error");
    rec["error"] = decoded.error;
  }
  if (answer.invalid) rec["flags"].push_back("invalid");

  if (task.kind == TaskKind::kCaption || task.kind == TaskKind::kOpenVqa) {
    double score = 0.0;
    if (!answer.invalid) {
      try {
        const auto gt = sample.gold.get<std::string>();
        const auto js = task.kind == TaskKind::kCaption
                            ? geval_score(*judge, JudgeKind::kCaption, gt, answer.label, {}, {options.judge_model})
                            : geval_score(*judge, JudgeKind::kVqa, gt, answer.label, sample.question.value_or(""),
                                          {options.judge_model});
        score = js.normalized;
        rec["judge_probabilities"] = js.probabilities;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kJudgeFailure && e.code() != ErrorCode::kTransportError &&
            e.code() != ErrorCode::kRemoteError) {
          throw;
        }
        rec["flags"].push_back("judge-failure");
        rec["judge_error"] = e.what();
      }
    }
    rec["g_eval"] = score;
  }
  return rec;
}

}  // namespace

nlohmann::json score_samples(Benchmark benchmark, const nlohmann::json& samples, const MetricParams& params) {
  std::map<TaskKind, std::vector<const nlohmann::json*>> by_task;
  for (const auto& s : samples) by_task[*task_kind_from_string(s.at("task").get<std::string>())].push_back(&s);

  nlohmann::json tasks = nlohmann::json::object();
  std::map<TaskKind, double> headline;
  for (const auto& [kind, recs] : by_task) {
    nlohmann::json m{{"n", recs.size()}};
    std::size_t invalid = 0;
    for (const auto* r : recs) {
      const auto& parsed = r->at("parsed");
      if (parsed.is_string() && parsed.get<std::string>() == "INVALID") ++invalid;
    }
    m["invalid"] = invalid;
    auto is_invalid = [](const nlohmann::json& p) { return p.is_string() && p.get<std::string>() == "INVALID"; };
    switch (kind) {
      case TaskKind::kPresence:
      case TaskKind::kComparison:
      case TaskKind::kRuralUrban:
      case TaskKind::kClassify: {
        std::vector<std::optional<std::string>> preds;
        std::vector<std::string> golds;
        for (const auto* r : recs) {
          const auto& p = r->at("parsed");
          preds.push_back(is_invalid(p) ? std::nullopt : std::optional<std::string>(p.get<std::string>()));
          auto g = r->at("gold").get<std::string>();
          golds.push_back(lowercase_gold(kind) ? util::to_lower_ascii(util::trim(g)) : g);
        }
        m["f1"] = macro_f1(preds, golds);
        headline[kind] = m["f1"];
        break;
      }
      case TaskKind::kCount:
      case TaskKind::kArea: {
        std::vector<double> preds, golds;
        for (const auto* r : recs) {
          const auto& p = r->at("parsed");
          preds.push_back(is_invalid(p) ? 0.0 : p.get<double>());
          golds.push_back(r->at("gold").get<double>());
        }
        const double mae = mean_absolute_error(preds, golds);
        m["mae"] = mae;
        const double big_m = kind == TaskKind::kArea ? params.m_area
                             : benchmark == Benchmark::kRsvqaLr ? params.m_count_lr
                                                               : params.m_count_hr;
        m["m"] = big_m;
        m["nmae"] = nmae(mae, big_m);
        headline[kind] = mae;
        break;
      }
      case TaskKind::kMcMulti: {
        std::vector<std::set<char>> preds, golds;
        for (const auto* r : recs) {
          const auto& p = r->at("parsed");
          preds.push_back(is_invalid(p) ? std::set<char>{} : letters_of(p));
          golds.push_back(letters_of(r->at("gold")));
        }
        m["f1"] = multilabel_macro_f1(preds, golds);
        headline[kind] = m["f1"];
        break;
      }
      case TaskKind::kCaption:
      case TaskKind::kOpenVqa: {
        double sum = 0.0;
        for (const auto* r : recs) sum += r->at("g_eval").get<double>();
        m["g_eval"] = sum / static_cast<double>(recs.size());
        headline[kind] = m["g_eval"];
        break;
      }
    }
    tasks[std::string(to_string(kind))] = std::move(m);
  }

  nlohmann::json out{{"tasks", tasks}};
  const std::string metric(primary_metric(benchmark));
  double value = 0.0;
  if (benchmark == Benchmark::kRsvqaLr || benchmark == Benchmark::kRsvqaHr) {
    RsvqaScores s;
    auto get = [&](TaskKind k) -> std::optional<double> {
      if (auto it = headline.find(k); it != headline.end()) return it->second;
      return std::nullopt;
    };
    s.rural_urban_f1 = get(TaskKind::kRuralUrban);
    s.presence_f1 = get(TaskKind::kPresence);
    s.count_mae = get(TaskKind::kCount);
    s.area_mae = get(TaskKind::kArea);
    s.comparison_f1 = get(TaskKind::kComparison);
    value = rsvqa_aggregate(benchmark == Benchmark::kRsvqaLr ? RsvqaSplit::kLr : RsvqaSplit::kHr, s, params);
  } else {
    if (headline.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument, std::string(to_string(benchmark)) + " expects a single task kind");
    }
    value = headline.begin()->second;
  }
  out["primary"] = {{"metric", metric}, {"value", value}};
  return out;
}

nlohmann::json run_benchmark(net::ChatBackend& model, net::ChatBackend* judge, Benchmark benchmark,
                             const std::filesystem::path& dataset, const HarnessOptions& options) {
  const auto samples = load_dataset(dataset.string());
  const std::filesystem::path base = dataset.has_parent_path() ? dataset.parent_path() : std::filesystem::path(".");
  if (samples.empty()) throw Error(ErrorCode::kLoadError, dataset.string() + ": no samples");

  std::vector<BenchmarkTask> tasks;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      tasks.push_back(make_task(benchmark, samples[i].task, options.task_options));
    } catch (const Error& e) {
      problems.push_back("sample " + samples[i].id + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::kLoadError, dataset.string() + ": schema violations\n  " + util::join(problems, "\n  "));
  }
  for (const auto& t : tasks) {
    if ((t.kind == TaskKind::kCaption || t.kind == TaskKind::kOpenVqa) && !judge) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(to_string(benchmark)) + " is judged with G-Eval and needs a judge endpoint");
    }
  }
  const auto classes = resolve_classes(tasks.front(), samples);

  std::optional<util::JsonlCheckpoint> ckpt;
  std::map<std::string, nlohmann::json> done;
  if (options.checkpoint) {
    ckpt.emplace(*options.checkpoint, "id");
    for (const auto& r : ckpt->records()) done[r.at("id").get<std::string>()] = r;
  }

  std::vector<nlohmann::json> records(samples.size());
  util::parallel_for(samples.size(), options.max_in_flight, [&](std::size_t i) {
    if (auto it = done.find(samples[i].id); it != done.end()) {
      records[i] = it->second;
      return;
    }
    records[i] = evaluate_sample(model, judge, tasks[i], samples[i], classes, options, base);
    if (ckpt) ckpt->append(records[i]);
  });

  nlohmann::json sample_json = nlohmann::json::array();
  std::size_t flagged = 0;
  for (auto& r : records) {
    if (!r.at("flags").empty()) ++flagged;
    sample_json.push_back(std::move(r));
  }
  if (flagged) log::warn("evaluate", "samples flagged", {{"benchmark", to_string(benchmark)}, {"count", flagged}});

  nlohmann::json report{{"benchmark", to_string(benchmark)},
                        {"split", to_string(split_of(benchmark))},
                        {"model", options.model_name},
                        {"dataset_sha256", util::sha256_file(dataset)},
                        {"metric_params",
                         {{"m_count_hr", options.metric_params.m_count_hr},
                          {"m_count_lr", options.metric_params.m_count_lr},
                          {"m_area", options.metric_params.m_area}}},
                        {"metrics", score_samples(benchmark, sample_json, options.metric_params)},
                        {"samples", std::move(sample_json)}};
  if (!classes.empty()) report["classes"] = classes;
  return report;
}

}  // namespace osmda::eval
