#include "osmda/caption.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <set>

#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"
#include "osmda/util/rng.hpp"
#include "osmda/util/text.hpp"

namespace osmda::caption {

void CaptionSample::validate() const {
  if (util::trim(caption).empty()) throw Error(ErrorCode::kInvalidSample, image_id + ": empty caption");
  if (caption.find('\n') != std::string::npos) {
    throw Error(ErrorCode::kInvalidSample, image_id + ": caption spans several lines");
  }
}

nlohmann::json to_json(const CaptionSample& s) {
  return {{"image_id", s.image_id},       {"image_path", s.image_path},   {"map_path", s.map_path},
          {"caption", s.caption},         {"resolution_m", s.resolution_m}, {"temperature", s.temperature},
          {"prompt_hash", s.prompt_hash}, {"model", s.model}};
}

CaptionSample sample_from_json(const nlohmann::json& j) {
  CaptionSample s;
  s.image_id = j.at("image_id").get<std::string>();
  s.image_path = j.at("image_path").get<std::string>();
  s.map_path = j.value("map_path", "");
  s.caption = j.at("caption").get<std::string>();
  s.resolution_m = j.at("resolution_m").get<double>();
  s.temperature = j.at("temperature").get<double>();
  s.prompt_hash = j.value("prompt_hash", "");
  s.model = j.value("model", "");
  return s;
}

std::string build_caption_prompt(double resolution_m) {
  if (!(resolution_m > 0)) throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", resolution_m);
  return prompts::render("caption_pseudolabel", {{"<res>", buf}});
}

std::string single_paragraph(std::string_view text) { return util::collapse_whitespace(text); }

CaptionOutcome generate_caption(const geo::ImageRecord& rec, const std::string& map_path,
                                net::ChatBackend& backend, const CaptionParams& params) {
  net::ChatRequest req;
  req.model = params.model;
  req.prompt = build_caption_prompt(rec.resolution_m);
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  auto resolve = [](const std::filesystem::path& root, const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_relative() && !root.empty() ? root / path : path).string();
  };
  req.images.push_back(net::load_image(resolve(params.image_root, rec.image_path)));
  if (params.with_map) req.images.push_back(net::load_image(resolve(params.map_root, map_path)));

  CaptionOutcome out;
  const int attempts = std::max(1, params.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    net::ChatResponse resp;
    try {
      resp = backend.complete(req);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransportError || attempt == attempts) throw;
      continue;
    }
    std::string text = single_paragraph(resp.text);
    if (text.empty()) {
      out.failure = "empty caption";
      continue;
    }
    CaptionSample s;
    s.image_id = rec.id;
    s.image_path = rec.image_path;
    s.map_path = params.with_map ? map_path : "";
    s.caption = std::move(text);
    s.resolution_m = rec.resolution_m;
    s.temperature = params.temperature;
    s.prompt_hash = util::sha256_hex(req.prompt);
    s.model = resp.model.empty() ? params.model : resp.model;
    out.sample = std::move(s);
    out.failure.clear();
    return out;
  }
  return out;
}

nlohmann::json CorpusSummary::to_json() const {
  return {{"ok", ok}, {"failed", failed}, {"failures", failures}};
}

CaptionRun caption_corpus(const std::vector<CaptionJob>& jobs, net::ChatBackend& backend,
                          const CaptionParams& params, const std::optional<std::filesystem::path>& checkpoint,
                          std::size_t max_in_flight) {
  std::optional<util::JsonlCheckpoint> ckpt;
  if (checkpoint) ckpt.emplace(*checkpoint, "image_id");

  CaptionRun run;
  std::vector<const CaptionJob*> todo;
  std::set<std::string> wanted;
  for (const auto& job : jobs) {
    wanted.insert(job.record.id);
    if (!ckpt || !ckpt->contains(job.record.id)) todo.push_back(&job);
  }
  if (ckpt) {
    for (const auto& row : ckpt->records())
      if (wanted.count(row.at("image_id").get<std::string>())) run.samples.push_back(sample_from_json(row));
  }

  std::vector<CaptionOutcome> outcomes(todo.size());
  util::parallel_for(todo.size(), max_in_flight, [&](std::size_t i) {
    try {
      outcomes[i] = generate_caption(todo[i]->record, todo[i]->map_path, backend, params);
    } catch (const Error& e) {
      outcomes[i].failure = std::string(to_string(e.code())) + ": " + e.what();
    }
    if (outcomes[i].sample && ckpt) ckpt->append(to_json(*outcomes[i].sample));
  });
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (outcomes[i].sample) {
      run.samples.push_back(std::move(*outcomes[i].sample));
    } else {
      run.summary.failures[todo[i]->record.id] = outcomes[i].failure;
      log::warn("caption", "caption failed", {{"image_id", todo[i]->record.id}, {"reason", outcomes[i].failure}});
    }
  }
  std::sort(run.samples.begin(), run.samples.end(),
            [](const CaptionSample& a, const CaptionSample& b) { return a.image_id < b.image_id; });
  run.summary.ok = run.samples.size();
  run.summary.failed = run.summary.failures.size();
  return run;
}

void emit_corpus(std::vector<CaptionSample> samples, const std::filesystem::path& path) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyCorpus, "no successful caption samples");
  std::sort(samples.begin(), samples.end(),
            [](const CaptionSample& a, const CaptionSample& b) { return a.image_id < b.image_id; });
  std::vector<util::Json> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    s.validate();
    rows.push_back(to_json(s));
  }
  util::write_jsonl(path, rows);
}

std::vector<CaptionSample> read_corpus(const std::filesystem::path& path) {
  std::vector<CaptionSample> out;
  for (const auto& row : util::read_jsonl(path)) out.push_back(sample_from_json(row));
  return out;
}

std::vector<std::size_t> mixture_indices(std::size_t size, std::size_t target, std::uint64_t seed) {
  if (size == 0) throw Error(ErrorCode::kInvalidArgument, "empty mixture component");
  std::vector<std::size_t> out;
  out.reserve(target);
  for (std::size_t r = 0; r < target / size; ++r)
    for (std::size_t i = 0; i < size; ++i) out.push_back(i);
  const std::size_t rest = target % size;
  if (rest > 0) {
    std::vector<std::size_t> pool(size);
    std::iota(pool.begin(), pool.end(), 0);
    util::Rng rng(seed);
    rng.shuffle(pool.begin(), pool.end());
    pool.resize(rest);
    std::sort(pool.begin(), pool.end());
    out.insert(out.end(), pool.begin(), pool.end());
  }
  return out;
}

MixtureResult mix_corpora(const MixtureSpec& spec) {
  if (spec.components.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture needs at least one component");
  std::vector<std::vector<util::Json>> data;
  std::size_t target = spec.target;
  for (const auto& c : spec.components) {
    data.push_back(util::read_jsonl(c.path));
    if (data.back().empty()) throw Error(ErrorCode::kInvalidArgument, "mixture component " + c.name + " is empty");
    if (spec.target == 0) target = std::max(target, data.back().size());
  }

  MixtureResult out;
  out.manifest = {{"seed", spec.seed}, {"target", target}, {"components", nlohmann::json::array()}};
  for (std::size_t c = 0; c < spec.components.size(); ++c) {
    const auto& comp = spec.components[c];
    const auto idx = mixture_indices(data[c].size(), target, util::splitmix64(spec.seed ^ util::fnv1a64(comp.name)));
    for (auto i : idx) {
      auto row = data[c][i];
      row["mix_component"] = comp.name;
      out.rows.push_back(std::move(row));
    }
    out.contributed[comp.name] = idx.size();
    out.manifest["components"].push_back({{"name", comp.name},
                                          {"path", comp.path.string()},
                                          {"size", data[c].size()},
                                          {"contributed", idx.size()},
                                          {"sha256", util::sha256_file(comp.path)}});
  }
  util::Rng rng(spec.seed);
  rng.shuffle(out.rows.begin(), out.rows.end());
  return out;
}

}  // namespace osmda::caption
