#include "pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "osmda/caption.hpp"
#include "osmda/cli/cli.hpp"
#include "osmda/curator.hpp"
#include "osmda/error.hpp"
#include "osmda/eval/harness.hpp"
#include "osmda/eval/metrics.hpp"
#include "osmda/net/chat.hpp"
#include "osmda/object_filter.hpp"
#include "osmda/osm.hpp"
#include "osmda/prompts.hpp"
#include "osmda/relabeler.hpp"
#include "osmda/render/tile.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"
#include "osmda/util/text.hpp"

namespace osmda::cli {

using nlohmann::json;

geo::ImageRecord image_from_json(const json& j) {
  geo::ImageRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw Error(ErrorCode::kInvalidArgument, "bbox needs 4 numbers");
    rec.footprint = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    rec.width_px = j.at("width").get<int>();
    rec.height_px = j.at("height").get<int>();
    rec.resolution_m = j.at("resolution_m").get<double>();
    rec.image_path = j.value("image_path", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("image record: ") + e.what());
  }
  return rec;
}

json image_to_json(const geo::ImageRecord& rec) {
  const auto& b = rec.footprint;
  return {{"id", rec.id},
          {"bbox", {b.min_lon, b.min_lat, b.max_lon, b.max_lat}},
          {"width", rec.width_px},
          {"height", rec.height_px},
          {"resolution_m", rec.resolution_m},
          {"image_path", rec.image_path}};
}

std::string stage_digest(const PipelineConfig& cfg, const std::string& stage) {
  const json all = cfg.digest_inputs();
  json scoped{{"stage", stage}};
  if (stage == "relabel") {
    scoped["prompt"] = all["prompts"]["relabel"];
  } else if (stage == "curate") {
    scoped["curation"] = all["curation"];
    scoped["seed"] = all["seed"];
  } else if (stage == "render") {
    scoped["style_table"] = all["style_table"];
  } else if (stage == "caption") {
    scoped["caption"] = all["caption"];
    scoped["prompt"] = all["prompts"]["caption_pseudolabel"];
  } else if (stage == "mix") {
    scoped["seed"] = all["seed"];
    scoped["target"] = all["mix_target"];
  } else if (stage == "evaluate" || stage == "report") {
    // Shared by evaluate and report so reports of different models compare.
    scoped = {{"stage", "evaluate"}, {"rural_urban_literal", all["rural_urban_literal"]}, {"prompts", all["prompts"]}};
  }
  return util::sha256_hex(scoped.dump());
}

namespace {

namespace fs = std::filesystem;

fs::path artifact(const PipelineConfig& cfg, const std::string& rel) { return cfg.workdir / rel; }

fs::path require_artifact(const PipelineConfig& cfg, const std::string& rel, const std::string& producer) {
  const fs::path p = artifact(cfg, rel);
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kMissingArtifact,
                "missing " + p.string() + "; run `osmda " + producer + "` first");
  }
  return p;
}

fs::path require_input(const std::optional<fs::path>& p, const std::string& what, const std::string& flag) {
  if (!p) throw Error(ErrorCode::kInvalidArgument, what + " is required (" + flag + ")");
  if (!fs::exists(*p)) throw Error(ErrorCode::kInvalidArgument, what + " not found: " + p->string());
  return *p;
}

const std::string& require_endpoint(const std::string& url, const std::string& what, const std::string& hint) {
  if (url.empty()) throw Error(ErrorCode::kInvalidArgument, what + " endpoint is not configured (" + hint + ")");
  return url;
}

// Workdir-relative name for artifacts, bare file name for external inputs,
// so manifests do not depend on where the run happened.
std::string portable_name(const PipelineConfig& cfg, const fs::path& p) {
  std::error_code ec;
  const auto rel = fs::relative(p, cfg.workdir, ec);
  if (!ec && !rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.filename().string();
}

void write_sidecar(const PipelineConfig& cfg, const std::string& stage, const fs::path& path,
                   const std::vector<fs::path>& inputs) {
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"path", portable_name(cfg, p)}, {"sha256", util::sha256_file(p)}});
  json m{{"stage", stage},
         {"artifact", portable_name(cfg, path)},
         {"config_digest", stage_digest(cfg, stage)},
         {"seed", cfg.seed},
         {"sha256", util::sha256_file(path)},
         {"inputs", std::move(in)}};
  fs::path side = path;
  side += ".manifest.json";
  util::write_text(side, m.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) { util::write_text(path, j.dump(2) + "\n"); }

// Rewrites an append-order log sorted by key (last record wins), so reruns
// leave byte-identical files behind.
void canonicalize_log(const fs::path& path, const std::string& key) {
  if (!fs::exists(path)) return;
  std::map<std::string, json> rows;
  for (auto& r : util::read_jsonl(path)) {
    const std::string k = r.at(key).get<std::string>();
    rows[k] = std::move(r);
  }
  std::vector<json> out;
  for (auto& [k, r] : rows) out.push_back(std::move(r));
  util::write_jsonl(path, out);
}

std::vector<geo::ImageRecord> read_images(const fs::path& path) {
  std::vector<geo::ImageRecord> out;
  for (const auto& row : util::read_jsonl(path)) out.push_back(image_from_json(row));
  return out;
}

using ObjectsByImage = std::map<std::string, std::vector<osm::OsmObject>>;

ObjectsByImage read_objects(const fs::path& path) {
  ObjectsByImage out;
  for (const auto& row : util::read_jsonl(path)) {
    auto& list = out[row.at("image_id").get<std::string>()];
    for (const auto& o : row.at("objects")) list.push_back(osm::object_from_json(o));
  }
  return out;
}

void write_objects(const fs::path& path, const std::vector<geo::ImageRecord>& images, const ObjectsByImage& objects) {
  std::vector<json> rows;
  for (const auto& rec : images) {
    json list = json::array();
    if (auto it = objects.find(rec.id); it != objects.end())
      for (const auto& o : it->second) list.push_back(osm::to_json(o));
    rows.push_back({{"image_id", rec.id}, {"objects", std::move(list)}});
  }
  util::write_jsonl(path, rows);
}

bool endpoint_code(const std::string& failure) {
  return util::starts_with(failure, to_string(ErrorCode::kTransportError)) ||
         util::starts_with(failure, to_string(ErrorCode::kRemoteError));
}

std::string safe_component(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "model" : out;
}

}  // namespace

int run_ingest(const PipelineConfig& cfg) {
  const fs::path manifest = require_input(cfg.images, "image manifest", "--images");
  auto images = read_images(manifest);
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, manifest.string() + ": no images");
  std::set<std::string> ids;
  for (const auto& rec : images) {
    rec.validate();
    if (!ids.insert(rec.id).second) throw Error(ErrorCode::kInvalidArgument, "duplicate image id " + rec.id);
  }
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  ObjectsByImage objects;
  json stats{{"images", images.size()}};
  std::vector<fs::path> inputs{manifest};
  if (cfg.osm_extract) {
    const fs::path extract_path = require_input(cfg.osm_extract, "OSM extract", "--osm-extract");
    inputs.push_back(extract_path);
    auto extract = osm::load_extract(extract_path);
    stats["source"] = "extract";
    stats["load"] = {{"objects", extract.stats.objects},
                     {"untagged", extract.stats.untagged},
                     {"skipped", extract.stats.skipped},
                     {"holes_dropped", extract.stats.holes_dropped},
                     {"warnings", extract.stats.warnings}};
    for (const auto& w : extract.stats.warnings) log::warn("ingest", w);
    const osm::SpatialIndex index(std::move(extract.objects));
    std::vector<std::vector<osm::OsmObject>> found(images.size());
    util::parallel_for(images.size(), cfg.workers(64),
                       [&](std::size_t i) { found[i] = osm::query_objects(index, images[i].footprint); });
    for (std::size_t i = 0; i < images.size(); ++i) objects[images[i].id] = std::move(found[i]);
  } else {
    const auto& url = require_endpoint(cfg.osm_endpoint, "OSM", "--osm-extract, --osm-endpoint or OSMDA_OSM_ENDPOINT");
    std::vector<geo::BBox> boxes;
    for (const auto& rec : images) boxes.push_back(rec.footprint);
    auto found = osm::fetch_remote_many(url, boxes, cfg.retry_policy(), cfg.workers(8));
    stats["source"] = "endpoint";
    for (std::size_t i = 0; i < images.size(); ++i) objects[images[i].id] = std::move(found[i]);
  }

  std::size_t total = 0;
  json per_image = json::object();
  for (const auto& rec : images) {
    per_image[rec.id] = objects[rec.id].size();
    total += objects[rec.id].size();
  }
  stats["objects_total"] = total;
  stats["objects_per_image"] = std::move(per_image);

  std::vector<json> image_rows;
  for (const auto& rec : images) image_rows.push_back(image_to_json(rec));
  const auto images_out = artifact(cfg, "ingest/images.jsonl");
  const auto objects_out = artifact(cfg, "ingest/objects.jsonl");
  const auto stats_out = artifact(cfg, "ingest/stats.json");
  util::write_jsonl(images_out, image_rows);
  write_objects(objects_out, images, objects);
  write_json(stats_out, stats);
  // Satellite image paths in the manifest are relative to its directory.
  write_json(artifact(cfg, "ingest/context.json"),
             {{"images_root", fs::absolute(manifest).parent_path().lexically_normal().string()}});
  for (const auto& p : {images_out, objects_out, stats_out}) write_sidecar(cfg, "ingest", p, inputs);
  log::info("ingest", "done", {{"images", images.size()}, {"objects", total}});
  return kExitOk;
}

int run_filter(const PipelineConfig& cfg) {
  const auto images_in = require_artifact(cfg, "ingest/images.jsonl", "ingest");
  const auto objects_in = require_artifact(cfg, "ingest/objects.jsonl", "ingest");
  const auto images = read_images(images_in);
  const auto objects = read_objects(objects_in);

  std::vector<filter::FilterResult> results(images.size());
  util::parallel_for(images.size(), cfg.workers(64), [&](std::size_t i) {
    auto it = objects.find(images[i].id);
    results[i] = filter::filter_for_image(it == objects.end() ? std::vector<osm::OsmObject>{} : it->second, images[i]);
  });

  ObjectsByImage kept;
  filter::FilterReport total;
  json per_image = json::object();
  std::vector<json> audit;
  for (std::size_t i = 0; i < images.size(); ++i) {
    total += results[i].report;
    per_image[images[i].id] = results[i].report.to_json();
    for (const auto& a : results[i].audit) audit.push_back({{"image_id", images[i].id}, {"osm_id", a.osm_id}, {"rule", a.rule}});
    kept[images[i].id] = std::move(results[i].kept);
  }

  const auto objects_out = artifact(cfg, "filter/objects.jsonl");
  const auto report_out = artifact(cfg, "filter/report.json");
  const auto audit_out = artifact(cfg, "filter/audit.jsonl");
  write_objects(objects_out, images, kept);
  write_json(report_out, {{"total", total.to_json()}, {"per_image", std::move(per_image)}});
  util::write_jsonl(audit_out, audit);
  for (const auto& p : {objects_out, report_out, audit_out}) write_sidecar(cfg, "filter", p, {images_in, objects_in});
  log::info("filter", "done", {{"input", total.input}, {"kept", total.kept}});
  return kExitOk;
}

int run_relabel(const PipelineConfig& cfg) {
  const auto images_in = require_artifact(cfg, "ingest/images.jsonl", "ingest");
  const auto objects_in = require_artifact(cfg, "filter/objects.jsonl", "filter");
  const auto& url = require_endpoint(cfg.llm_endpoint, "LLM", "--llm-endpoint or OSMDA_LLM_ENDPOINT");
  const auto images = read_images(images_in);
  auto objects = read_objects(objects_in);

  std::vector<osm::OsmObject> flat;
  for (const auto& rec : images)
    for (const auto& o : objects[rec.id]) flat.push_back(o);

  const fs::path cache_path = cfg.label_cache.value_or(artifact(cfg, "relabel/label_cache.jsonl"));
  fs::create_directories(artifact(cfg, "relabel"));
  if (cache_path.has_parent_path()) fs::create_directories(cache_path.parent_path());
  relabel::RelabelResult result;
  {
    relabel::LabelCache cache(cache_path);
    const auto backend = net::make_chat_backend(url, cfg.retry_policy());
    relabel::LabelParams params;
    params.model = cfg.llm_model;
    result = relabel::relabel_corpus(flat, *backend, cache, params, cfg.workers(16));
  }
  canonicalize_log(cache_path, "hash");

  const auto stats_out = artifact(cfg, "relabel/stats.json");
  // Request and cache-hit counters depend on the cache state before the
  // run, so only output-determined counts go into the artifact.
  json stats = result.stats.to_json();
  for (const char* k : {"cache_hits", "endpoint_requests", "truncated", "transport_failures"}) stats.erase(k);
  write_json(stats_out, stats);
  if (result.stats.endpoint_requests > 0 && result.stats.transport_failures == result.stats.endpoint_requests) {
    log::error("relabel", "every label request failed at the endpoint", {{"endpoint", url}});
    return kExitEndpoint;
  }

  std::size_t pos = 0;
  for (const auto& rec : images)
    for (auto& o : objects[rec.id]) o = std::move(result.objects[pos++]);

  const auto objects_out = artifact(cfg, "relabel/objects.jsonl");
  write_objects(objects_out, images, objects);
  for (const auto& p : {objects_out, stats_out}) write_sidecar(cfg, "relabel", p, {images_in, objects_in});
  if (!cfg.label_cache) write_sidecar(cfg, "relabel", cache_path, {objects_in});
  log::info("relabel", "done", result.stats.to_json());
  return kExitOk;
}

int run_curate(const PipelineConfig& cfg) {
  const auto images_in = require_artifact(cfg, "ingest/images.jsonl", "ingest");
  const auto objects_in = require_artifact(cfg, "relabel/objects.jsonl", "relabel");
  const fs::path emb_path = require_input(cfg.embeddings, "embedding matrix", "--embeddings");
  cfg.curation.validate();
  const auto images = read_images(images_in);
  const auto objects = read_objects(objects_in);
  const auto emb = curate::read_embeddings(emb_path);

  std::map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < emb.image_ids.size(); ++r) row_of[emb.image_ids[r]] = r;
  curate::EmbeddingMatrix aligned;
  aligned.dim = emb.matrix.dim;
  std::vector<curate::CurationImage> items;
  std::set<std::string> labels_before;
  for (const auto& rec : images) {
    auto r = row_of.find(rec.id);
    if (r == row_of.end()) throw Error(ErrorCode::kInvalidArgument, "no embedding row for image " + rec.id);
    const auto* src = emb.matrix.data.data() + r->second * emb.matrix.dim;
    aligned.data.insert(aligned.data.end(), src, src + emb.matrix.dim);
    ++aligned.n_rows;

    curate::CurationImage item{rec.id, {}, 0};
    if (auto it = objects.find(rec.id); it != objects.end()) {
      for (const auto& o : it->second) {
        if (!o.label) throw Error(ErrorCode::kInvalidArgument, "object without a label in " + objects_in.string());
        item.labels.push_back(*o.label);
        labels_before.insert(*o.label);
      }
      item.object_count = it->second.size();
    }
    items.push_back(std::move(item));
  }

  curate::CurationParams params = cfg.curation;
  params.seed = cfg.seed;
  params.workers = cfg.workers(64);
  const auto result = curate::curate(items, aligned, params);

  std::set<std::string> curated_ids(result.curated.begin(), result.curated.end());
  std::set<std::string> labels_after;
  std::vector<json> rows;
  for (const auto& item : items) {
    if (!curated_ids.count(item.image_id)) continue;
    labels_after.insert(item.labels.begin(), item.labels.end());
    rows.push_back({{"image_id", item.image_id}, {"object_count", item.object_count}});
  }
  json trace = result.trace.to_json();
  trace["params"] = params.to_json();
  trace["unique_labels_before"] = labels_before.size();
  trace["unique_labels_after"] = labels_after.size();

  const auto curated_out = artifact(cfg, "curate/curated.jsonl");
  const auto trace_out = artifact(cfg, "curate/trace.json");
  util::write_jsonl(curated_out, rows);
  write_json(trace_out, trace);
  for (const auto& p : {curated_out, trace_out}) write_sidecar(cfg, "curate", p, {images_in, objects_in, emb_path});
  log::info("curate", "done", {{"input", items.size()}, {"curated", rows.size()}});
  return kExitOk;
}

int run_render(const PipelineConfig& cfg) {
  const auto images_in = require_artifact(cfg, "ingest/images.jsonl", "ingest");
  const auto objects_in = require_artifact(cfg, "relabel/objects.jsonl", "relabel");
  const auto curated_in = require_artifact(cfg, "curate/curated.jsonl", "curate");
  const render::StyleTable style = cfg.style_table
                                       ? render::load_style_table(require_input(cfg.style_table, "style table", "--style-table"))
                                       : render::default_style_table();
  std::set<std::string> curated;
  for (const auto& r : util::read_jsonl(curated_in)) curated.insert(r.at("image_id").get<std::string>());
  std::vector<geo::ImageRecord> images;
  for (auto& rec : read_images(images_in))
    if (curated.count(rec.id)) images.push_back(std::move(rec));
  const auto objects = read_objects(objects_in);

  std::vector<json> lines(images.size());
  util::parallel_for(images.size(), cfg.workers(64), [&](std::size_t i) {
    const auto& rec = images[i];
    static const std::vector<osm::OsmObject> none;
    auto it = objects.find(rec.id);
    const auto& objs = it == objects.end() ? none : it->second;
    const auto tile = render::render_tile(rec, objs, style);
    const std::string png = render::encode_png(tile.raster);
    const std::string rel = "render/tiles/" + rec.id + ".png";
    util::write_text(artifact(cfg, rel), png);

    json line = tile.manifest_line();
    std::vector<json> label_rows(line["labels"].begin(), line["labels"].end());
    util::write_jsonl(artifact(cfg, "render/tiles/" + rec.id + ".labels.jsonl"), label_rows);
    if (cfg.svg) util::write_text(artifact(cfg, "render/tiles/" + rec.id + ".svg"), render::render_svg(rec, objs, style));
    line["png"] = rel;
    line["sha256"] = util::sha256_hex(png);
    lines[i] = std::move(line);
  });

  const auto manifest_out = artifact(cfg, "render/manifest.jsonl");
  util::write_jsonl(manifest_out, lines);
  write_sidecar(cfg, "render", manifest_out, {images_in, objects_in, curated_in});
  log::info("render", "done", {{"tiles", images.size()}});
  return kExitOk;
}

int run_caption(const PipelineConfig& cfg) {
  const auto images_in = require_artifact(cfg, "ingest/images.jsonl", "ingest");
  const auto context_in = require_artifact(cfg, "ingest/context.json", "ingest");
  const auto curated_in = require_artifact(cfg, "curate/curated.jsonl", "curate");
  std::vector<fs::path> inputs{images_in, curated_in};
  if (cfg.with_map) inputs.push_back(require_artifact(cfg, "render/manifest.jsonl", "render"));
  const auto& url = require_endpoint(cfg.vlm_endpoint, "VLM", "--vlm-endpoint or OSMDA_VLM_ENDPOINT");

  std::set<std::string> curated;
  for (const auto& r : util::read_jsonl(curated_in)) curated.insert(r.at("image_id").get<std::string>());
  std::vector<caption::CaptionJob> jobs;
  for (auto& rec : read_images(images_in)) {
    if (!curated.count(rec.id)) continue;
    std::string map = cfg.with_map ? "render/tiles/" + rec.id + ".png" : "";
    jobs.push_back({std::move(rec), std::move(map)});
  }

  caption::CaptionParams params;
  params.model = cfg.vlm_model;
  params.temperature = cfg.caption_temperature;
  params.max_tokens = cfg.caption_max_tokens;
  params.with_map = cfg.with_map;
  params.image_root = json::parse(util::read_text(context_in)).at("images_root").get<std::string>();
  params.map_root = cfg.workdir;

  const auto checkpoint = artifact(cfg, "caption/checkpoint.jsonl");
  fs::create_directories(checkpoint.parent_path());
  const auto backend = net::make_chat_backend(url, cfg.retry_policy());
  auto run = caption::caption_corpus(jobs, *backend, params, checkpoint, cfg.workers(4));
  canonicalize_log(checkpoint, "image_id");

  const auto summary_out = artifact(cfg, "caption/summary.json");
  write_json(summary_out, run.summary.to_json());
  const bool all_endpoint = run.summary.ok == 0 && run.summary.failed > 0 &&
                            std::all_of(run.summary.failures.begin(), run.summary.failures.end(),
                                        [](const auto& f) { return endpoint_code(f.second); });
  if (all_endpoint) {
    log::error("caption", "every caption request failed at the endpoint", {{"endpoint", url}});
    return kExitEndpoint;
  }
  const auto corpus_out = artifact(cfg, "caption/captions.jsonl");
  caption::emit_corpus(std::move(run.samples), corpus_out);
  for (const auto& p : {corpus_out, summary_out}) write_sidecar(cfg, "caption", p, inputs);
  log::info("caption", "done", run.summary.to_json());
  return kExitOk;
}

int run_mix(const PipelineConfig& cfg) {
  caption::MixtureSpec spec;
  spec.target = cfg.mix_target;
  spec.seed = cfg.seed;
  std::set<std::string> names;
  for (const auto& c : cfg.components) {
    const auto eq = c.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == c.size())
      throw Error(ErrorCode::kInvalidArgument, "--component expects name=path, got '" + c + "'");
    caption::MixtureComponent comp{c.substr(0, eq), c.substr(eq + 1)};
    if (!names.insert(comp.name).second) throw Error(ErrorCode::kInvalidArgument, "duplicate component " + comp.name);
    if (!fs::exists(comp.path)) throw Error(ErrorCode::kInvalidArgument, "component not found: " + comp.path.string());
    spec.components.push_back(std::move(comp));
  }
  if (spec.components.empty())
    spec.components.push_back({"osmda", require_artifact(cfg, "caption/captions.jsonl", "caption")});

  auto result = caption::mix_corpora(spec);
  for (auto& c : result.manifest["components"]) c["path"] = portable_name(cfg, c["path"].get<std::string>());
  result.manifest["config_digest"] = stage_digest(cfg, "mix");

  std::vector<fs::path> inputs;
  for (const auto& c : spec.components) inputs.push_back(c.path);
  const auto mixture_out = artifact(cfg, "mix/mixture.jsonl");
  const auto manifest_out = artifact(cfg, "mix/manifest.json");
  util::write_jsonl(mixture_out, result.rows);
  write_json(manifest_out, result.manifest);
  for (const auto& p : {mixture_out, manifest_out}) write_sidecar(cfg, "mix", p, inputs);
  log::info("mix", "done", {{"rows", result.rows.size()}, {"contributed", result.contributed}});
  return kExitOk;
}

int run_evaluate(const PipelineConfig& cfg) {
  if (cfg.benchmark.empty()) throw Error(ErrorCode::kInvalidArgument, "--benchmark is required");
  const auto bench = eval::benchmark_from_string(cfg.benchmark);
  if (!bench) throw Error(ErrorCode::kInvalidArgument, "unknown benchmark " + cfg.benchmark);
  const fs::path dataset = require_input(cfg.dataset, "benchmark dataset", "--dataset");
  const auto& url = require_endpoint(cfg.model_endpoint, "model", "--model-endpoint");

  const fs::path dir = artifact(cfg, "evaluate/" + safe_component(cfg.model_name));
  const fs::path report_out = cfg.out.value_or(dir / (cfg.benchmark + ".json"));
  fs::path checkpoint = report_out;
  checkpoint.replace_extension(".checkpoint.jsonl");
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());

  eval::HarnessOptions options;
  options.model_name = cfg.model_name;
  options.judge_model = cfg.judge_model;
  options.task_options.rural_urban_literal = cfg.rural_urban_literal;
  options.max_in_flight = cfg.workers(8);
  options.checkpoint = checkpoint;

  const auto model = net::make_chat_backend(url, cfg.retry_policy());
  std::unique_ptr<net::ChatBackend> judge;
  if (!cfg.judge_endpoint.empty()) judge = net::make_chat_backend(cfg.judge_endpoint, cfg.retry_policy());
  json report = eval::run_benchmark(*model, judge.get(), *bench, dataset, options);
  canonicalize_log(checkpoint, "id");

  const auto& samples = report.at("samples");
  const bool all_failed = !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const json& s) {
    const auto& f = s.at("flags");
    return std::find(f.begin(), f.end(), "transport-error") != f.end();
  });
  if (all_failed) {
    log::error("evaluate", "every decode request failed at the endpoint", {{"endpoint", url}});
    return kExitEndpoint;
  }
  report["config_digest"] = stage_digest(cfg, "evaluate");
  report["seed"] = cfg.seed;
  report["dataset"] = dataset.filename().string();
  write_json(report_out, report);
  write_sidecar(cfg, "evaluate", report_out, {dataset});
  log::info("evaluate", "done", {{"benchmark", cfg.benchmark}, {"model", cfg.model_name}, {"primary", report["metrics"]["primary"]}});
  return kExitOk;
}

int run_report(const PipelineConfig& cfg) {
  std::vector<fs::path> paths = cfg.reports;
  if (paths.empty()) {
    const fs::path dir = require_artifact(cfg, "evaluate", "evaluate");
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && e.path().extension() == ".json" && name.find(".manifest.") == std::string::npos)
        paths.push_back(e.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error(ErrorCode::kMissingArtifact, "no evaluation reports found; run `osmda evaluate` first");

  std::optional<std::pair<std::string, fs::path>> digest;
  std::map<std::string, eval::ModelScores> models;
  std::map<eval::Benchmark, eval::RankCell> cells;
  json inputs = json::array();
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingArtifact, "missing " + p.string() + "; run `osmda evaluate` first");
    const json r = json::parse(util::read_text(p));
    const std::string d = r.value("config_digest", "");
    if (d.empty()) throw Error(ErrorCode::kInvalidArgument, p.string() + ": report carries no config digest");
    if (digest && digest->first != d) {
      throw Error(ErrorCode::kInvalidArgument, "conflicting config digests: " + digest->second.string() + " (" +
                                                   digest->first + ") vs " + p.string() + " (" + d + ")");
    }
    if (!digest) digest.emplace(d, p);

    const auto bench = eval::benchmark_from_string(r.at("benchmark").get<std::string>());
    if (!bench) throw Error(ErrorCode::kInvalidArgument, p.string() + ": unknown benchmark");
    const auto& primary = r.at("metrics").at("primary");
    eval::RankCell cell{std::string(eval::to_string(*bench)), primary.at("metric").get<std::string>(),
                        eval::split_of(*bench), true};
    if (auto [it, fresh] = cells.emplace(*bench, cell); !fresh && it->second.metric != cell.metric)
      throw Error(ErrorCode::kInvalidArgument, p.string() + ": primary metric differs from other reports");

    const std::string model = r.at("model").get<std::string>();
    auto& scores = models[model];
    scores.model = model;
    if (!scores.values.emplace(eval::cell_key(cell), primary.at("value").get<double>()).second)
      throw Error(ErrorCode::kInvalidArgument, "two reports for " + model + " on " + cell.benchmark);
    inputs.push_back({{"path", portable_name(cfg, p)}, {"sha256", util::sha256_file(p)}});
  }

  std::vector<eval::RankCell> cell_list;
  for (const auto& [b, c] : cells) cell_list.push_back(c);
  std::vector<eval::ModelScores> model_list;
  for (const auto& [m, s] : models) model_list.push_back(s);
  const auto rows = eval::average_rank(cell_list, model_list);

  json cells_json = json::array();
  for (const auto& c : cell_list)
    cells_json.push_back({{"benchmark", c.benchmark}, {"metric", c.metric}, {"split", eval::to_string(c.split)}});
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"model", r.model},
                         {"cell_ranks", r.cell_ranks},
                         {"fine_tuning", r.fine_tuning},
                         {"generalization", r.generalization},
                         {"overall", r.overall}});
  }

  const fs::path csv_out = cfg.out.value_or(artifact(cfg, "report/ranks.csv"));
  fs::path json_out = csv_out;
  json_out.replace_filename("report.json");
  util::write_text(csv_out, eval::rank_table_csv(rows));
  write_json(json_out, {{"config_digest", digest->first},
                        {"seed", cfg.seed},
                        {"cells", std::move(cells_json)},
                        {"rows", std::move(rows_json)},
                        {"inputs", std::move(inputs)}});
  for (const auto& p : {csv_out, json_out}) write_sidecar(cfg, "report", p, paths);
  log::info("report", "done", {{"models", model_list.size()}, {"cells", cell_list.size()}});
  return kExitOk;
}

}  // namespace osmda::cli
