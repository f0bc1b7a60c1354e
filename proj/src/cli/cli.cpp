#include "osmda/cli/cli.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "config.hpp"
#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "pipeline.hpp"

namespace osmda::cli {

namespace {

// Command-line values; unset ones leave file/env values alone.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> workdir, images, osm_extract, embeddings, label_cache, style_table,
      xlrs_caption_prompt, dataset, out;
  std::optional<std::string> osm_endpoint, llm_endpoint, llm_model, vlm_endpoint, vlm_model, model_endpoint,
      model_name, judge_endpoint, judge_model, benchmark;
  std::optional<std::size_t> jobs, target, pca_dim, n_clusters;
  std::optional<std::uint64_t> seed;
  std::optional<int> retries, retry_backoff_ms, caption_max_tokens;
  std::optional<double> t1, t2, t3, caption_temperature;
  std::optional<bool> with_map;
  bool rural_urban_literal = false;
  bool svg = false;
  bool quiet = false;
  std::vector<std::string> components;
  std::vector<std::string> reports;
};

template <typename T, typename U>
void set_if(const std::optional<T>& v, U& target) {
  if (v) target = *v;
}

PipelineConfig build_config(const Flags& f) {
  PipelineConfig cfg;
  if (f.config) {
    if (!std::filesystem::exists(*f.config))
      throw Error(ErrorCode::kInvalidArgument, "config file not found: " + *f.config);
    apply_config_file(cfg, *f.config);
  }
  apply_environment(cfg);

  if (f.workdir) cfg.workdir = *f.workdir;
  set_if(f.images, cfg.images);
  set_if(f.osm_extract, cfg.osm_extract);
  set_if(f.embeddings, cfg.embeddings);
  set_if(f.label_cache, cfg.label_cache);
  set_if(f.style_table, cfg.style_table);
  set_if(f.xlrs_caption_prompt, cfg.xlrs_caption_prompt);
  set_if(f.dataset, cfg.dataset);
  set_if(f.out, cfg.out);
  set_if(f.osm_endpoint, cfg.osm_endpoint);
  set_if(f.llm_endpoint, cfg.llm_endpoint);
  set_if(f.llm_model, cfg.llm_model);
  set_if(f.vlm_endpoint, cfg.vlm_endpoint);
  set_if(f.vlm_model, cfg.vlm_model);
  set_if(f.model_endpoint, cfg.model_endpoint);
  set_if(f.model_name, cfg.model_name);
  set_if(f.judge_endpoint, cfg.judge_endpoint);
  set_if(f.judge_model, cfg.judge_model);
  set_if(f.benchmark, cfg.benchmark);
  set_if(f.jobs, cfg.jobs);
  set_if(f.target, cfg.mix_target);
  set_if(f.pca_dim, cfg.curation.pca_dim);
  set_if(f.n_clusters, cfg.curation.n_clusters);
  set_if(f.t1, cfg.curation.t1);
  set_if(f.t2, cfg.curation.t2);
  set_if(f.t3, cfg.curation.t3);
  set_if(f.retries, cfg.retries);
  set_if(f.retry_backoff_ms, cfg.retry_backoff_ms);
  set_if(f.caption_temperature, cfg.caption_temperature);
  set_if(f.caption_max_tokens, cfg.caption_max_tokens);
  set_if(f.with_map, cfg.with_map);
  if (f.seed) cfg.seed = *f.seed;
  cfg.curation.seed = cfg.seed;
  if (f.rural_urban_literal) cfg.rural_urban_literal = true;
  if (f.svg) cfg.svg = true;
  if (!f.components.empty()) cfg.components = f.components;
  for (const auto& r : f.reports) cfg.reports.emplace_back(r);

  if (cfg.retries < 1) throw Error(ErrorCode::kInvalidArgument, "--retries must be at least 1");
  if (cfg.retry_backoff_ms < 0) throw Error(ErrorCode::kInvalidArgument, "--retry-backoff-ms must be >= 0");
  return cfg;
}

int exit_status_for(ErrorCode code) {
  return code == ErrorCode::kRemoteError || code == ErrorCode::kTransportError ? kExitEndpoint : kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"OSM-grounded caption corpus pipeline and benchmark evaluator", "osmda"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;

  app.add_option("--config", f.config, "INI config file (flags > env > file)");
  app.add_option("--workdir", f.workdir, "Directory holding every stage's artifacts");
  app.add_option("--jobs", f.jobs, "Cap on worker threads and in-flight requests");
  app.add_option("--seed", f.seed, "Seed recorded in every artifact manifest");
  app.add_option("--retries", f.retries, "Attempts per endpoint request");
  app.add_option("--retry-backoff-ms", f.retry_backoff_ms, "Initial retry backoff");
  app.add_flag("--quiet", f.quiet, "Only log warnings and errors");

  std::map<std::string, std::function<int(const PipelineConfig&)>> stages;
  auto sub = [&](const std::string& name, const std::string& help, std::function<int(const PipelineConfig&)> fn) {
    stages[name] = std::move(fn);
    return app.add_subcommand(name, help);
  };

  auto* ingest = sub("ingest", "Fetch OSM objects for every image footprint", run_ingest);
  ingest->add_option("--images", f.images, "Image manifest (JSONL)");
  ingest->add_option("--osm-extract", f.osm_extract, "Local OSM XML or JSONL extract");
  ingest->add_option("--osm-endpoint", f.osm_endpoint, "Remote bbox query endpoint");

  sub("filter", "Drop invisible objects and anonymize tags", run_filter);

  auto* relabel = sub("relabel", "Turn tag sets into short semantic labels", run_relabel);
  relabel->add_option("--llm-endpoint", f.llm_endpoint, "Chat-completions endpoint of the labelling LLM");
  relabel->add_option("--llm-model", f.llm_model);
  relabel->add_option("--label-cache", f.label_cache, "Persistent tagset -> label cache (JSONL)");

  auto* curate = sub("curate", "Three-stage balanced subsampling", run_curate);
  curate->add_option("--embeddings", f.embeddings, "Image embedding matrix");
  curate->add_option("--t1", f.t1);
  curate->add_option("--t2", f.t2);
  curate->add_option("--t3", f.t3);
  curate->add_option("--pca-dim", f.pca_dim);
  curate->add_option("--n-clusters", f.n_clusters);

  auto* render = sub("render", "Rasterize map tiles for curated images", run_render);
  render->add_option("--style-table", f.style_table, "Style table JSON");
  render->add_flag("--svg", f.svg, "Also write SVG debug views");

  auto* caption = sub("caption", "Generate captions from image + rendered map", run_caption);
  caption->add_option("--vlm-endpoint", f.vlm_endpoint, "Chat-completions endpoint of the captioning VLM");
  caption->add_option("--vlm-model", f.vlm_model);
  caption->add_option("--temperature", f.caption_temperature);
  caption->add_option("--max-tokens", f.caption_max_tokens);
  caption->add_option("--with-map", f.with_map, "Send the rendered map next to the image (true/false)");

  auto* mix = sub("mix", "Mix caption corpora with equal contributions", run_mix);
  mix->add_option("--component", f.components, "name=path, repeatable; defaults to this run's captions");
  mix->add_option("--target", f.target, "Rows per component (0 = largest component)");

  auto* evaluate = sub("evaluate", "Run one benchmark against a model endpoint", run_evaluate);
  evaluate->add_option("--benchmark", f.benchmark);
  evaluate->add_option("--dataset", f.dataset, "Benchmark samples (JSONL)");
  evaluate->add_option("--model-endpoint", f.model_endpoint);
  evaluate->add_option("--model-name", f.model_name);
  evaluate->add_option("--judge-endpoint", f.judge_endpoint);
  evaluate->add_option("--judge-model", f.judge_model);
  evaluate->add_option("--xlrs-caption-prompt", f.xlrs_caption_prompt, "Replacement XLRS-Bench caption prompt");
  evaluate->add_flag("--rural-urban-literal", f.rural_urban_literal, "Ask rural/urban questions as yes/no");
  evaluate->add_option("--out", f.out, "Report path");

  auto* report = sub("report", "Average-rank table over evaluation reports", run_report);
  report->add_option("--input", f.reports, "Evaluation report, repeatable; defaults to all under evaluate/");
  report->add_option("--out", f.out, "Rank CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  if (f.quiet) log::set_min_level(log::Level::kWarn);

  std::string stage;
  for (const auto* s : app.get_subcommands()) stage = s->get_name();
  try {
    const PipelineConfig cfg = build_config(f);
    if (cfg.xlrs_caption_prompt) prompts::set_override("xlrs_caption", util::read_text(*cfg.xlrs_caption_prompt));
    return stages.at(stage)(cfg);
  } catch (const Error& e) {
    log::error(stage, e.what(), {{"code", to_string(e.code())}});
    return exit_status_for(e.code());
  } catch (const std::exception& e) {
    log::error(stage, e.what(), {{"code", "internal"}});
    return 1;
  }
}

}  // namespace osmda::cli
