#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <thread>

#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/text.hpp"

namespace osmda::cli {

std::size_t PipelineConfig::workers(std::size_t cap) const {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(cap, jobs ? jobs : hw));
}

net::RetryPolicy PipelineConfig::retry_policy() const {
  net::RetryPolicy p;
  p.max_attempts = retries;
  p.initial_backoff = std::chrono::milliseconds(retry_backoff_ms);
  return p;
}

nlohmann::json PipelineConfig::digest_inputs() const {
  nlohmann::json prompt_digests = nlohmann::json::object();
  for (const auto& t : prompts::registry()) prompt_digests[std::string(t.name)] = prompts::digest(t.name);
  return {{"seed", seed},
          {"curation", curation.to_json()},
          {"caption", {{"temperature", caption_temperature}, {"max_tokens", caption_max_tokens}, {"with_map", with_map}}},
          {"rural_urban_literal", rural_urban_literal},
          {"mix_target", mix_target},
          {"style_table", style_table ? util::sha256_file(*style_table) : std::string("builtin")},
          {"prompts", prompt_digests}};
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = util::to_lower_ascii(util::trim(v));
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw Error(ErrorCode::kInvalidArgument, "config " + key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != util::trim(v).size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "config " + key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "config file: " + std::string(e.what()));
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto rel = [&](const std::string& v) {
    fs::path p(v);
    return p.is_relative() ? base / p : p;
  };
  for (const auto& [section, entries] : tree) {
    for (const auto& [key, node] : entries) {
      const std::string full = section + "." + key;
      const std::string v = util::trim(node.get_value<std::string>());
      if (full == "paths.workdir") cfg.workdir = rel(v);
      else if (full == "paths.images") cfg.images = rel(v);
      else if (full == "paths.osm_extract") cfg.osm_extract = rel(v);
      else if (full == "paths.embeddings") cfg.embeddings = rel(v);
      else if (full == "paths.label_cache") cfg.label_cache = rel(v);
      else if (full == "paths.style_table") cfg.style_table = rel(v);
      else if (full == "paths.xlrs_caption_prompt") cfg.xlrs_caption_prompt = rel(v);
      else if (full == "endpoints.osm") cfg.osm_endpoint = v;
      else if (full == "endpoints.llm") cfg.llm_endpoint = v;
      else if (full == "endpoints.llm_model") cfg.llm_model = v;
      else if (full == "endpoints.vlm") cfg.vlm_endpoint = v;
      else if (full == "endpoints.vlm_model") cfg.vlm_model = v;
      else if (full == "endpoints.model") cfg.model_endpoint = v;
      else if (full == "endpoints.model_name") cfg.model_name = v;
      else if (full == "endpoints.judge") cfg.judge_endpoint = v;
      else if (full == "endpoints.judge_model") cfg.judge_model = v;
      else if (full == "endpoints.retries") cfg.retries = parse_number<int>(full, v);
      else if (full == "endpoints.retry_backoff_ms") cfg.retry_backoff_ms = parse_number<int>(full, v);
      else if (full == "curation.t1") cfg.curation.t1 = parse_number<double>(full, v);
      else if (full == "curation.t2") cfg.curation.t2 = parse_number<double>(full, v);
      else if (full == "curation.t3") cfg.curation.t3 = parse_number<double>(full, v);
      else if (full == "curation.pca_dim") cfg.curation.pca_dim = parse_number<std::size_t>(full, v);
      else if (full == "curation.n_clusters") cfg.curation.n_clusters = parse_number<std::size_t>(full, v);
      else if (full == "caption.temperature") cfg.caption_temperature = parse_number<double>(full, v);
      else if (full == "caption.max_tokens") cfg.caption_max_tokens = parse_number<int>(full, v);
      else if (full == "caption.with_map") cfg.with_map = parse_bool(full, v);
      else if (full == "evaluate.rural_urban_literal") cfg.rural_urban_literal = parse_bool(full, v);
      else if (full == "render.svg") cfg.svg = parse_bool(full, v);
      else if (full == "mix.target") cfg.mix_target = parse_number<std::size_t>(full, v);
      else if (full == "mix.components") {
        for (const auto& c : util::split(v, ',')) {
          const auto t = util::trim(c);
          if (t.empty()) continue;
          const auto eq = t.find('=');
          cfg.components.push_back(eq == std::string::npos ? t : t.substr(0, eq + 1) + rel(t.substr(eq + 1)).string());
        }
      }
      else if (full == "run.jobs") cfg.jobs = parse_number<std::size_t>(full, v);
      else if (full == "run.seed") cfg.seed = cfg.curation.seed = parse_number<std::uint64_t>(full, v);
      else throw Error(ErrorCode::kInvalidArgument, "config file: unknown key " + full);
    }
  }
}

void apply_environment(PipelineConfig& cfg) {
  auto env = [](const char* name, std::string& target) {
    if (const char* v = std::getenv(name); v && *v) target = v;
  };
  env("OSMDA_OSM_ENDPOINT", cfg.osm_endpoint);
  env("OSMDA_LLM_ENDPOINT", cfg.llm_endpoint);
  env("OSMDA_VLM_ENDPOINT", cfg.vlm_endpoint);
  env("OSMDA_JUDGE_ENDPOINT", cfg.judge_endpoint);
}

}  // namespace osmda::cli
