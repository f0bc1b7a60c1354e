#include "osmda/relabeler.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"
#include "osmda/util/text.hpp"

namespace osmda::relabel {

namespace {

osm::Tags sorted_tags(const osm::Tags& tags) {
  osm::Tags sorted = tags;
  std::sort(sorted.begin(), sorted.end(), [](const osm::Tag& a, const osm::Tag& b) {
    return a.key != b.key ? a.key < b.key : a.value < b.value;
  });
  return sorted;
}

}  // namespace

CanonicalTagset canonicalize_tagset(const osm::Tags& tags) {
  if (tags.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot canonicalize empty tag set");
  CanonicalTagset out;
  for (const auto& t : sorted_tags(tags)) out.text += t.key + "=" + t.value + ";";
  out.hash = util::fnv1a64(out.text);
  return out;
}

std::string build_label_prompt(const osm::Tags& tags) {
  std::vector<std::string> parts;
  for (const auto& t : sorted_tags(tags)) parts.push_back(t.key + ": " + t.value);
  return prompts::render("relabel", {{"<key>: <value>, ...", util::join(parts, ", ")}});
}

NormalizedLabel normalize_label(std::string_view raw) {
  const std::string trimmed = util::trim(raw);
  std::string_view first_line = trimmed;
  if (auto nl = first_line.find('\n'); nl != std::string_view::npos) first_line = first_line.substr(0, nl);

  std::string cleaned;
  for (char c : first_line) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '"' || c == '\'' || c == '`') continue;
    if (std::isalnum(u) || u >= 0x80) cleaned.push_back(static_cast<char>(std::tolower(u)));
    else cleaned.push_back(' ');
  }
  // The "label:" prefix some models echo is dropped.
  auto words = util::split(util::collapse_whitespace(cleaned), ' ');
  if (!words.empty() && words[0] == "label" && words.size() > 1) words.erase(words.begin());
  std::vector<std::string> kept;
  for (auto& w : words) {
    if (w.empty()) continue;
    if (std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    kept.push_back(std::move(w));
  }
  NormalizedLabel out;
  if (kept.size() > 3) {
    kept.resize(3);
    out.truncated = true;
  }
  out.text = util::join(kept, " ");
  return out;
}

LabelOutcome request_label(const osm::Tags& tags, ObjectClass fallback_class,
                           net::ChatBackend& backend, const LabelParams& params) {
  const auto canon = canonicalize_tagset(tags);
  net::ChatRequest req;
  req.model = params.model;
  req.prompt = build_label_prompt(tags);
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;

  LabelOutcome out;
  out.label.source_tagset_hash = canon.hash;
  for (int attempt = 1; attempt <= std::max(1, params.max_attempts); ++attempt) {
    out.attempts = attempt;
    try {
      const auto norm = normalize_label(backend.complete(req).text);
      if (!norm.text.empty()) {
        out.label.text = norm.text;
        out.truncated = norm.truncated;
        return out;
      }
      out.failure = "empty label";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransportError && e.code() != ErrorCode::kRemoteError) throw;
      out.failure = e.what();
      out.transport_failure = true;
      break;
    }
  }
  out.fallback = true;
  out.label.text = std::string(to_string(fallback_class));
  return out;
}

LabelCache::LabelCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    for (const auto& row : util::read_jsonl(*path_)) {
      CacheEntry e;
      e.hash = std::stoull(row.at("hash").get<std::string>(), nullptr, 16);
      e.tags_canonical = row.at("tags_canonical").get<std::string>();
      e.label = row.at("label").get<std::string>();
      entries_[e.hash] = std::move(e);
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
}

std::optional<CacheEntry> LabelCache::find(std::uint64_t hash) const {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(hash); it != entries_.end()) return it->second;
  return std::nullopt;
}

void LabelCache::insert(const CacheEntry& entry) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(entry.hash, entry).second) return;
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    out << nlohmann::json{{"hash", util::hex64(entry.hash)},
                          {"tags_canonical", entry.tags_canonical},
                          {"label", entry.label}}
               .dump()
        << '\n';
  }
}

std::size_t LabelCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

nlohmann::json RelabelStats::to_json() const {
  return {{"objects", objects},     {"unique_tagsets", unique_tagsets},
          {"cache_hits", cache_hits}, {"endpoint_requests", endpoint_requests},
          {"truncated", truncated}, {"fallbacks", fallbacks},
          {"transport_failures", transport_failures}, {"unique_labels", unique_labels}};
}

RelabelResult relabel_corpus(const std::vector<osm::OsmObject>& objects,
                             net::ChatBackend& backend, LabelCache& cache,
                             const LabelParams& params, std::size_t max_in_flight) {
  RelabelResult result;
  result.stats.objects = objects.size();

  struct Pending {
    CanonicalTagset canon;
    const osm::OsmObject* exemplar;
  };
  std::map<std::uint64_t, Pending> unique;  // hash order keeps merging deterministic
  std::vector<std::uint64_t> object_hash(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    auto canon = canonicalize_tagset(objects[i].tags);
    object_hash[i] = canon.hash;
    unique.try_emplace(canon.hash, Pending{std::move(canon), &objects[i]});
  }
  result.stats.unique_tagsets = unique.size();

  std::vector<const Pending*> misses;
  std::map<std::uint64_t, std::string> labels;
  for (const auto& [hash, pending] : unique) {
    if (auto hit = cache.find(hash)) {
      labels[hash] = hit->label;
      ++result.stats.cache_hits;
    } else {
      misses.push_back(&pending);
    }
  }

  std::vector<LabelOutcome> outcomes(misses.size());
  util::parallel_for(misses.size(), max_in_flight, [&](std::size_t i) {
    const auto& p = *misses[i];
    outcomes[i] = request_label(p.exemplar->tags, p.exemplar->object_class.value_or(ObjectClass::kOther),
                                backend, params);
    if (!outcomes[i].fallback) {
      cache.insert({p.canon.hash, p.canon.text, outcomes[i].label.text});
    }
  });
  result.stats.endpoint_requests = misses.size();
  for (std::size_t i = 0; i < misses.size(); ++i) {
    labels[misses[i]->canon.hash] = outcomes[i].label.text;
    if (outcomes[i].truncated) ++result.stats.truncated;
    if (outcomes[i].transport_failure) ++result.stats.transport_failures;
    if (outcomes[i].fallback) {
      ++result.stats.fallbacks;
      log::warn("relabel", "label fallback",
                {{"tags", misses[i]->canon.text}, {"reason", outcomes[i].failure}});
    }
  }

  std::set<std::string> vocabulary;
  result.objects = objects;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    result.objects[i].label = labels.at(object_hash[i]);
    vocabulary.insert(*result.objects[i].label);
  }
  result.stats.unique_labels = vocabulary.size();
  return result;
}

}  // namespace osmda::relabel
