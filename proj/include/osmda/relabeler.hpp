#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/net/chat.hpp"
#include "osmda/osm.hpp"

namespace osmda::relabel {

struct CanonicalTagset {
  std::string text;  // "k=v;" pairs, keys sorted
  std::uint64_t hash = 0;
};

// Throws kInvalidArgument for an empty tag set.
CanonicalTagset canonicalize_tagset(const osm::Tags& tags);

std::string build_label_prompt(const osm::Tags& tags);

struct SemanticLabel {
  std::string text;
  std::uint64_t source_tagset_hash = 0;
};

struct NormalizedLabel {
  std::string text;  // empty when nothing usable remained
  bool truncated = false;
};

// Lowercases, strips quotes and punctuation, drops digit-only tokens, keeps
// the first line only and at most three words.
NormalizedLabel normalize_label(std::string_view raw);

struct LabelParams {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 16;
  int max_attempts = 3;
};

struct LabelOutcome {
  SemanticLabel label;
  bool truncated = false;
  bool fallback = false;
  bool transport_failure = false;  // fallback caused by the endpoint itself
  int attempts = 0;
  std::string failure;  // reason when fallback
};

// Asks the endpoint for a label; on repeated empty output (or transport
// failure) falls back to the object class name.
LabelOutcome request_label(const osm::Tags& tags, ObjectClass fallback_class,
                           net::ChatBackend& backend, const LabelParams& params);

struct CacheEntry {
  std::uint64_t hash = 0;
  std::string tags_canonical;
  std::string label;
};

// tagset hash -> label, persisted as JSONL {"hash", "tags_canonical", "label"}.
// The hash is written as 16 hex digits.
class LabelCache {
 public:
  LabelCache() = default;
  // Loads existing entries and appends new ones to `path`.
  explicit LabelCache(std::filesystem::path path);

  std::optional<CacheEntry> find(std::uint64_t hash) const;
  void insert(const CacheEntry& entry);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  std::map<std::uint64_t, CacheEntry> entries_;
  mutable std::mutex mutex_;
};

struct RelabelStats {
  std::size_t objects = 0;
  std::size_t unique_tagsets = 0;
  std::size_t cache_hits = 0;
  std::size_t endpoint_requests = 0;
  std::size_t truncated = 0;
  std::size_t fallbacks = 0;
  std::size_t transport_failures = 0;
  std::size_t unique_labels = 0;

  nlohmann::json to_json() const;
};

struct RelabelResult {
  std::vector<osm::OsmObject> objects;  // with label set
  RelabelStats stats;
};

// Labels every object; one endpoint request per cache miss, issued with at
// most `max_in_flight` in parallel. Failures become fallback labels.
RelabelResult relabel_corpus(const std::vector<osm::OsmObject>& objects,
                             net::ChatBackend& backend, LabelCache& cache,
                             const LabelParams& params, std::size_t max_in_flight = 16);

}  // namespace osmda::relabel
