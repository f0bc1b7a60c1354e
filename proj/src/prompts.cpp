#include "osmda/prompts.hpp"

#include <mutex>

#include "osmda/embedded.hpp"
#include "osmda/error.hpp"
#include "osmda/util/hash.hpp"
#include "osmda/util/text.hpp"

namespace osmda::prompts {

namespace {
std::mutex g_mutex;
std::map<std::string, std::string, std::less<>> g_overrides;
}  // namespace

const std::vector<TemplateInfo>& registry() {
  static const std::vector<TemplateInfo> kRegistry = {
      {"relabel", {"<key>: <value>, ..."}},
      {"caption_pseudolabel", {"<res>"}},
      {"short_caption", {}},
      {"rsvqa_presence", {"<question>"}},
      {"rsvqa_count", {"<question>"}},
      {"rsvqa_comparison", {"<question>"}},
      {"rsvqa_area", {"<question>"}},
      {"rsvqa_rural_urban", {"<question>"}},
      {"rsvqa_rural_urban_literal", {"<question>"}},
      {"vrsbench_caption", {}},
      {"vrsbench_vqa", {"<question>"}},
      {"classification", {"<comma_separated_MC_list>"}},
      {"million_aid", {"<comma_separated_hyphen_fused_hierarchical_classes>"}},
      {"xlrs_caption", {}},
      {"xlrs_vqa", {"<question>", "<comma_separated_options>"}},
      {"geval_caption", {"<gt>", "<pred>"}},
      {"geval_vqa", {"<q>", "<gt>", "<pred>"}},
  };
  return kRegistry;
}

namespace {
const TemplateInfo& info(std::string_view name) {
  for (const auto& t : registry()) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown prompt template " + std::string(name));
}
}  // namespace

std::string text(std::string_view name) {
  info(name);
  {
    std::lock_guard lock(g_mutex);
    if (auto it = g_overrides.find(name); it != g_overrides.end()) return it->second;
  }
  return std::string(embedded_file(std::string(name) + ".txt"));
}

std::string digest(std::string_view name) { return util::sha256_hex(text(name)); }

void set_override(std::string_view name, std::string body) {
  info(name);
  std::lock_guard lock(g_mutex);
  g_overrides[std::string(name)] = std::move(body);
}

void clear_overrides() {
  std::lock_guard lock(g_mutex);
  g_overrides.clear();
}

std::string render(std::string_view name, const std::map<std::string, std::string>& values) {
  const auto& t = info(name);
  std::map<std::string, std::string> used;
  for (auto ph : t.placeholders) {
    auto it = values.find(std::string(ph));
    if (it == values.end()) {
      throw Error(ErrorCode::kInvalidSample,
                  "template " + std::string(name) + " needs a value for " + std::string(ph));
    }
    used.insert(*it);
  }
  return util::substitute(text(name), used);
}

}  // namespace osmda::prompts
