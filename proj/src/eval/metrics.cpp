#include "osmda/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <regex>

#include "osmda/error.hpp"
#include "osmda/prompts.hpp"
#include "osmda/util/text.hpp"

namespace osmda::eval {

nlohmann::json Answer::to_json() const {
  if (invalid) return "INVALID";
  if (!letters.empty()) return std::string(letters.begin(), letters.end());
  if (!label.empty()) return label;
  return number;
}

namespace {

std::vector<std::string> word_tokens(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Answer first_token_of(std::string_view raw, std::initializer_list<std::string_view> accepted) {
  Answer a;
  for (const auto& tok : word_tokens(raw)) {
    for (auto acc : accepted) {
      if (tok == acc) {
        a.invalid = false;
        a.label = tok;
        return a;
      }
    }
  }
  return a;
}

bool class_boundary(const std::string& s, std::size_t pos) {
  if (pos >= s.size()) return true;
  const auto c = static_cast<unsigned char>(s[pos]);
  return !(std::isalnum(c) || c == '_' || c == '-');
}

}  // namespace

Answer parse_answer(TaskKind kind, std::string_view raw, const std::vector<std::string>& classes) {
  Answer a;
  switch (kind) {
    case TaskKind::kPresence:
    case TaskKind::kComparison:
      return first_token_of(raw, {"yes", "no"});
    case TaskKind::kRuralUrban:
      return first_token_of(raw, {"rural", "urban", "yes", "no"});
    case TaskKind::kCount:
    case TaskKind::kArea: {
      const std::string s(raw);
      std::smatch m;
      static const std::regex area_re(R"((\d+)(?:\.\d+)?\s*m(?:2|\^2|\xC2\xB2))");
      static const std::regex int_re(R"(\d+)");
      if (kind == TaskKind::kArea && std::regex_search(s, m, area_re)) {
        a.number = std::stod(m[1].str());
        a.invalid = false;
      } else if (std::regex_search(s, m, int_re)) {
        a.number = std::stod(m[0].str());
        a.invalid = false;
      }
      return a;
    }
    case TaskKind::kClassify: {
      const std::string lower = util::to_lower_ascii(raw);
      std::size_t best_len = 0;
      for (const auto& c : classes) {
        const std::string lc = util::to_lower_ascii(c);
        if (lc.empty() || lc.size() <= best_len) continue;
        for (auto pos = lower.find(lc); pos != std::string::npos; pos = lower.find(lc, pos + 1)) {
          if ((pos == 0 || class_boundary(lower, pos - 1)) && class_boundary(lower, pos + lc.size())) {
            a.label = c;
            a.invalid = false;
            best_len = lc.size();
            break;
          }
        }
      }
      return a;
    }
    case TaskKind::kMcMulti: {
      // Leading run of capital-letter tokens ("AC", "A, C", "A C").
      std::size_t i = 0;
      while (i < raw.size()) {
        const char c = raw[i];
        if (c == ' ' || c == ',' || c == ';' || c == '\t' || c == '\n' || c == '(' || c == ')' || c == '.') {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < raw.size() && std::isalpha(static_cast<unsigned char>(raw[j]))) ++j;
        if (j == i) break;
        const auto word = raw.substr(i, j - i);
        if (!std::all_of(word.begin(), word.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; })) break;
        a.letters.insert(word.begin(), word.end());
        i = j;
      }
      a.invalid = a.letters.empty();
      return a;
    }
    case TaskKind::kCaption:
    case TaskKind::kOpenVqa:
      a.label = util::collapse_whitespace(raw);
      a.invalid = a.label.empty();
      return a;
  }
  return a;
}

double macro_f1(const std::vector<std::optional<std::string>>& preds, const std::vector<std::string>& golds) {
  if (preds.empty() || preds.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "macro_f1 needs aligned, non-empty predictions and golds");
  }
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> per_class;
  for (const auto& g : golds) per_class[g];
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (preds[i] && *preds[i] == golds[i]) {
      ++per_class[golds[i]].tp;
      continue;
    }
    ++per_class[golds[i]].fn;
    if (preds[i]) {
      if (auto it = per_class.find(*preds[i]); it != per_class.end()) ++it->second.fp;
    }
  }
  double sum = 0.0;
  for (const auto& [cls, c] : per_class) {
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    sum += denom > 0 ? 2.0 * c.tp / denom : 0.0;
  }
  return sum / static_cast<double>(per_class.size());
}

double multilabel_macro_f1(const std::vector<std::set<char>>& preds, const std::vector<std::set<char>>& golds) {
  if (preds.empty() || preds.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "multilabel F1 needs aligned, non-empty predictions and golds");
  }
  std::map<char, std::array<std::size_t, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < golds.size(); ++i) {
    for (char g : golds[i]) ++counts[g][preds[i].count(g) ? 0 : 2];
    for (char p : preds[i])
      if (!golds[i].count(p)) ++counts[p][1];
  }
  if (counts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [letter, c] : counts) sum += 2.0 * c[0] / (2.0 * c[0] + c[1] + c[2]);
  return sum / static_cast<double>(counts.size());
}

double mean_absolute_error(const std::vector<double>& preds, const std::vector<double>& golds) {
  if (preds.empty() || preds.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "MAE needs aligned, non-empty predictions and golds");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - golds[i]);
  return s / static_cast<double>(preds.size());
}

double nmae(double mae, double m) {
  if (!(m > 0) || !(mae >= 0)) throw Error(ErrorCode::kInvalidArgument, "nmae needs mae >= 0 and M > 0");
  return std::max((m - mae) / m, 0.0);
}

double rsvqa_aggregate(RsvqaSplit split, const RsvqaScores& s, const MetricParams& params) {
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorCode::kInvalidArgument, std::string("rsvqa aggregate is missing ") + name);
    return *v;
  };
  if (split == RsvqaSplit::kLr) {
    return (need(s.rural_urban_f1, "rural_urban") + need(s.presence_f1, "presence") +
            nmae(need(s.count_mae, "count"), params.m_count_lr) + need(s.comparison_f1, "comparison")) /
           4.0;
  }
  return (need(s.presence_f1, "presence") + nmae(need(s.count_mae, "count"), params.m_count_hr) +
          nmae(need(s.area_mae, "area"), params.m_area) + need(s.comparison_f1, "comparison")) /
         4.0;
}

JudgeScore geval_from_probabilities(const std::array<double, 5>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) throw Error(ErrorCode::kJudgeFailure, "no probability mass on score tokens");
  JudgeScore s;
  for (std::size_t i = 0; i < 5; ++i) {
    s.probabilities[i] = weights[i] / total;
    s.continuous += static_cast<double>(i + 1) * s.probabilities[i];
  }
  s.normalized = s.continuous / 5.0;
  return s;
}

JudgeScore geval_from_logprobs(const std::vector<net::TokenLogprob>& candidates) {
  double max_lp = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, double>> hits;
  for (const auto& c : candidates) {
    const std::string t = util::trim(c.token);
    if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') {
      hits.emplace_back(static_cast<std::size_t>(t[0] - '1'), c.logprob);
      max_lp = std::max(max_lp, c.logprob);
    }
  }
  if (hits.empty()) throw Error(ErrorCode::kJudgeFailure, "judge returned none of the score tokens 1-5");
  std::array<double, 5> w{};
  for (const auto& [idx, lp] : hits) w[idx] += std::exp(lp - max_lp);
  return geval_from_probabilities(w);
}

JudgeScore geval_score(net::ChatBackend& judge, JudgeKind kind, const std::string& gt, const std::string& pred,
                       const std::string& question, const JudgeParams& params) {
  net::ChatRequest req;
  req.model = params.model;
  req.temperature = 0.0;
  req.max_tokens = 1;
  req.top_logprobs = params.top_logprobs;
  if (kind == JudgeKind::kCaption) {
    req.prompt = prompts::render("geval_caption", {{"<gt>", gt}, {"<pred>", pred}});
  } else {
    req.prompt = prompts::render("geval_vqa", {{"<q>", question}, {"<gt>", gt}, {"<pred>", pred}});
  }
  return geval_from_logprobs(judge.complete(req).final_top_logprobs);
}

std::string cell_key(const RankCell& c) { return c.benchmark + "/" + c.metric; }

std::vector<double> rank_with_ties(const std::vector<double>& values, bool higher_is_better) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::vector<RankRow> average_rank(const std::vector<RankCell>& cells, const std::vector<ModelScores>& models) {
  std::vector<RankRow> rows(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) rows[m].model = models[m].model;
  std::array<std::vector<double>, 2> split_sums;
  for (auto& s : split_sums) s.assign(models.size(), 0.0);
  std::array<std::size_t, 2> split_cells{0, 0};

  for (const auto& cell : cells) {
    const auto key = cell_key(cell);
    std::vector<double> values;
    for (const auto& model : models) {
      auto it = model.values.find(key);
      if (it == model.values.end()) {
        throw Error(ErrorCode::kInvalidArgument, "model " + model.model + " has no value for " + key);
      }
      values.push_back(it->second);
    }
    const auto ranks = rank_with_ties(values, cell.higher_is_better);
    const auto s = static_cast<std::size_t>(cell.split);
    ++split_cells[s];
    for (std::size_t m = 0; m < models.size(); ++m) {
      rows[m].cell_ranks[key] = ranks[m];
      split_sums[s][m] += ranks[m];
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t m = 0; m < models.size(); ++m) {
    rows[m].fine_tuning = split_cells[0] ? split_sums[0][m] / split_cells[0] : nan;
    rows[m].generalization = split_cells[1] ? split_sums[1][m] / split_cells[1] : nan;
    const auto total = split_cells[0] + split_cells[1];
    rows[m].overall = total ? (split_sums[0][m] + split_sums[1][m]) / total : nan;
  }
  return rows;
}

std::string rank_table_csv(const std::vector<RankRow>& rows) {
  std::string out = "model,fine_tuning,generalization,overall\n";
  auto fmt = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out += r.model + "," + fmt(r.fine_tuning) + "," + fmt(r.generalization) + "," + fmt(r.overall) + "\n";
  }
  return out;
}

}  // namespace osmda::eval
