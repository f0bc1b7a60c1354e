#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmda/eval/tasks.hpp"
#include "osmda/net/chat.hpp"

namespace osmda::eval {

struct Answer {
  bool invalid = true;
  std::string label;         // yes/no, rural/urban, class name, free text
  double number = 0.0;       // count / area
  std::set<char> letters;    // multi-choice

  nlohmann::json to_json() const;
};

Answer parse_answer(TaskKind kind, std::string_view raw, const std::vector<std::string>& classes = {});

// Macro-F1 over the classes present in `golds`; nullopt predictions are
// INVALID (false negative for the gold class, never a false positive).
// Throws kInvalidArgument for empty or misaligned input.
double macro_f1(const std::vector<std::optional<std::string>>& preds, const std::vector<std::string>& golds);

// Each option letter is a binary class; macro over letters that occur in a
// gold or predicted set.
double multilabel_macro_f1(const std::vector<std::set<char>>& preds, const std::vector<std::set<char>>& golds);

double mean_absolute_error(const std::vector<double>& preds, const std::vector<double>& golds);

double nmae(double mae, double m);

struct MetricParams {
  double m_count_hr = 5;
  double m_count_lr = 150;
  double m_area = 1500;
};

enum class RsvqaSplit { kLr, kHr };

struct RsvqaScores {
  std::optional<double> rural_urban_f1;
  std::optional<double> presence_f1;
  std::optional<double> count_mae;
  std::optional<double> area_mae;
  std::optional<double> comparison_f1;
};

// Mean of the four task scores (MAE terms converted with nmae). Throws
// kInvalidArgument when a task of the split is missing.
double rsvqa_aggregate(RsvqaSplit split, const RsvqaScores& s, const MetricParams& params = {});

struct JudgeScore {
  std::array<double, 5> probabilities{};  // tokens "1".."5"
  double continuous = 0.0;                // in [1, 5]
  double normalized = 0.0;                // continuous / 5
};

// Softmax over the log-probabilities of the score tokens found among the
// final-position candidates. Throws kJudgeFailure when none is present.
JudgeScore geval_from_logprobs(const std::vector<net::TokenLogprob>& candidates);
JudgeScore geval_from_probabilities(const std::array<double, 5>& weights);

enum class JudgeKind { kCaption, kVqa };

struct JudgeParams {
  std::string model;
  int top_logprobs = 20;
};

JudgeScore geval_score(net::ChatBackend& judge, JudgeKind kind, const std::string& gt, const std::string& pred,
                       const std::string& question = {}, const JudgeParams& params = {});

struct RankCell {
  std::string benchmark;
  std::string metric;
  Split split = Split::kFineTuning;
  bool higher_is_better = true;
};

struct ModelScores {
  std::string model;
  std::map<std::string, double> values;  // keyed by "benchmark/metric"
};

struct RankRow {
  std::string model;
  std::map<std::string, double> cell_ranks;
  double fine_tuning = 0.0;
  double generalization = 0.0;
  double overall = 0.0;
};

std::string cell_key(const RankCell& c);

// 1 = best, ties share their mean rank. Throws kInvalidArgument when a
// model lacks a cell. Splits without cells report NaN.
std::vector<RankRow> average_rank(const std::vector<RankCell>& cells, const std::vector<ModelScores>& models);

// Ranks of `values` (1 = largest when higher_is_better), mean rank on ties.
std::vector<double> rank_with_ties(const std::vector<double>& values, bool higher_is_better = true);

std::string rank_table_csv(const std::vector<RankRow>& rows);

}  // namespace osmda::eval
