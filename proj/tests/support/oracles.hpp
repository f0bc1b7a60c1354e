#pragma once

// Independent reference implementations used to check the library. None of
// these call the code path they verify.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "osmda/curator.hpp"
#include "osmda/eval/metrics.hpp"
#include "osmda/geo.hpp"
#include "osmda/render/labels.hpp"

namespace osmda::oracle {

// Area by counting `cell_m` grid cells whose centers fall inside the ring,
// after projecting about the ring's vertex centroid.
double grid_polygon_area(const geo::Geometry& ring, double cell_m);

// Eigen SelfAdjointEigenSolver on the sample covariance (n - 1).
struct DensePca {
  std::vector<std::vector<double>> components;  // top `dim`, descending eigenvalue
  std::vector<double> eigenvalues;
};
DensePca dense_pca(const curate::Matrix& x, std::size_t dim);

// Lowest sum of squared distances over every assignment of the points to at
// most k clusters (k^n enumeration, so keep n small).
double exhaustive_kmeans_optimum(const curate::Matrix& x, std::size_t k);

// O(n^2) greedy placement: candidates visited by (priority desc, box area
// desc, text asc), kept when inside the tile and disjoint from all kept.
std::vector<std::size_t> naive_greedy_placement(const std::vector<render::LabelCandidate>& cands, int width,
                                                int height);

// True when no placed pair overlaps and every rejected in-bounds candidate
// overlaps a placed one.
bool placement_is_valid_and_maximal(const std::vector<render::LabelCandidate>& cands,
                                    const std::vector<std::size_t>& placed, int width, int height,
                                    std::string* why = nullptr);

// Straight-line restatement of the three balancing stages. PCA and K-means
// (verified separately against the dense and exhaustive oracles) are reused;
// frequencies, probabilities, draws and staging are recomputed here.
std::vector<std::string> straight_line_curate(const std::vector<curate::CurationImage>& images,
                                              const curate::EmbeddingMatrix& embeddings,
                                              const curate::CurationParams& params);

// Rank of each value = 1 + #strictly better + (#equal others) / 2.
std::vector<double> brute_force_ranks(const std::vector<double>& values, bool higher_is_better);

struct OracleRankRow {
  std::string model;
  double fine_tuning = 0.0;
  double generalization = 0.0;
  double overall = 0.0;
};
std::vector<OracleRankRow> brute_force_average_rank(const std::vector<eval::RankCell>& cells,
                                                    const std::vector<eval::ModelScores>& models);

// Macro-F1 over gold classes by explicit confusion counting.
double brute_force_macro_f1(const std::vector<std::optional<std::string>>& preds,
                            const std::vector<std::string>& golds);

// Per-letter F1 averaged over letters present in gold or prediction.
double brute_force_multilabel_f1(const std::vector<std::set<char>>& preds, const std::vector<std::set<char>>& golds);

// Expected score over "1".."5" with a plain softmax of the given logprobs.
double geval_expectation(const std::vector<double>& logprobs_1_to_5);

}  // namespace osmda::oracle
