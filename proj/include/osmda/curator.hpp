#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace osmda::curate {

// Dense row-major double matrix used by PCA and K-means.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
};

// Row order matches the image id list stored next to it.
struct EmbeddingMatrix {
  std::uint32_t n_rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  // Throws kLoadError on size mismatch or non-finite values.
  void validate() const;
  Matrix to_matrix() const;
  Matrix select_rows(const std::vector<std::size_t>& rows) const;
};

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  std::vector<std::string> image_ids;
};

// Binary header {"OSMDAEMB", u32 n_rows, u32 dim} then little-endian f32
// rows; `<path>.ids.jsonl` maps row -> image_id.
void write_embeddings(const std::filesystem::path& path, const EmbeddingFile& file);
EmbeddingFile read_embeddings(const std::filesystem::path& path);

struct QueryItem {
  std::string image_id;
  std::vector<std::string> queries;
};

struct BalanceResult {
  std::vector<std::string> retained;  // input order
  std::map<std::string, std::size_t> frequency;
  std::map<std::string, double> acceptance;  // p_q = min(1, t / n_q)
};

// Each (image, query) membership is accepted with p_q using a draw keyed by
// (seed, stage, image_id, query); an image survives if any membership is
// accepted. Throws kInvalidArgument for t < 1 or an image without queries.
BalanceResult balance_by_queries(const std::vector<QueryItem>& items, double t, std::uint64_t seed,
                                 std::uint64_t stage = 1);

// floor(log2(count + 1)).
int count_bin(std::size_t count);
std::map<std::string, int> bin_object_counts(
    const std::vector<std::pair<std::string, std::size_t>>& counts);

struct PcaResult {
  Matrix projected;    // n_rows x dim
  Matrix components;   // dim x input dim, rows are unit eigenvectors
  std::vector<double> mean;
  std::vector<double> explained_variance;
  std::vector<double> explained_variance_ratio;
  bool degenerate = false;
};

// Covariance eigendecomposition by cyclic Jacobi. Components come in
// descending eigenvalue order with the largest-magnitude entry positive.
PcaResult pca_project(const Matrix& x, std::size_t dim, std::size_t workers = 1);

// Eigenvalues (descending) and matching eigenvectors (as rows) of a
// symmetric matrix.
void symmetric_eigen(const Matrix& a, std::vector<double>& values, Matrix& vectors);

struct KMeansResult {
  std::vector<std::uint32_t> assignments;
  Matrix centroids;
  double inertia = 0.0;
  // Inertia after every assignment step; non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
};

// Greedy k-means++ seeding followed by Lloyd iterations. Lloyd stops when the
// relative inertia change drops to `tol`, when no assignment changed, or after
// `max_iter`; single-point transfers then polish the partition. The
// lowest-inertia of `n_init` runs is kept.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter = 100,
                    double tol = 1e-6, std::size_t workers = 1, int n_init = 10);

double inertia_of(const Matrix& x, const std::vector<std::uint32_t>& assignments,
                  const Matrix& centroids);

struct CurationParams {
  double t1 = 700;
  double t2 = 4000;
  double t3 = 15;
  std::size_t pca_dim = 256;
  std::size_t n_clusters = 25000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  int kmeans_max_iter = 100;
  int kmeans_n_init = 10;

  void validate() const;
  nlohmann::json to_json() const;
};

struct StageTrace {
  std::string name;
  double threshold = 0;
  std::size_t input = 0;
  std::size_t output = 0;
  std::map<std::string, std::size_t> frequency;
  std::map<std::string, double> acceptance;
};

struct CurationTrace {
  std::uint64_t seed = 0;
  std::vector<StageTrace> stages;
  std::size_t pca_dim_used = 0;
  std::size_t n_clusters_used = 0;
  double explained_variance_ratio = 0.0;

  nlohmann::json to_json() const;
};

struct CurationImage {
  std::string image_id;
  std::vector<std::string> labels;  // semantic labels of its objects
  std::size_t object_count = 0;
};

// Query used for images whose objects were all filtered out.
inline constexpr const char* kNoLabelQuery = "<none>";

struct CurationResult {
  std::vector<std::string> curated;  // input order
  CurationTrace trace;
};

// Stage 1 balances on labels with t1, stage 2 on count bins with t2 over the
// survivors, stage 3 on K-means clusters of PCA-projected embeddings with t3.
// `embeddings` row i belongs to images[i]. Throws kCurationCollapse when a
// stage keeps nothing.
CurationResult curate(const std::vector<CurationImage>& images, const EmbeddingMatrix& embeddings,
                      const CurationParams& params);

// Seed handed to K-means in stage 3.
std::uint64_t stage3_kmeans_seed(std::uint64_t seed);

// Query strings used by stages 2 and 3.
std::string bin_query(int bin);
std::string cluster_query(std::uint32_t cluster);

}  // namespace osmda::curate
