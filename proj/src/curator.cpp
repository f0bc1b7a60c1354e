#include "osmda/curator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "osmda/error.hpp"
#include "osmda/util/jsonl.hpp"
#include "osmda/util/log.hpp"
#include "osmda/util/parallel.hpp"
#include "osmda/util/rng.hpp"

namespace osmda::curate {

namespace {

// Reductions are split into fixed-size row chunks and merged in chunk order,
// so sums do not depend on the number of workers.
constexpr std::size_t kChunkRows = 1024;

std::size_t chunk_count(std::size_t n) { return (n + kChunkRows - 1) / kChunkRows; }

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

std::filesystem::path ids_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".ids.jsonl");
}

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

}  // namespace

void EmbeddingMatrix::validate() const {
  if (data.size() != static_cast<std::size_t>(n_rows) * dim) {
    throw Error(ErrorCode::kLoadError, "embedding matrix size does not match n_rows x dim");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::kLoadError,
                  "non-finite embedding value at row " + std::to_string(i / std::max<std::uint32_t>(dim, 1)));
    }
  }
}

Matrix EmbeddingMatrix::to_matrix() const {
  Matrix m(n_rows, dim);
  std::copy(data.begin(), data.end(), m.data.begin());
  return m;
}

Matrix EmbeddingMatrix::select_rows(const std::vector<std::size_t>& rows) const {
  Matrix m(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(rows[i] * dim), dim, m.row(i));
  }
  return m;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingFile& file) {
  file.matrix.validate();
  if (file.image_ids.size() != file.matrix.n_rows) {
    throw Error(ErrorCode::kInvalidArgument, "embedding ids do not match row count");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write("OSMDAEMB", 8);
  const std::uint32_t header[2] = {byteswap_if_big(file.matrix.n_rows), byteswap_if_big(file.matrix.dim)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (float v : file.matrix.data) {
    const float le = byteswap_if_big(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(le));
  }
  std::vector<util::Json> rows;
  for (std::size_t i = 0; i < file.image_ids.size(); ++i) {
    rows.push_back({{"row", i}, {"image_id", file.image_ids[i]}});
  }
  util::write_jsonl(ids_path(path), rows);
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  char magic[8];
  std::uint32_t header[2];
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, "OSMDAEMB", 8) != 0) {
    throw Error(ErrorCode::kLoadError, path.string() + ": not an embedding file");
  }
  EmbeddingFile file;
  file.matrix.n_rows = byteswap_if_big(header[0]);
  file.matrix.dim = byteswap_if_big(header[1]);
  file.matrix.data.resize(static_cast<std::size_t>(file.matrix.n_rows) * file.matrix.dim);
  in.read(reinterpret_cast<char*>(file.matrix.data.data()),
          static_cast<std::streamsize>(file.matrix.data.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::kLoadError, path.string() + ": truncated embedding data");
  for (auto& v : file.matrix.data) v = byteswap_if_big(v);
  file.matrix.validate();

  file.image_ids.assign(file.matrix.n_rows, {});
  std::vector<bool> seen(file.matrix.n_rows, false);
  for (const auto& row : util::read_jsonl(ids_path(path))) {
    const auto r = row.at("row").get<std::size_t>();
    if (r >= file.matrix.n_rows) throw Error(ErrorCode::kLoadError, "embedding id row out of range");
    file.image_ids[r] = row.at("image_id").get<std::string>();
    seen[r] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error(ErrorCode::kLoadError, "embedding id sidecar does not cover every row");
  }
  return file;
}

BalanceResult balance_by_queries(const std::vector<QueryItem>& items, double t, std::uint64_t seed,
                                 std::uint64_t stage) {
  if (!(t >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "balancing threshold must be >= 1");
  BalanceResult out;
  std::vector<std::set<std::string>> unique(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].queries.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "image " + items[i].image_id + " has no queries");
    }
    unique[i].insert(items[i].queries.begin(), items[i].queries.end());
    for (const auto& q : unique[i]) ++out.frequency[q];
  }
  for (const auto& [q, n] : out.frequency) out.acceptance[q] = std::min(1.0, t / static_cast<double>(n));

  for (std::size_t i = 0; i < items.size(); ++i) {
    bool keep = false;
    for (const auto& q : unique[i]) {
      const double p = out.acceptance.at(q);
      // every membership gets its own draw even after the image is kept, which
      // keeps each draw a pure function of its key
      if (util::keyed_uniform(seed, stage, items[i].image_id, q) < p) keep = true;
    }
    if (keep) out.retained.push_back(items[i].image_id);
  }
  return out;
}

int count_bin(std::size_t count) {
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(count) + 1)) - 1;
}

std::map<std::string, int> bin_object_counts(
    const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::map<std::string, int> bins;
  for (const auto& [id, c] : counts) bins[id] = count_bin(c);
  return bins;
}

void symmetric_eigen(const Matrix& input, std::vector<double>& values, Matrix& vectors) {
  const std::size_t n = input.rows;
  if (input.cols != n) throw Error(ErrorCode::kInvalidArgument, "eigendecomposition needs a square matrix");
  Matrix a = input;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double frob = 0.0;
  for (double x : a.data) frob += x * x;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * frob || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  values.resize(n);
  vectors = Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t col = order[r];
    values[r] = a(col, col);
    std::size_t largest = 0;
    for (std::size_t k = 0; k < n; ++k) {
      vectors(r, k) = v(k, col);
      if (std::abs(v(k, col)) > std::abs(v(largest, col))) largest = k;
    }
    if (v(largest, col) < 0)
      for (std::size_t k = 0; k < n; ++k) vectors(r, k) = -vectors(r, k);
  }
}

PcaResult pca_project(const Matrix& x, std::size_t dim, std::size_t workers) {
  const std::size_t n = x.rows, d = x.cols;
  if (dim == 0 || dim > d) throw Error(ErrorCode::kInvalidArgument, "pca dim must be in [1, input dim]");
  if (n <= dim) throw Error(ErrorCode::kInvalidArgument, "pca needs more rows than output dims");

  PcaResult out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += x(i, j);
  for (auto& m : out.mean) m /= static_cast<double>(n);

  // Centered data, column-major, so covariance entries are contiguous dots.
  std::vector<double> cols(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) cols[j * n + i] = x(i, j) - out.mean[j];

  Matrix cov(d, d);
  util::parallel_for(d, workers, [&](std::size_t a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      const double* ca = cols.data() + a * n;
      const double* cb = cols.data() + b * n;
      for (std::size_t i = 0; i < n; ++i) s += ca[i] * cb[i];
      cov(a, b) = s / static_cast<double>(n - 1);
    }
  });
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) cov(a, b) = cov(b, a);

  double total = 0.0;
  for (std::size_t a = 0; a < d; ++a) total += cov(a, a);

  out.projected = Matrix(n, dim);
  out.components = Matrix(dim, d);
  out.explained_variance.assign(dim, 0.0);
  out.explained_variance_ratio.assign(dim, 0.0);
  if (!(total > 0.0)) {
    out.degenerate = true;
    for (std::size_t c = 0; c < dim; ++c) out.components(c, c) = 1.0;
    log::warn("curate", "degenerate embeddings: all rows equal, projection is zero", {{"rows", n}});
    return out;
  }

  std::vector<double> values;
  Matrix vectors;
  symmetric_eigen(cov, values, vectors);
  for (std::size_t c = 0; c < dim; ++c) {
    out.explained_variance[c] = std::max(values[c], 0.0);
    out.explained_variance_ratio[c] = out.explained_variance[c] / total;
    std::copy_n(vectors.row(c), d, out.components.row(c));
  }
  util::parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t c = 0; c < dim; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += cols[j * n + i] * out.components(c, j);
      out.projected(i, c) = s;
    }
  });
  return out;
}

double inertia_of(const Matrix& x, const std::vector<std::uint32_t>& assignments, const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) s += squared_distance(x.row(i), centroids.row(assignments[i]), x.cols);
  return s;
}

namespace {

// Nearest centroid for every row; returns the inertia and the number of
// changed assignments. Ties go to the lower cluster index.
std::pair<double, std::size_t> assign(const Matrix& x, const Matrix& centroids,
                                      std::vector<std::uint32_t>& assignments,
                                      std::vector<double>& dist, std::size_t workers) {
  const std::size_t chunks = chunk_count(x.rows);
  std::vector<double> partial(chunks, 0.0);
  std::vector<std::size_t> changed(chunks, 0);
  util::parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(x.rows, (c + 1) * kChunkRows);
    for (std::size_t i = c * kChunkRows; i < end; ++i) {
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < centroids.rows; ++k) {
        const double dk = squared_distance(x.row(i), centroids.row(k), x.cols);
        if (dk < best_d) {
          best_d = dk;
          best = static_cast<std::uint32_t>(k);
        }
      }
      if (assignments[i] != best) ++changed[c];
      assignments[i] = best;
      dist[i] = best_d;
      partial[c] += best_d;
    }
  });
  return {std::accumulate(partial.begin(), partial.end(), 0.0),
          std::accumulate(changed.begin(), changed.end(), std::size_t{0})};
}

std::size_t sample_by_weight(const std::vector<double>& w, double total, util::Rng& rng) {
  const double r = rng.uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last_positive = i;
    cum += w[i];
    if (cum > r) return i;
  }
  return last_positive;
}

// Greedy k-means++: each step draws 2 + floor(ln k) candidates by D^2 and
// keeps the one that lowers the seeding potential most.
Matrix plus_plus_seed(const Matrix& x, std::size_t k, util::Rng& rng, std::size_t workers) {
  const std::size_t n = x.rows;
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  Matrix centroids(k, x.cols);
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<double> trial_d2(n), best_d2(n);

  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    bool d2_current = false;
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        double best_potential = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trials; ++t) {
          const std::size_t cand = sample_by_weight(d2, total, rng);
          std::vector<double> partial(chunk_count(n), 0.0);
          util::parallel_for(chunk_count(n), workers, [&](std::size_t ch) {
            const std::size_t end = std::min(n, (ch + 1) * kChunkRows);
            for (std::size_t i = ch * kChunkRows; i < end; ++i) {
              trial_d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(cand), x.cols));
              partial[ch] += trial_d2[i];
            }
          });
          const double potential = std::accumulate(partial.begin(), partial.end(), 0.0);
          if (potential < best_potential) {
            best_potential = potential;
            pick = cand;
            best_d2.swap(trial_d2);
          }
        }
        d2.swap(best_d2);
        d2_current = true;
      } else {
        // every remaining point duplicates a centroid
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i]) rest.push_back(i);
        pick = rest[rng.below(rest.size())];
      }
    }
    chosen[pick] = true;
    std::copy_n(x.row(pick), x.cols, centroids.row(c));
    if (!d2_current) {
      util::parallel_for(chunk_count(n), workers, [&](std::size_t ch) {
        const std::size_t end = std::min(n, (ch + 1) * kChunkRows);
        for (std::size_t i = ch * kChunkRows; i < end; ++i) {
          d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c), x.cols));
        }
      });
    }
  }
  return centroids;
}

// Means of the assigned points; clusters left empty keep their centroid.
void recompute_means(const Matrix& x, const std::vector<std::uint32_t>& assignments, Matrix& centroids,
                     std::vector<std::size_t>& count) {
  const std::size_t k = centroids.rows, d = x.cols;
  Matrix total(k, d);
  count.assign(k, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    ++count[assignments[i]];
    for (std::size_t j = 0; j < d; ++j) total(assignments[i], j) += x(i, j);
  }
  for (std::size_t a = 0; a < k; ++a)
    if (count[a] > 0)
      for (std::size_t j = 0; j < d; ++j) centroids(a, j) = total(a, j) / static_cast<double>(count[a]);
}

// Hartigan single-point transfers: move a point when that lowers the total
// within-cluster sum of squares, accounting for both centroid shifts. A
// partition stable under these moves is also a Lloyd fixed point.
void transfer_refine(const Matrix& x, KMeansResult& r, int max_passes) {
  const std::size_t n = x.rows, k = r.centroids.rows, d = x.cols;
  std::vector<std::size_t> count;
  recompute_means(x, r.assignments, r.centroids, count);
  std::vector<double> xi(d);
  for (int pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t a = r.assignments[i];
      if (count[a] <= 1) continue;
      const double na = static_cast<double>(count[a]);
      const double remove_gain = na / (na - 1.0) * squared_distance(x.row(i), r.centroids.row(a), d);
      double best_cost = remove_gain;
      std::uint32_t best = a;
      for (std::uint32_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double nb = static_cast<double>(count[b]);
        const double cost = nb / (nb + 1.0) * squared_distance(x.row(i), r.centroids.row(b), d);
        if (cost < best_cost * (1.0 - 1e-12)) {
          best_cost = cost;
          best = b;
        }
      }
      if (best == a) continue;
      const double nb = static_cast<double>(count[best]);
      for (std::size_t j = 0; j < d; ++j) {
        r.centroids(a, j) = (na * r.centroids(a, j) - x(i, j)) / (na - 1.0);
        r.centroids(best, j) = (nb * r.centroids(best, j) + x(i, j)) / (nb + 1.0);
      }
      --count[a];
      ++count[best];
      r.assignments[i] = best;
      moved = true;
    }
    if (!moved) break;
    recompute_means(x, r.assignments, r.centroids, count);
    r.inertia_history.push_back(inertia_of(x, r.assignments, r.centroids));
  }
}

KMeansResult lloyd(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter, double tol,
                   std::size_t workers) {
  const std::size_t n = x.rows, d = x.cols;
  util::Rng rng(seed);
  KMeansResult r;
  r.centroids = plus_plus_seed(x, k, rng, workers);
  r.assignments.assign(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> dist(n, 0.0);

  auto [inertia, changed] = assign(x, r.centroids, r.assignments, dist, workers);
  r.inertia_history.push_back(inertia);

  const std::size_t chunks = chunk_count(n);
  for (r.iterations = 0; r.iterations < max_iter;) {
    // update step
    std::vector<Matrix> sums(chunks, Matrix(k, d));
    std::vector<std::vector<std::size_t>> counts(chunks, std::vector<std::size_t>(k, 0));
    util::parallel_for(chunks, workers, [&](std::size_t c) {
      const std::size_t end = std::min(n, (c + 1) * kChunkRows);
      for (std::size_t i = c * kChunkRows; i < end; ++i) {
        const auto a = r.assignments[i];
        ++counts[c][a];
        double* dst = sums[c].row(a);
        for (std::size_t j = 0; j < d; ++j) dst[j] += x(i, j);
      }
    });
    std::vector<std::size_t> count(k, 0);
    Matrix total(k, d);
    for (std::size_t c = 0; c < chunks; ++c) {
      for (std::size_t a = 0; a < k; ++a) count[a] += counts[c][a];
      for (std::size_t e = 0; e < total.data.size(); ++e) total.data[e] += sums[c].data[e];
    }
    std::vector<std::size_t> empty;
    for (std::size_t a = 0; a < k; ++a) {
      if (count[a] == 0) {
        empty.push_back(a);
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) r.centroids(a, j) = total(a, j) / static_cast<double>(count[a]);
    }
    if (!empty.empty()) {
      for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(x.row(i), r.centroids.row(r.assignments[i]), d);
      for (auto a : empty) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        if (!(dist[far] > 0.0)) break;
        std::copy_n(x.row(far), d, r.centroids.row(a));
        r.assignments[far] = static_cast<std::uint32_t>(a);
        dist[far] = 0.0;
      }
    }
    ++r.iterations;

    const double prev = r.inertia_history.back();
    std::tie(inertia, changed) = assign(x, r.centroids, r.assignments, dist, workers);
    r.inertia_history.push_back(inertia);
    if (changed == 0 || prev - inertia <= tol * prev) break;
  }
  transfer_refine(x, r, max_iter);
  r.inertia = r.inertia_history.back();
  return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter, double tol,
                    std::size_t workers, int n_init) {
  if (k == 0 || k > x.rows) throw Error(ErrorCode::kInvalidArgument, "kmeans needs 1 <= k <= n_rows");
  KMeansResult best;
  for (int run = 0; run < std::max(1, n_init); ++run) {
    const std::uint64_t run_seed = run == 0 ? seed : util::splitmix64(seed + static_cast<std::uint64_t>(run));
    auto r = lloyd(x, k, run_seed, max_iter, tol, workers);
    if (run == 0 || r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

void CurationParams::validate() const {
  if (!(t1 >= 1 && t2 >= 1 && t3 >= 1)) throw Error(ErrorCode::kInvalidArgument, "curation thresholds must be >= 1");
  if (pca_dim == 0 || n_clusters == 0) throw Error(ErrorCode::kInvalidArgument, "pca_dim and n_clusters must be >= 1");
}

nlohmann::json CurationParams::to_json() const {
  return {{"t1", t1},
          {"t2", t2},
          {"t3", t3},
          {"pca_dim", pca_dim},
          {"n_clusters", n_clusters},
          {"seed", seed},
          {"kmeans_max_iter", kmeans_max_iter},
          {"kmeans_n_init", kmeans_n_init}};
}

nlohmann::json CurationTrace::to_json() const {
  nlohmann::json j{{"seed", seed},
                   {"pca_dim_used", pca_dim_used},
                   {"n_clusters_used", n_clusters_used},
                   {"explained_variance_ratio", explained_variance_ratio},
                   {"acceptance_reading", "per-membership"},
                   {"stages", nlohmann::json::array()}};
  for (const auto& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"threshold", s.threshold},
                           {"input", s.input},
                           {"output", s.output},
                           {"frequency", s.frequency},
                           {"acceptance", s.acceptance}});
  }
  return j;
}

std::uint64_t stage3_kmeans_seed(std::uint64_t seed) { return util::splitmix64(seed ^ 0x6b6d65616e73ULL); }

std::string bin_query(int bin) { return "bin:" + std::to_string(bin); }
std::string cluster_query(std::uint32_t cluster) { return "cluster:" + std::to_string(cluster); }

CurationResult curate(const std::vector<CurationImage>& images, const EmbeddingMatrix& embeddings,
                      const CurationParams& params) {
  params.validate();
  embeddings.validate();
  if (embeddings.n_rows != images.size()) {
    throw Error(ErrorCode::kInvalidArgument, "embeddings are not aligned with the image list");
  }
  CurationResult out;
  out.trace.seed = params.seed;
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!row_of.emplace(images[i].image_id, i).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate image id " + images[i].image_id);
    }
  }

  auto run_stage = [&](std::string name, double t, std::uint64_t stage, const std::vector<QueryItem>& items) {
    auto balanced = balance_by_queries(items, t, params.seed, stage);
    out.trace.stages.push_back({std::move(name), t, items.size(), balanced.retained.size(),
                                std::move(balanced.frequency), std::move(balanced.acceptance)});
    if (balanced.retained.empty()) {
      throw Error(ErrorCode::kCurationCollapse,
                  "curation stage '" + out.trace.stages.back().name + "' retained no images; trace: " +
                      out.trace.to_json().dump());
    }
    return balanced.retained;
  };

  std::vector<QueryItem> items;
  for (const auto& img : images) {
    QueryItem it{img.image_id, img.labels};
    if (it.queries.empty()) it.queries.push_back(kNoLabelQuery);
    items.push_back(std::move(it));
  }
  if (items.empty()) throw Error(ErrorCode::kCurationCollapse, "no images to curate");
  auto survivors = run_stage("labels", params.t1, 1, items);

  items.clear();
  for (const auto& id : survivors) {
    items.push_back({id, {bin_query(count_bin(images[row_of.at(id)].object_count))}});
  }
  survivors = run_stage("object-count-bins", params.t2, 2, items);

  std::vector<std::size_t> rows;
  for (const auto& id : survivors) rows.push_back(row_of.at(id));
  Matrix x = embeddings.select_rows(rows);
  out.trace.pca_dim_used = std::min({params.pca_dim, static_cast<std::size_t>(embeddings.dim), rows.size() - 1});
  if (out.trace.pca_dim_used > 0) {
    auto pca = pca_project(x, out.trace.pca_dim_used, params.workers);
    out.trace.explained_variance_ratio =
        std::accumulate(pca.explained_variance_ratio.begin(), pca.explained_variance_ratio.end(), 0.0);
    x = std::move(pca.projected);
  }
  out.trace.n_clusters_used = std::min(params.n_clusters, rows.size());
  const auto km = kmeans(x, out.trace.n_clusters_used, stage3_kmeans_seed(params.seed),
                         params.kmeans_max_iter, 1e-6, params.workers, params.kmeans_n_init);
  items.clear();
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    items.push_back({survivors[i], {cluster_query(km.assignments[i])}});
  }
  out.curated = run_stage("embedding-clusters", params.t3, 3, items);
  return out;
}

}  // namespace osmda::curate
