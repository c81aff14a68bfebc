#include "persist/clustering.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "persist/error.hpp"
#include "persist/rng.hpp"

namespace persist {
namespace {

struct Run {
  std::vector<int> assignment;
  Matrix centroids;
  double distortion = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

std::size_t sample_weighted(Rng& rng, std::span<const double> mass, double total) {
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0.0) continue;
    acc += mass[i];
    last_positive = i;
    if (acc > target) return i;
  }
  return last_positive;
}

// Greedy k-means++: each new centre is the best of 2 + floor(ln k) candidates
// drawn with probability proportional to p_i D(x_i)^2.
Matrix seed_centroids(const Matrix& points, std::span<const double> weights, int k, Rng& rng) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  Matrix centroids(static_cast<std::size_t>(k), d);

  double weight_total = 0.0;
  for (double w : weights) weight_total += w;
  std::size_t first = weight_total > 0.0 ? sample_weighted(rng, weights, weight_total) : rng.index(n);
  std::copy_n(points.row(first).begin(), d, centroids.row(0).begin());

  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = squared_distance(points.row(i), points.row(first));

  std::vector<double> mass(n), candidate(n), best_candidate(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mass[i] = weights[i] * closest[i];
      total += mass[i];
    }
    std::size_t chosen = 0;
    if (!(total > 0.0)) {
      // Every remaining point coincides with a centre; any choice is equivalent.
      chosen = rng.index(n);
      std::fill(best_candidate.begin(), best_candidate.end(), 0.0);
    } else {
      double best_potential = std::numeric_limits<double>::infinity();
      for (int t = 0; t < trials; ++t) {
        const std::size_t idx = sample_weighted(rng, mass, total);
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          candidate[i] = std::min(closest[i], squared_distance(points.row(i), points.row(idx)));
          potential += weights[i] * candidate[i];
        }
        if (potential < best_potential) {
          best_potential = potential;
          chosen = idx;
          best_candidate.swap(candidate);
        }
      }
    }
    std::copy_n(points.row(chosen).begin(), d, centroids.row(static_cast<std::size_t>(c)).begin());
    closest = best_candidate;
  }
  return centroids;
}

// Nearest centre, lowest index on ties.
void assign_nearest(const Matrix& points, const Matrix& centroids, std::vector<int>& out) {
  const std::size_t k = centroids.rows();
  for (std::size_t i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(points.row(i), centroids.row(0));
    for (std::size_t j = 1; j < k; ++j) {
      const double dj = squared_distance(points.row(i), centroids.row(j));
      if (dj < best_d) {
        best_d = dj;
        best = static_cast<int>(j);
      }
    }
    out[i] = best;
  }
}

// Moves the point farthest from its centre (among clusters with >= 2 members)
// into each empty cluster.
void repair_empty(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment,
                  int k) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
  std::vector<double> dist(points.rows());
  bool computed = false;
  for (int e = 0; e < k; ++e) {
    if (counts[static_cast<std::size_t>(e)] != 0) continue;
    if (!computed) {
      for (std::size_t i = 0; i < points.rows(); ++i) {
        dist[i] = squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(assignment[i])));
      }
      computed = true;
    }
    std::size_t pick = points.rows();
    double far = -1.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
      if (counts[static_cast<std::size_t>(assignment[i])] < 2) continue;
      if (dist[i] > far) {
        far = dist[i];
        pick = i;
      }
    }
    --counts[static_cast<std::size_t>(assignment[pick])];
    assignment[pick] = e;
    counts[static_cast<std::size_t>(e)] = 1;
    dist[pick] = 0.0;
  }
}

void update_means(const Matrix& points, std::span<const double> weights,
                  const std::vector<int>& assignment, Matrix& centroids) {
  const std::size_t k = centroids.rows();
  const std::size_t d = centroids.cols();
  Matrix sums(k, d);
  Matrix plain(k, d);
  std::vector<double> mass(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  std::vector<std::size_t> last(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto a = static_cast<std::size_t>(assignment[i]);
    const auto x = points.row(i);
    mass[a] += weights[i];
    ++counts[a];
    last[a] = i;
    for (std::size_t c = 0; c < d; ++c) {
      sums(a, c) += weights[i] * x[c];
      plain(a, c) += x[c];
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 1) {
      // w x / w is not always x in floating point.
      std::copy_n(points.row(last[j]).begin(), d, centroids.row(j).begin());
      continue;
    }
    for (std::size_t c = 0; c < d; ++c) {
      centroids(j, c) = mass[j] > 0.0 ? sums(j, c) / mass[j]
                                      : plain(j, c) / static_cast<double>(counts[j]);
    }
  }
}

double assigned_distortion(const Matrix& points, std::span<const double> weights,
                           const std::vector<int>& assignment, const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    s += weights[i] *
         squared_distance(points.row(i), centroids.row(static_cast<std::size_t>(assignment[i])));
  }
  return s;
}

Run lloyd(const Matrix& points, std::span<const double> weights, int k, Rng& rng) {
  Run run;
  run.centroids = seed_centroids(points, weights, k, rng);
  run.assignment.assign(points.rows(), 0);
  assign_nearest(points, run.centroids, run.assignment);
  std::vector<int> next(points.rows());
  [[maybe_unused]] double previous = std::numeric_limits<double>::infinity();
  for (int iter = 1;; ++iter) {
    repair_empty(points, run.centroids, run.assignment, k);
    update_means(points, weights, run.assignment, run.centroids);
    run.iterations = iter;
#ifndef NDEBUG
    const double current = assigned_distortion(points, weights, run.assignment, run.centroids);
    assert(current <= previous * (1.0 + 1e-12) + 1e-300);
    previous = current;
#endif
    if (iter >= kLloydIterationCap) break;
    assign_nearest(points, run.centroids, next);
    if (next == run.assignment) break;
    run.assignment.swap(next);
  }
  run.distortion = assigned_distortion(points, weights, run.assignment, run.centroids);
  return run;
}

// Renumbers clusters by first appearance.
void canonicalize(Run& run, int k) {
  std::vector<int> map(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int a : run.assignment) {
    if (map[static_cast<std::size_t>(a)] < 0) map[static_cast<std::size_t>(a)] = next++;
  }
  Matrix reordered(run.centroids.rows(), run.centroids.cols());
  for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
    const auto to = static_cast<std::size_t>(map[j]);
    std::copy_n(run.centroids.row(j).begin(), run.centroids.cols(), reordered.row(to).begin());
  }
  for (int& a : run.assignment) a = map[static_cast<std::size_t>(a)];
  run.centroids = std::move(reordered);
}

}  // namespace

std::vector<std::size_t> ClusteringSolution::members(int cluster) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == cluster) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> ClusteringSolution::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

ClusteringSolution kmeans(const Matrix& points, std::span<const double> weights, int k,
                          int restarts, std::uint64_t seed) {
  if (k <= 0) throw Error("k must be positive");
  if (static_cast<std::size_t>(k) > points.rows()) {
    throw Error("k = " + std::to_string(k) + " exceeds the number of points (" +
                std::to_string(points.rows()) + ")");
  }
  if (restarts < 1) throw Error("restarts must be at least 1");
  if (weights.size() != points.rows()) throw Error("weight count does not match point count");

  Run best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Run run = lloyd(points, weights, k, rng);
    if (run.distortion < best.distortion) best = std::move(run);
  }
  canonicalize(best, k);
  ClusteringSolution out;
  out.k = k;
  out.assignment = std::move(best.assignment);
  out.centroids = std::move(best.centroids);
  out.distortion = best.distortion;
  out.iterations = best.iterations;
  return out;
}

ClusteringSolution kmeans(const Dataset& data, int k, int restarts, std::uint64_t seed) {
  return kmeans(data.points(), data.weights(), k, restarts, seed);
}

SpectralEmbedding::SpectralEmbedding(const KernelMatrix& similarity) {
  const std::size_t n = similarity.order();
  if (n == 0) throw Error("empty similarity matrix");
  std::vector<double> inv_sqrt_degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double v : similarity.gram().dense().row(i)) deg += v;
    if (!(deg > 0.0)) throw Error("isolated point: row " + std::to_string(i) + " has zero degree");
    inv_sqrt_degree[i] = 1.0 / std::sqrt(deg);
  }
  Eigen::MatrixXd normalized(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      normalized(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          inv_sqrt_degree[i] * similarity(i, j) * inv_sqrt_degree[j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized);
  if (solver.info() != Eigen::Success) throw Error("spectral embedding: eigensolver failed");
  // L_sym = I - M, so ascending Laplacian order is descending order of M.
  values_.resize(n);
  vectors_ = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto src = static_cast<Eigen::Index>(n - 1 - c);
    values_[c] = 1.0 - solver.eigenvalues()(src);
    for (std::size_t r = 0; r < n; ++r) {
      vectors_(r, c) = solver.eigenvectors()(static_cast<Eigen::Index>(r), src);
    }
  }
}

Matrix SpectralEmbedding::embed(int k) const {
  if (k <= 0 || static_cast<std::size_t>(k) > size()) throw Error("embedding dimension out of range");
  const std::size_t n = size();
  const auto kk = static_cast<std::size_t>(k);
  Matrix out(n, kk);
  for (std::size_t r = 0; r < n; ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < kk; ++c) norm += vectors_(r, c) * vectors_(r, c);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < kk; ++c) out(r, c) = norm > 0.0 ? vectors_(r, c) / norm : 0.0;
  }
  return out;
}

ClusteringSolution spectral_cluster(const SpectralEmbedding& embedding, int k, int restarts,
                                    std::uint64_t seed) {
  if (k <= 0) throw Error("k must be positive");
  if (static_cast<std::size_t>(k) > embedding.size()) {
    throw Error("k = " + std::to_string(k) + " exceeds the number of points");
  }
  const std::vector<double> uniform(embedding.size(), 1.0 / static_cast<double>(embedding.size()));
  return kmeans(embedding.embed(k), uniform, k, restarts, seed);
}

ClusteringSolution spectral_cluster(const KernelMatrix& similarity, int k, int restarts,
                                    std::uint64_t seed) {
  if (k <= 0) throw Error("k must be positive");
  if (static_cast<std::size_t>(k) > similarity.order()) {
    throw Error("k = " + std::to_string(k) + " exceeds the number of points");
  }
  return spectral_cluster(SpectralEmbedding(similarity), k, restarts, seed);
}

}  // namespace persist
