#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "persist/dataset.hpp"
#include "persist/linalg.hpp"
#include "persist/matrix.hpp"

namespace persist {

// Hard clustering into k nonempty clusters.
//
// Labels are canonical: clusters are numbered in order of first appearance
// in the point sequence. `centroids` live in the space the clustering ran in
// (features for k-means, the spectral embedding for spectral clustering).
// `distortion` is sum_i p_i ||x_i - y_{assignment_i}||^2 in that space.
struct ClusteringSolution {
  int k = 0;
  std::vector<int> assignment;
  Matrix centroids;
  double distortion = 0.0;
  int iterations = 0;  // Lloyd iterations of the winning restart

  std::vector<std::size_t> members(int cluster) const;
  std::vector<std::size_t> cluster_sizes() const;
};

inline constexpr int kDefaultRestarts = 10;
inline constexpr int kLloydIterationCap = 300;

// Best of `restarts` greedy k-means++ initialisations, each refined by Lloyd
// iterations until the assignment is a fixed point or the iteration cap.
// Deterministic in `seed`.
ClusteringSolution kmeans(const Dataset& data, int k, int restarts, std::uint64_t seed);

// Same, on raw rows with explicit weights (used for spectral embeddings).
ClusteringSolution kmeans(const Matrix& points, std::span<const double> weights, int k,
                          int restarts, std::uint64_t seed);

// Ng-Jordan-Weiss embedding of a similarity matrix: eigenvectors of
// L_sym = I - D^{-1/2} K D^{-1/2} in ascending eigenvalue order.
// Computing it once lets callers cluster at many k.
class SpectralEmbedding {
 public:
  explicit SpectralEmbedding(const KernelMatrix& similarity);

  std::size_t size() const { return vectors_.rows(); }
  std::span<const double> laplacian_eigenvalues() const { return values_; }

  // First k eigenvectors as columns, each row scaled to unit length.
  Matrix embed(int k) const;

 private:
  std::vector<double> values_;
  Matrix vectors_;
};

ClusteringSolution spectral_cluster(const KernelMatrix& similarity, int k, int restarts,
                                    std::uint64_t seed);
ClusteringSolution spectral_cluster(const SpectralEmbedding& embedding, int k, int restarts,
                                    std::uint64_t seed);

}  // namespace persist
