#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "persist/matrix.hpp"

namespace persist {

// N points in R^d with per-point weights p_i and optional ground-truth labels.
//
// Immutable after construction. Construction validates N >= 1, d >= 1, finite
// entries, nonnegative weights summing to 1 (1e-9), and one label per point.
// Empty weights mean uniform 1/N.
class Dataset {
 public:
  Dataset(Matrix points, std::optional<std::vector<int>> labels = std::nullopt,
          std::string name = {}, std::vector<double> weights = {});

  std::size_t size() const { return points_.rows(); }
  std::size_t dim() const { return points_.cols(); }

  const Matrix& points() const { return points_; }
  std::span<const double> point(std::size_t i) const { return points_.row(i); }
  std::span<const double> weights() const { return weights_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  const std::string& name() const { return name_; }

  // Copy with a different name, keeping points, weights and labels.
  Dataset renamed(std::string name) const;

 private:
  Matrix points_;
  std::vector<double> weights_;
  std::optional<std::vector<int>> labels_;
  std::string name_;
};

// Column-wise z-score with the population standard deviation (divide by N).
// Constant columns become zero.
Dataset normalize_zscore(const Dataset& data);

Dataset gen_gaussian_mixture(const Matrix& means, const std::vector<Matrix>& covariances,
                             const std::vector<int>& counts, std::uint64_t seed);

// Two disks of radius `radius`, centres (0, -gap/2) and (0, +gap/2).
Dataset gen_two_disks(double radius, double center_gap, int n_per_disk, std::uint64_t seed);

// Nine Gaussian blobs in three groups of three. Group centres sit on an
// equilateral triangle of side `super_spacing`; within a group the blob
// centres sit on an equilateral triangle of side `sub_spacing`.
// Labels are 3 * group + member.
Dataset gen_supercluster_grid(double super_spacing, double sub_spacing, const Matrix& sub_cov,
                              int n_per_sub, std::uint64_t seed);

// Concentric circles, uniform angle, isotropic Gaussian noise.
Dataset gen_rings(const std::vector<double>& radii, int n_per_ring, double noise_sd,
                  std::uint64_t seed);

// Interleaved Archimedean spiral arms, 1.5 turns each, radius 0.2 to 1.2.
Dataset gen_spirals(int n_arms, int n_per_arm, double noise_sd, std::uint64_t seed);

// side x side lattice of isotropic Gaussian blobs.
Dataset gen_gaussian_grid(int side, double spacing, double sd, int n_per_blob,
                          std::uint64_t seed);

struct CsvOptions {
  bool has_header = false;
  std::optional<std::size_t> label_column;  // 0-based
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(std::istream& in, const CsvOptions& options = {}, std::string name = {});

// Header x1..xd[,label]; doubles printed round-trip exact.
void write_csv(std::ostream& out, const Dataset& data);

}  // namespace persist
