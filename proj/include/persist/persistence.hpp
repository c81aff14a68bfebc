#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "json.hpp"
#include "persist/clustering.hpp"
#include "persist/dataset.hpp"
#include "persist/linalg.hpp"

namespace persist {

// beta_bar_k = 1 / (2 max_j lambda_max(C_j)) over the clusters of a solution.
struct CriticalBeta {
  double beta = 0.0;
  double lambda_max = 0.0;  // the maximising eigenvalue
  int cluster = -1;         // cluster that attains it
};

// Uses the unnormalised hard scatter matrices of the feature vectors.
CriticalBeta critical_beta(const ClusteringSolution& solution, const Dataset& data);

// Uses the centred kernel blocks; equal to the feature-space value by the
// shared nonzero spectrum.
CriticalBeta critical_beta_kernel(const ClusteringSolution& solution, const KernelMatrix& kernel);

enum class ProfileMode { linear, kernel };

struct ProfileOptions {
  int k_min = 1;
  int k_max = 10;
  ProfileMode mode = ProfileMode::linear;
  double sigma = 0.0;  // kernel mode only
  int restarts = kDefaultRestarts;
  std::uint64_t seed = 0;
  bool keep_solutions = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

// beta_bar for k = k_min..k_max and v(k) = log beta_bar_k - log beta_bar_{k-1}
// for k = k_min+1..k_max. k_t is the argmax of v with ties going to the
// smallest k.
struct PersistenceProfile {
  int k_min = 1;
  int k_max = 0;
  std::vector<double> beta_bar;    // index k - k_min
  std::vector<int> argmax_cluster; // index k - k_min
  std::vector<double> v;           // index k - k_min - 1
  int k_t = 0;
  std::vector<ClusteringSolution> solutions;  // filled when keep_solutions

  double beta_bar_at(int k) const { return beta_bar.at(static_cast<std::size_t>(k - k_min)); }
  double v_at(int k) const { return v.at(static_cast<std::size_t>(k - k_min - 1)); }

  // k values where beta_bar decreased (negative v), which the construction
  // does not rule out.
  std::vector<int> decreasing_at() const;
};

// Algorithm: cluster at every k independently, take beta_bar, then pick the
// largest log-gap.
PersistenceProfile persistence_profile(const Dataset& data, const ProfileOptions& options);

// Assemble a profile from precomputed beta_bar values (k_min..).
PersistenceProfile profile_from_betas(int k_min, std::vector<double> beta_bar);

int estimate_k(const Dataset& data, const ProfileOptions& options);

// Columns k,beta_bar,log_beta_bar,v; v is blank on the first row.
void write_profile_csv(std::ostream& out, const PersistenceProfile& profile);

// {"k_min", "k_max", "k_t", "rows": [{"k", "beta_bar", "log_beta_bar", "v", "argmax_cluster"}]};
// v is null on the first row.
nlohmann::json profile_to_json(const PersistenceProfile& profile);

}  // namespace persist
