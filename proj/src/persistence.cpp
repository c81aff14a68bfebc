#include "persist/persistence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>

#include "persist/error.hpp"
#include "persist/rng.hpp"

namespace persist {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

CriticalBeta finish(double lambda, int cluster) {
  if (cluster < 0 || !(lambda > 0.0)) {
    throw Error("resolution unbounded; reduce k_max (every cluster has a zero scatter spectrum)");
  }
  return CriticalBeta{1.0 / (2.0 * lambda), lambda, cluster};
}

}  // namespace

CriticalBeta critical_beta(const ClusteringSolution& solution, const Dataset& data) {
  if (solution.assignment.size() != data.size()) throw Error("solution does not match dataset");
  double best = 0.0;
  int arg = -1;
  for (int j = 0; j < solution.k; ++j) {
    const auto members = solution.members(j);
    if (members.empty()) throw Error("empty cluster");
    if (members.size() == 1) continue;
    double extent = 0.0;
    for (std::size_t i : members) {
      for (double x : data.point(i)) extent = std::max(extent, std::abs(x));
    }
    const SymMatrix scatter =
        scatter_matrix(data, solution.assignment, solution.centroids.row(static_cast<std::size_t>(j)), j);
    const double lambda = largest_eigenvalue(scatter).value;
    // Below this the spectrum is rounding noise from coincident points.
    const double floor = 64.0 * static_cast<double>(members.size()) * (kEps * extent) * (kEps * extent);
    if (lambda > floor && lambda > best) {
      best = lambda;
      arg = j;
    }
  }
  return finish(best, arg);
}

CriticalBeta critical_beta_kernel(const ClusteringSolution& solution, const KernelMatrix& kernel) {
  if (solution.assignment.size() != kernel.order()) throw Error("solution does not match kernel");
  double best = 0.0;
  int arg = -1;
  for (int j = 0; j < solution.k; ++j) {
    const auto members = solution.members(j);
    if (members.empty()) throw Error("empty cluster");
    if (members.size() == 1) continue;
    double trace = 0.0;
    for (std::size_t i : members) trace += std::abs(kernel(i, i));
    const double lambda = symmetric_eigenvalues(kernel_scatter_matrix(kernel, members)).back();
    const double floor = 64.0 * kEps * trace;
    if (lambda > floor && lambda > best) {
      best = lambda;
      arg = j;
    }
  }
  return finish(best, arg);
}

std::vector<int> PersistenceProfile::decreasing_at() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) out.push_back(k_min + 1 + static_cast<int>(i));
  }
  return out;
}

PersistenceProfile profile_from_betas(int k_min, std::vector<double> beta_bar) {
  if (beta_bar.size() < 2) throw Error("a profile needs at least two resolutions");
  PersistenceProfile p;
  p.k_min = k_min;
  p.k_max = k_min + static_cast<int>(beta_bar.size()) - 1;
  p.beta_bar = std::move(beta_bar);
  p.argmax_cluster.assign(p.beta_bar.size(), -1);
  p.v.resize(p.beta_bar.size() - 1);
  for (std::size_t i = 1; i < p.beta_bar.size(); ++i) {
    p.v[i - 1] = std::log(p.beta_bar[i]) - std::log(p.beta_bar[i - 1]);
  }
  // Strict comparison keeps the smallest k on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.v.size(); ++i) {
    if (p.v[i] > p.v[best]) best = i;
  }
  p.k_t = k_min + 1 + static_cast<int>(best);
  return p;
}

PersistenceProfile persistence_profile(const Dataset& data, const ProfileOptions& options) {
  const int n = static_cast<int>(data.size());
  if (options.k_min < 1) throw Error("k_min must be at least 1");
  if (options.k_max < 2 || options.k_max <= options.k_min) {
    throw Error("k_max must be at least 2 and above k_min");
  }
  if (options.k_max > n - 1) {
    throw Error("k_max = " + std::to_string(options.k_max) + " must not exceed N - 1 = " +
                std::to_string(n - 1));
  }
  if (options.restarts < 1) throw Error("restarts must be at least 1");

  std::optional<KernelMatrix> kernel;
  std::optional<SpectralEmbedding> embedding;
  if (options.mode == ProfileMode::kernel) {
    kernel.emplace(gaussian_kernel(data, options.sigma));
    embedding.emplace(*kernel);
  }

  const int count = options.k_max - options.k_min + 1;
  std::vector<double> betas(static_cast<std::size_t>(count));
  std::vector<int> argmax(static_cast<std::size_t>(count));
  std::vector<ClusteringSolution> solutions(options.keep_solutions ? static_cast<std::size_t>(count) : 0);
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(count));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int idx = next++; idx < count; idx = next++) {
      const int k = options.k_min + idx;
      const auto slot = static_cast<std::size_t>(idx);
      try {
        const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(k));
        ClusteringSolution sol = options.mode == ProfileMode::kernel
                                     ? spectral_cluster(*embedding, k, options.restarts, seed)
                                     : kmeans(data, k, options.restarts, seed);
        const CriticalBeta cb = options.mode == ProfileMode::kernel
                                    ? critical_beta_kernel(sol, *kernel)
                                    : critical_beta(sol, data);
        betas[slot] = cb.beta;
        argmax[slot] = cb.cluster;
        if (options.keep_solutions) solutions[slot] = std::move(sol);
      } catch (const std::exception& e) {
        failures[slot] = std::make_exception_ptr(Error("k = " + std::to_string(k) + ": " + e.what()));
      }
    }
  };

  unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1u, static_cast<unsigned>(count));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  PersistenceProfile p = profile_from_betas(options.k_min, std::move(betas));
  p.argmax_cluster = std::move(argmax);
  p.solutions = std::move(solutions);
  return p;
}

int estimate_k(const Dataset& data, const ProfileOptions& options) {
  return persistence_profile(data, options).k_t;
}

void write_profile_csv(std::ostream& out, const PersistenceProfile& profile) {
  out << "k,beta_bar,log_beta_bar,v\n";
  char buf[128];
  for (int k = profile.k_min; k <= profile.k_max; ++k) {
    const double b = profile.beta_bar_at(k);
    if (k == profile.k_min) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,\n", k, b, std::log(b));
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", k, b, std::log(b), profile.v_at(k));
    }
    out << buf;
  }
}

nlohmann::json profile_to_json(const PersistenceProfile& profile) {
  nlohmann::json rows = nlohmann::json::array();
  for (int k = profile.k_min; k <= profile.k_max; ++k) {
    const double b = profile.beta_bar_at(k);
    nlohmann::json row = {{"k", k},
                          {"beta_bar", b},
                          {"log_beta_bar", std::log(b)},
                          {"argmax_cluster", profile.argmax_cluster.at(static_cast<std::size_t>(k - profile.k_min))}};
    row["v"] = k == profile.k_min ? nlohmann::json(nullptr) : nlohmann::json(profile.v_at(k));
    rows.push_back(std::move(row));
  }
  return {{"k_min", profile.k_min},
          {"k_max", profile.k_max},
          {"k_t", profile.k_t},
          {"decreasing_at", profile.decreasing_at()},
          {"rows", std::move(rows)}};
}

}  // namespace persist
