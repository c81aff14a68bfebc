#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "persist/dataset.hpp"
#include "persist/linalg.hpp"
#include "persist/matrix.hpp"

// Deterministic-annealing reference used to check the critical-temperature
// prediction empirically. Nothing in the persistence path depends on it.
namespace persist::annealing {

// p(j|i) = exp(-beta d_ij) / sum_l exp(-beta d_il), rows stable under
// max-subtraction for any beta >= 0.
Matrix gibbs_associations(const Dataset& data, const Matrix& centroids, double beta);

// F = -(1/beta) sum_i p_i log sum_j exp(-beta d_ij).
double free_energy(const Dataset& data, const Matrix& centroids, double beta);

// D = sum_i p_i min_j d_ij at fixed centroids.
double distortion(const Dataset& data, const Matrix& centroids);

struct FixedPoint {
  Matrix centroids;
  int iterations = 0;
  double movement = 0.0;  // max centroid displacement in the last iteration
};

// Iterates y_j <- sum_i p_i p(j|i) x_i / sum_i p_i p(j|i) until the largest
// centroid displacement drops below tol.
FixedPoint da_fixed_point(const Dataset& data, Matrix centroids, double beta, double tol,
                          int max_iter);

// Posterior covariance of centroid j: sum_i p(i|j) (x_i - y_j)(x_i - y_j)^T
// with p(i|j) = p_i p(j|i) / sum_i p_i p(j|i).
SymMatrix posterior_covariance(const Dataset& data, const Matrix& centroids, double beta,
                               int j);

// 1 / (2 lambda_max(C)) with a single centroid at the weighted mean: the
// first bifurcation temperature.
double first_critical_beta(const Dataset& data);

// Half the second directional derivative of F along `perturbation`
// (rows psi_j):
//   sum_j P_j psi_j^T (I - 2 beta C_j) psi_j
//     + 2 beta sum_i p_i (sum_j p(j|i) (x_i - y_j)^T psi_j)^2
// with P_j = sum_i p_i p(j|i). Intended at fixed points of da_fixed_point.
double hessian_quadratic_form(const Dataset& data, const Matrix& centroids, double beta,
                              const Matrix& perturbation);

std::vector<double> geometric_schedule(double beta_start, double beta_end, double ratio = 1.05);

struct AnnealOptions {
  double split_perturbation_scale = 1e-6;  // x data diameter
  double distinct_tolerance = 1e-4;        // x data diameter
  double fixed_point_tolerance = 1e-11;    // x data diameter
  int max_iter = 50000;
  std::uint64_t seed = 0;
};

struct AnnealStep {
  double beta = 0.0;
  int distinct = 0;
  double free_energy = 0.0;
  Matrix centroids;  // distinct centroids after convergence
};

struct SplitEvent {
  double beta = 0.0;
  int cluster = -1;  // index (in the previous step's centroids) that split
};

struct AnnealTrace {
  std::vector<AnnealStep> steps;
  std::vector<SplitEvent> splits;
};

// Sweeps an increasing schedule. At each beta every distinct centroid is
// duplicated and the copies are nudged apart along the top eigenvector of its
// posterior covariance; after the fixed point, copies closer than the
// distinct tolerance are merged back. A split is recorded whenever the
// distinct count grows.
AnnealTrace anneal(const Dataset& data, std::span<const double> betas,
                   const AnnealOptions& options = {});

// Columns beta,k_distinct,free_energy.
void write_trace_csv(std::ostream& out, const AnnealTrace& trace);

}  // namespace persist::annealing
