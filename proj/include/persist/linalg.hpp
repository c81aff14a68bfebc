#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "persist/dataset.hpp"
#include "persist/matrix.hpp"

namespace persist {

// Square symmetric matrix. Symmetry is enforced on entry: from_dense() checks
// it and set() writes both triangles.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t order);

  // Throws if `dense` is not square, not finite, or asymmetric beyond 1e-12
  // relative to its largest entry.
  static SymMatrix from_dense(const Matrix& dense);
  static SymMatrix identity(std::size_t order);

  std::size_t order() const { return dense_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return dense_(i, j); }
  void set(std::size_t i, std::size_t j, double value);
  void add_to_diagonal(double value);

  const Matrix& dense() const { return dense_; }

  // Frobenius norm; an upper bound on the spectral norm.
  double frobenius_norm() const;

 private:
  Matrix dense_;
};

// Gram matrix K_ij = phi(x_i)^T phi(x_j).
class KernelMatrix {
 public:
  explicit KernelMatrix(SymMatrix gram) : gram_(std::move(gram)) {}

  std::size_t order() const { return gram_.order(); }
  double operator()(std::size_t i, std::size_t j) const { return gram_(i, j); }
  const SymMatrix& gram() const { return gram_; }

 private:
  SymMatrix gram_;
};

struct EigenPair {
  double value = 0.0;
  std::vector<double> vector;  // unit norm
  double residual = 0.0;       // ||M v - value v||
};

// Full decomposition: values ascending, vectors as the matching columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

// Cyclic Jacobi rotations; intended for small orders (feature dimension).
SymmetricEigen jacobi_eigen(const SymMatrix& m);

// Householder tridiagonalisation followed by implicit QL. Values only,
// ascending.
std::vector<double> symmetric_eigenvalues(const SymMatrix& m);

// Largest eigenvalue and a unit eigenvector with
// ||M v - lambda v|| <= 1e-8 * max(1, ||M||). Small orders use Jacobi; larger
// ones use QL for the value and shifted inverse iteration for the vector.
// Throws ConvergenceError (with the best residual) if the bound is not met.
EigenPair largest_eigenvalue(const SymMatrix& m);

// Unnormalised hard-assignment scatter: sum over members of (x_i - y)(x_i - y)^T.
// `centroid` must be the weighted mean of the members (checked to 1e-9).
SymMatrix scatter_matrix(const Dataset& data, std::span<const int> assignment,
                         std::span<const double> centroid, int cluster);

// Doubly-centred kernel block over `members`:
// A_kl = K_kl - mean_k - mean_l + mean, means over members. A shares its
// nonzero spectrum with the feature-space scatter matrix of the cluster.
SymMatrix kernel_scatter_matrix(const KernelMatrix& kernel, std::span<const std::size_t> members);

// K_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)).
KernelMatrix gaussian_kernel(const Dataset& data, double sigma);

// K = X X^T.
KernelMatrix linear_kernel(const Dataset& data);

}  // namespace persist
