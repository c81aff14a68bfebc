#include "persist/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "persist/error.hpp"

namespace persist {
namespace {

constexpr std::size_t kJacobiMaxOrder = 64;

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s = std::max(s, std::abs(v));
  return s;
}

// y = M x
void multiply(const SymMatrix& m, std::span<const double> x, std::span<double> y) {
  const std::size_t n = m.order();
  for (std::size_t i = 0; i < n; ++i) y[i] = dot(m.dense().row(i), x);
}

double normalize(std::span<double> v) {
  const double norm = std::sqrt(dot(v, v));
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return norm;
}

double residual_norm(const SymMatrix& m, std::span<const double> v, double lambda) {
  std::vector<double> mv(v.size());
  multiply(m, v, mv);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = mv[i] - lambda * v[i];
    s += t * t;
  }
  return std::sqrt(s);
}

// In-place Cholesky of a row-major SPD matrix (lower triangle). False if a
// pivot is not positive.
bool cholesky_in_place(Matrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    auto rj = a.row(j);
    double diag = rj[j];
    for (std::size_t k = 0; k < j; ++k) diag -= rj[k] * rj[k];
    if (!(diag > 0.0)) return false;
    const double ljj = std::sqrt(diag);
    rj[j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      auto ri = a.row(i);
      double s = ri[j];
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      ri[j] = s / ljj;
    }
  }
  return true;
}

// Solve L L^T x = b in place.
void cholesky_solve(const Matrix& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = l.row(i);
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= ri[k] * b[k];
    b[i] = s / ri[i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s / l(i, i);
  }
}

EigenPair top_pair_by_inverse_iteration(const SymMatrix& m, double lambda) {
  const std::size_t n = m.order();
  const double scale = std::max(1.0, m.frobenius_norm());
  const double tolerance = 1e-8 * scale;

  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Deterministic start: all ones with a small ramp so it is not orthogonal
    // to an eigenvector that happens to sum to zero.
    v[i] = 1.0 + 1e-3 * static_cast<double>(i + 1) / static_cast<double>(n);
  }
  normalize(v);

  double best_residual = std::numeric_limits<double>::infinity();
  EigenPair best;
  for (double shift = 1e-10 * scale; shift <= 1e-4 * scale; shift *= 10.0) {
    Matrix factor = m.dense();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) factor(i, j) = -factor(i, j);
      factor(i, i) += lambda + shift;
    }
    if (!cholesky_in_place(factor)) continue;
    std::vector<double> x = v;
    for (int iter = 0; iter < 50; ++iter) {
      cholesky_solve(factor, x);
      if (normalize(x) == 0.0) break;
      std::vector<double> mx(n);
      multiply(m, x, mx);
      const double rq = dot(x, mx);
      const double res = residual_norm(m, x, rq);
      if (res < best_residual) {
        best_residual = res;
        best.value = rq;
        best.vector = x;
        best.residual = res;
      }
      if (res <= tolerance) return best;
    }
  }
  throw ConvergenceError("largest eigenvalue: inverse iteration did not converge (residual " +
                             std::to_string(best_residual) + ")",
                         best_residual);
}

}  // namespace

SymMatrix::SymMatrix(std::size_t order) : dense_(order, order) {}

SymMatrix SymMatrix::from_dense(const Matrix& dense) {
  if (dense.rows() != dense.cols()) throw Error("matrix is not square");
  for (double v : dense.values()) {
    if (!std::isfinite(v)) throw Error("matrix contains NaN or Inf");
  }
  const double tol = 1e-12 * std::max(1.0, max_abs(dense));
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(dense(i, j) - dense(j, i)) > tol) throw Error("matrix is not symmetric");
    }
  }
  SymMatrix m;
  m.dense_ = dense;
  // Exact symmetry from here on.
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (dense(i, j) + dense(j, i));
      m.dense_(i, j) = avg;
      m.dense_(j, i) = avg;
    }
  }
  return m;
}

SymMatrix SymMatrix::identity(std::size_t order) {
  SymMatrix m(order);
  m.add_to_diagonal(1.0);
  return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
  dense_(i, j) = value;
  dense_(j, i) = value;
}

void SymMatrix::add_to_diagonal(double value) {
  for (std::size_t i = 0; i < order(); ++i) dense_(i, i) += value;
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : dense_.values()) s += v * v;
  return std::sqrt(s);
}

SymmetricEigen jacobi_eigen(const SymMatrix& m) {
  const std::size_t n = m.order();
  Matrix a = m.dense();
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  const double norm = std::max(m.frobenius_norm(), std::numeric_limits<double>::min());
  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * norm) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == kMaxSweeps) throw ConvergenceError("jacobi: sweep limit reached", 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

std::vector<double> symmetric_eigenvalues(const SymMatrix& m) {
  const std::size_t n = m.order();
  if (n == 0) return {};
  Matrix a = m.dense();
  std::vector<double> diag(n), off(n, 0.0);

  // Householder reduction to tridiagonal form; off[k] couples k and k+1.
  std::vector<double> v(n), w(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) {
      off[k] = 0.0;
      continue;
    }
    const double x0 = a(k + 1, k);
    if (x0 > 0.0) alpha = -alpha;
    // v = x - alpha e1
    for (std::size_t i = 0; i < len; ++i) v[i] = a(k + 1 + i, k);
    v[0] -= alpha;
    double vv = 0.0;
    for (std::size_t i = 0; i < len; ++i) vv += v[i] * v[i];
    off[k] = alpha;
    if (vv == 0.0) continue;
    const double beta = 2.0 / vv;
    // w = beta A v on the trailing block
    for (std::size_t i = 0; i < len; ++i) {
      const auto row = a.row(k + 1 + i).subspan(k + 1, len);
      double s = 0.0;
      for (std::size_t j = 0; j < len; ++j) s += row[j] * v[j];
      w[i] = beta * s;
    }
    double wv = 0.0;
    for (std::size_t i = 0; i < len; ++i) wv += w[i] * v[i];
    const double kcoef = 0.5 * beta * wv;
    for (std::size_t i = 0; i < len; ++i) w[i] -= kcoef * v[i];
    for (std::size_t i = 0; i < len; ++i) {
      auto row = a.row(k + 1 + i).subspan(k + 1, len);
      const double vi = v[i];
      const double wi = w[i];
      for (std::size_t j = 0; j < len; ++j) row[j] -= vi * w[j] + wi * v[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  if (n >= 2) off[n - 2] = a(n - 1, n - 2);
  off[n - 1] = 0.0;

  // Implicit QL with Wilkinson-style shifts.
  constexpr int kMaxIter = 60;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t mm;
    do {
      for (mm = l; mm + 1 < n; ++mm) {
        const double dd = std::abs(diag[mm]) + std::abs(diag[mm + 1]);
        if (std::abs(off[mm]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (mm != l) {
        if (iter++ == kMaxIter) throw ConvergenceError("tridiagonal QL did not converge", std::abs(off[l]));
        double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
        double r = std::hypot(g, 1.0);
        g = diag[mm] - diag[l] + off[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t ii = mm; ii-- > l;) {
          double f = s * off[ii];
          const double b = c * off[ii];
          r = std::hypot(f, g);
          off[ii + 1] = r;
          if (r == 0.0) {
            diag[ii + 1] -= p;
            off[mm] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = diag[ii + 1] - p;
          r = (diag[ii] - g) * s + 2.0 * c * b;
          p = s * r;
          diag[ii + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        diag[l] -= p;
        off[l] = g;
        off[mm] = 0.0;
      }
    } while (mm != l);
  }
  std::sort(diag.begin(), diag.end());
  return diag;
}

EigenPair largest_eigenvalue(const SymMatrix& m) {
  const std::size_t n = m.order();
  if (n == 0) throw Error("largest eigenvalue of an empty matrix");
  const double tolerance = 1e-8 * std::max(1.0, m.frobenius_norm());
  if (n <= kJacobiMaxOrder) {
    const SymmetricEigen eig = jacobi_eigen(m);
    EigenPair top;
    top.value = eig.values.back();
    top.vector.resize(n);
    for (std::size_t r = 0; r < n; ++r) top.vector[r] = eig.vectors(r, n - 1);
    top.residual = residual_norm(m, top.vector, top.value);
    if (top.residual > tolerance) {
      throw ConvergenceError("largest eigenvalue: residual above tolerance", top.residual);
    }
    return top;
  }
  return top_pair_by_inverse_iteration(m, symmetric_eigenvalues(m).back());
}

SymMatrix scatter_matrix(const Dataset& data, std::span<const int> assignment,
                         std::span<const double> centroid, int cluster) {
  const std::size_t d = data.dim();
  if (assignment.size() != data.size()) throw Error("assignment length does not match dataset");
  if (centroid.size() != d) throw Error("centroid dimension does not match dataset");

  std::vector<double> mean(d, 0.0);
  double mass = 0.0;
  std::size_t count = 0;
  double extent = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (assignment[i] != cluster) continue;
    ++count;
    const double w = data.weights()[i];
    mass += w;
    const auto x = data.point(i);
    for (std::size_t a = 0; a < d; ++a) {
      mean[a] += w * x[a];
      extent = std::max(extent, std::abs(x[a]));
    }
  }
  if (count == 0) throw Error("empty cluster");
  if (mass > 0.0) {
    for (double& m : mean) m /= mass;
    for (std::size_t a = 0; a < d; ++a) {
      if (std::abs(mean[a] - centroid[a]) > 1e-9 * std::max(1.0, extent)) {
        throw Error("centroid does not match the mean of cluster " + std::to_string(cluster));
      }
    }
  }

  Matrix sum(d, d);
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (assignment[i] != cluster) continue;
    const auto x = data.point(i);
    for (std::size_t a = 0; a < d; ++a) diff[a] = x[a] - centroid[a];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b <= a; ++b) sum(a, b) += diff[a] * diff[b];
    }
  }
  SymMatrix out(d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b <= a; ++b) out.set(a, b, sum(a, b));
  }
  return out;
}

SymMatrix kernel_scatter_matrix(const KernelMatrix& kernel, std::span<const std::size_t> members) {
  const std::size_t m = members.size();
  if (m == 0) throw Error("empty cluster");
  std::vector<double> row_mean(m, 0.0);
  double block_mean = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    const auto row = kernel.gram().dense().row(members[a]);
    double s = 0.0;
    for (std::size_t b = 0; b < m; ++b) s += row[members[b]];
    row_mean[a] = s / static_cast<double>(m);
    block_mean += s;
  }
  block_mean /= static_cast<double>(m) * static_cast<double>(m);
  SymMatrix out(m);
  for (std::size_t a = 0; a < m; ++a) {
    const auto row = kernel.gram().dense().row(members[a]);
    for (std::size_t b = 0; b <= a; ++b) {
      out.set(a, b, row[members[b]] - row_mean[a] - row_mean[b] + block_mean);
    }
  }
  return out;
}

KernelMatrix gaussian_kernel(const Dataset& data, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("gaussian kernel: sigma must be positive");
  const std::size_t n = data.size();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  SymMatrix k(n);
  for (std::size_t i = 0; i < n; ++i) {
    k.set(i, i, 1.0);
    for (std::size_t j = 0; j < i; ++j) {
      k.set(i, j, std::exp(-squared_distance(data.point(i), data.point(j)) * inv));
    }
  }
  return KernelMatrix(std::move(k));
}

KernelMatrix linear_kernel(const Dataset& data) {
  const std::size_t n = data.size();
  SymMatrix k(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) k.set(i, j, dot(data.point(i), data.point(j)));
  }
  return KernelMatrix(std::move(k));
}

}  // namespace persist
