#include "persist/annealing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "persist/error.hpp"
#include "persist/rng.hpp"

namespace persist::annealing {
namespace {

Matrix squared_distances(const Dataset& data, const Matrix& centroids) {
  if (centroids.cols() != data.dim()) throw Error("centroid dimension does not match dataset");
  if (centroids.rows() == 0) throw Error("need at least one centroid");
  Matrix d(data.size(), centroids.rows());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < centroids.rows(); ++j) {
      d(i, j) = squared_distance(data.point(i), centroids.row(j));
    }
  }
  return d;
}

std::vector<double> weighted_mean(const Dataset& data) {
  std::vector<double> mean(data.dim(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.weights()[i];
    const auto x = data.point(i);
    for (std::size_t a = 0; a < data.dim(); ++a) mean[a] += w * x[a];
  }
  return mean;
}

// Bounding-box diagonal; a cheap stand-in for the diameter.
double extent(const Dataset& data) {
  double s = 0.0;
  for (std::size_t a = 0; a < data.dim(); ++a) {
    double lo = data.point(0)[a];
    double hi = lo;
    for (std::size_t i = 1; i < data.size(); ++i) {
      lo = std::min(lo, data.point(i)[a]);
      hi = std::max(hi, data.point(i)[a]);
    }
    s += (hi - lo) * (hi - lo);
  }
  return std::max(std::sqrt(s), std::numeric_limits<double>::min());
}

}  // namespace

Matrix gibbs_associations(const Dataset& data, const Matrix& centroids, double beta) {
  if (!(beta >= 0.0)) throw Error("beta must be nonnegative");
  Matrix p = squared_distances(data, centroids);
  const std::size_t k = centroids.rows();
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = p.row(i);
    const double nearest = *std::min_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(-beta * (v - nearest));
      total += v;
    }
    for (double& v : row) v /= total;
    (void)k;
  }
  return p;
}

double free_energy(const Dataset& data, const Matrix& centroids, double beta) {
  if (!(beta > 0.0)) throw Error("free energy is undefined for beta <= 0");
  const Matrix d = squared_distances(data, centroids);
  double f = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = d.row(i);
    const double nearest = *std::min_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(-beta * (v - nearest));
    f += data.weights()[i] * (nearest - std::log(total) / beta);
  }
  return f;
}

double distortion(const Dataset& data, const Matrix& centroids) {
  const Matrix d = squared_distances(data, centroids);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = d.row(i);
    s += data.weights()[i] * *std::min_element(row.begin(), row.end());
  }
  return s;
}

FixedPoint da_fixed_point(const Dataset& data, Matrix centroids, double beta, double tol,
                          int max_iter) {
  if (!(beta > 0.0)) throw Error("beta must be positive");
  const std::size_t k = centroids.rows();
  const std::size_t dim = data.dim();
  FixedPoint out;
  Matrix next(k, dim);
  std::vector<double> mass(k);
  for (int iter = 1; iter <= max_iter; ++iter) {
    const Matrix p = gibbs_associations(data, centroids, beta);
    std::fill(next.values().begin(), next.values().end(), 0.0);
    std::fill(mass.begin(), mass.end(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto x = data.point(i);
      const double w = data.weights()[i];
      for (std::size_t j = 0; j < k; ++j) {
        const double m = w * p(i, j);
        mass[j] += m;
        auto y = next.row(j);
        for (std::size_t a = 0; a < dim; ++a) y[a] += m * x[a];
      }
    }
    double movement = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      auto y = next.row(j);
      if (mass[j] > 0.0) {
        for (double& v : y) v /= mass[j];
      } else {
        std::copy_n(centroids.row(j).begin(), dim, y.begin());
      }
      movement = std::max(movement, std::sqrt(squared_distance(y, centroids.row(j))));
    }
    std::swap(centroids, next);
    out.iterations = iter;
    out.movement = movement;
    if (movement < tol) {
      out.centroids = std::move(centroids);
      return out;
    }
  }
  throw ConvergenceError("deterministic annealing fixed point did not converge at beta = " +
                             std::to_string(beta) + " (last movement " +
                             std::to_string(out.movement) + ")",
                         out.movement);
}

SymMatrix posterior_covariance(const Dataset& data, const Matrix& centroids, double beta, int j) {
  if (j < 0 || static_cast<std::size_t>(j) >= centroids.rows()) throw Error("centroid index out of range");
  const Matrix p = gibbs_associations(data, centroids, beta);
  const std::size_t d = data.dim();
  const auto y = centroids.row(static_cast<std::size_t>(j));
  Matrix sum(d, d);
  double mass = 0.0;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double m = data.weights()[i] * p(i, static_cast<std::size_t>(j));
    if (m == 0.0) continue;
    mass += m;
    const auto x = data.point(i);
    for (std::size_t a = 0; a < d; ++a) diff[a] = x[a] - y[a];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b <= a; ++b) sum(a, b) += m * diff[a] * diff[b];
    }
  }
  SymMatrix c(d);
  if (mass <= 0.0) return c;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b <= a; ++b) c.set(a, b, sum(a, b) / mass);
  }
  return c;
}

double first_critical_beta(const Dataset& data) {
  const auto mean = weighted_mean(data);
  const Matrix centroid(1, data.dim(), mean);
  const double lambda = largest_eigenvalue(posterior_covariance(data, centroid, 1.0, 0)).value;
  if (!(lambda > 0.0)) throw Error("dataset has zero spread; no phase transition");
  return 1.0 / (2.0 * lambda);
}

double hessian_quadratic_form(const Dataset& data, const Matrix& centroids, double beta,
                              const Matrix& perturbation) {
  if (perturbation.rows() != centroids.rows() || perturbation.cols() != centroids.cols()) {
    throw Error("perturbation shape must match centroids");
  }
  const std::size_t k = centroids.rows();
  const std::size_t d = data.dim();
  const Matrix p = gibbs_associations(data, centroids, beta);

  double first = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto psi = perturbation.row(j);
    double mass = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) mass += data.weights()[i] * p(i, j);
    if (mass == 0.0) continue;
    const SymMatrix c = posterior_covariance(data, centroids, beta, static_cast<int>(j));
    double quad = dot(psi, psi);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) quad -= 2.0 * beta * psi[a] * c(a, b) * psi[b];
    }
    first += mass * quad;
  }

  double second = 0.0;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.point(i);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto y = centroids.row(j);
      for (std::size_t a = 0; a < d; ++a) diff[a] = x[a] - y[a];
      s += p(i, j) * dot(diff, perturbation.row(j));
    }
    second += data.weights()[i] * s * s;
  }
  return first + 2.0 * beta * second;
}

std::vector<double> geometric_schedule(double beta_start, double beta_end, double ratio) {
  if (!(beta_start > 0.0) || !(beta_end >= beta_start)) throw Error("schedule needs 0 < start <= end");
  if (!(ratio > 1.0)) throw Error("schedule ratio must exceed 1");
  std::vector<double> out;
  for (double b = beta_start; b <= beta_end * (1.0 + 1e-12); b *= ratio) out.push_back(b);
  return out;
}

AnnealTrace anneal(const Dataset& data, std::span<const double> betas, const AnnealOptions& options) {
  for (std::size_t s = 0; s < betas.size(); ++s) {
    if (!(betas[s] > 0.0)) throw Error("schedule values must be positive");
    if (s > 0 && !(betas[s] > betas[s - 1])) throw Error("schedule must be strictly increasing");
  }
  const std::size_t dim = data.dim();
  const double diameter = extent(data);
  const double nudge = options.split_perturbation_scale * diameter;
  const double distinct = options.distinct_tolerance * diameter;
  const double tol = options.fixed_point_tolerance * diameter;
  Rng rng(options.seed);

  Matrix current(1, dim, weighted_mean(data));
  AnnealTrace trace;
  for (double beta : betas) {
    const std::size_t g = current.rows();
    Matrix candidates(2 * g, dim);
    for (std::size_t j = 0; j < g; ++j) {
      const SymMatrix c = posterior_covariance(data, current, beta, static_cast<int>(j));
      std::vector<double> dir = largest_eigenvalue(c).vector;
      // Small seeded jitter so degenerate spectra do not pin the split axis.
      double norm = 0.0;
      for (double& v : dir) {
        v += 1e-3 * rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t a = 0; a < dim; ++a) {
        candidates(2 * j, a) = current(j, a) + nudge * dir[a] / norm;
        candidates(2 * j + 1, a) = current(j, a) - nudge * dir[a] / norm;
      }
    }
    const FixedPoint fp = da_fixed_point(data, std::move(candidates), beta, tol, options.max_iter);

    // Greedy grouping of converged candidates.
    std::vector<int> group(2 * g, -1);
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < 2 * g; ++c) {
      for (std::size_t q = 0; q < groups.size(); ++q) {
        if (std::sqrt(squared_distance(fp.centroids.row(c), fp.centroids.row(groups[q].front()))) <= distinct) {
          group[c] = static_cast<int>(q);
          groups[q].push_back(c);
          break;
        }
      }
      if (group[c] < 0) {
        group[c] = static_cast<int>(groups.size());
        groups.push_back({c});
      }
    }
    Matrix merged(groups.size(), dim);
    for (std::size_t q = 0; q < groups.size(); ++q) {
      for (std::size_t c : groups[q]) {
        for (std::size_t a = 0; a < dim; ++a) merged(q, a) += fp.centroids(c, a);
      }
      for (std::size_t a = 0; a < dim; ++a) merged(q, a) /= static_cast<double>(groups[q].size());
    }
    if (groups.size() > g) {
      for (std::size_t j = 0; j < g; ++j) {
        if (group[2 * j] != group[2 * j + 1]) trace.splits.push_back({beta, static_cast<int>(j)});
      }
    }
    current = std::move(merged);
    trace.steps.push_back({beta, static_cast<int>(current.rows()), free_energy(data, current, beta), current});
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const AnnealTrace& trace) {
  out << "beta,k_distinct,free_energy\n";
  char buf[96];
  for (const auto& s : trace.steps) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g\n", s.beta, s.distinct, s.free_energy);
    out << buf;
  }
}

}  // namespace persist::annealing
