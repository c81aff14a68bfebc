#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "persist/annealing.hpp"
#include "persist/clustering.hpp"
#include "persist/dataset.hpp"
#include "persist/error.hpp"
#include "persist/persistence.hpp"

using namespace persist;
using namespace persist::annealing;

namespace {

const Dataset& toy() {
  static const Dataset d(Matrix{{0.0, 0.0}, {0.2, 0.1}, {3.0, 3.0}, {3.1, 2.8}, {-2.0, 4.0}});
  return d;
}

std::vector<double> mean_of(const Dataset& d) {
  std::vector<double> m(d.dim(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t a = 0; a < d.dim(); ++a) m[a] += d.weights()[i] * d.point(i)[a];
  return m;
}

// Weighted covariance about the mean, via Eigen.
Eigen::MatrixXd covariance(const Dataset& d) {
  const Eigen::MatrixXd x = oracle::to_eigen(d.points());
  Eigen::VectorXd w(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) w(i) = d.weights()[i];
  const Eigen::RowVectorXd mean = w.transpose() * x;
  const Eigen::MatrixXd c = x.rowwise() - mean;
  return c.transpose() * w.asDiagonal() * c;
}

Matrix offset(const Matrix& y, const Matrix& dir, double eps) {
  Matrix out = y;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += eps * dir.values()[i];
  return out;
}

}  // namespace

TEST_CASE("gibbs associations") {
  const Matrix y{{0.0, 0.0}, {3.0, 3.0}, {-2.0, 4.0}};
  const Matrix uniform = gibbs_associations(toy(), y, 0.0);
  for (double v : uniform.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
  const Matrix single = gibbs_associations(toy(), Matrix{{1.0, 1.0}}, 5.0);
  for (double v : single.values()) CHECK(v == 1.0);
  const Matrix hard = gibbs_associations(toy(), y, 1e6);
  CHECK(hard(0, 0) == 1.0);
  CHECK(hard(3, 1) == 1.0);
  CHECK(hard(4, 2) == 1.0);
  CHECK(hard(4, 0) == 0.0);
  for (double beta : {0.0, 0.01, 1.0, 100.0, 1e8}) {
    const Matrix p = gibbs_associations(toy(), y, beta);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0.0;
      for (double v : p.row(i)) s += v;
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS(gibbs_associations(toy(), y, -1.0));
}

TEST_CASE("free energy") {
  const Matrix one{{1.0, 1.5}};
  double sum = 0.0;
  for (std::size_t i = 0; i < toy().size(); ++i) sum += toy().weights()[i] * squared_distance(toy().point(i), one.row(0));
  CHECK(free_energy(toy(), one, 2.0) == doctest::Approx(sum).epsilon(1e-14));
  CHECK_THROWS(free_energy(toy(), one, 0.0));

  const Matrix y{{0.1, 0.05}, {3.05, 2.9}, {-2.0, 4.0}};
  const double d = distortion(toy(), y);
  for (double beta : {1.0, 10.0, 100.0}) CHECK(free_energy(toy(), y, beta) <= d);
  CHECK(std::abs(free_energy(toy(), y, 100.0) - d) < 0.05 * d);

  // Shrunk copy, so the gap has not underflowed by beta = 100.
  Matrix small = toy().points();
  for (double& v : small.values()) v *= 0.1;
  Matrix ys = y;
  for (double& v : ys.values()) v *= 0.1;
  const Dataset shrunk(small);
  const double ds = distortion(shrunk, ys);
  double last_gap = INFINITY;
  for (double beta : {1.0, 10.0, 100.0}) {
    const double gap = ds - free_energy(shrunk, ys, beta);
    CHECK(gap >= 0.0);
    CHECK(gap < last_gap);
    last_gap = gap;
  }
  CHECK(last_gap > 0.0);
  // Directly from the definition, no max-subtraction.
  double direct = 0.0;
  for (std::size_t i = 0; i < toy().size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 3; ++j) z += std::exp(-1.0 * squared_distance(toy().point(i), y.row(j)));
    direct -= toy().weights()[i] * std::log(z);
  }
  CHECK(free_energy(toy(), y, 1.0) == doctest::Approx(direct).epsilon(1e-13));
  CHECK(std::isfinite(free_energy(toy(), y, 1e9)));
}

TEST_CASE("fixed point") {
  const auto mean = mean_of(toy());
  SUBCASE("tiny beta collapses to the mean") {
    const FixedPoint fp = da_fixed_point(toy(), Matrix{{5.0, 5.0}, {-3.0, 0.0}, {0.0, 9.0}}, 1e-6, 1e-12, 100000);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t a = 0; a < 2; ++a) CHECK(std::abs(fp.centroids(j, a) - mean[a]) < 1e-4);
  }
  SUBCASE("single centroid lands on the mean in one step") {
    const FixedPoint fp = da_fixed_point(toy(), Matrix{{40.0, -7.0}}, 3.0, 1e-12, 10);
    CHECK(fp.iterations <= 2);
    CHECK(fp.centroids(0, 0) == doctest::Approx(mean[0]).epsilon(1e-14));
    CHECK(fp.centroids(0, 1) == doctest::Approx(mean[1]).epsilon(1e-14));
  }
  SUBCASE("non-convergence reports the residual") {
    try {
      (void)da_fixed_point(toy(), Matrix{{0.0, 0.0}, {3.0, 3.0}}, 1.0, 0.0, 2);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.residual() >= 0.0);
    }
  }
  SUBCASE("free energy does not increase along the iteration") {
    Matrix y{{-1.0, 1.0}, {2.0, 2.0}, {0.5, 3.0}};
    double f = free_energy(toy(), y, 0.7);
    for (int it = 0; it < 50; ++it) {
      y = da_fixed_point(toy(), y, 0.7, std::numeric_limits<double>::infinity(), 1).centroids;
      const double next = free_energy(toy(), y, 0.7);
      CHECK(next <= f + 1e-12);
      f = next;
    }
  }
  SUBCASE("two disks between the first two critical betas") {
    const Dataset d = gen_two_disks(1.0, 4.0, 400, 2);
    // First split near 1/(2 * 4.25), each disk's near 2.
    const FixedPoint fp = da_fixed_point(d, Matrix{{0.1, -0.5}, {-0.1, 0.5}}, 0.6, 1e-10, 100000);
    const ClusteringSolution km = kmeans(d, 2, 5, 0);
    for (std::size_t j = 0; j < 2; ++j) {
      double nearest = INFINITY;
      for (std::size_t l = 0; l < 2; ++l) nearest = std::min(nearest, std::sqrt(squared_distance(fp.centroids.row(j), km.centroids.row(l))));
      CHECK(nearest < 0.15);
    }
  }
}

TEST_CASE("posterior covariance and first critical beta") {
  const Dataset d(oracle::random_points(40, 3, 21), std::nullopt, "", {});
  const Eigen::MatrixXd c = covariance(d);
  const SymMatrix ours = posterior_covariance(d, Matrix(1, 3, mean_of(d)), 1.0, 0);
  CHECK((oracle::to_eigen(ours) - c).norm() < 1e-12 * c.norm());
  CHECK(first_critical_beta(d) == doctest::Approx(1.0 / (2.0 * oracle::lambda_max(c))).epsilon(1e-12));
  CHECK_THROWS(posterior_covariance(d, Matrix(1, 3), 1.0, 1));
}

TEST_CASE("hessian quadratic form") {
  const Matrix y{{0.1, 0.05}, {3.05, 2.9}, {-2.0, 4.0}};
  CHECK(hessian_quadratic_form(toy(), y, 0.8, Matrix(3, 2)) == 0.0);
  const Matrix psi{{0.6, -0.8}, {0.0, 1.0}, {1.0, 0.0}};
  CHECK(hessian_quadratic_form(toy(), y, 1e-9, psi) > 0.0);
  CHECK_THROWS(hessian_quadratic_form(toy(), y, 1.0, Matrix(2, 2)));
}

TEST_CASE("hessian form equals half the second derivative of F") {
  const Dataset d(oracle::random_points(30, 2, 5));
  for (double beta : {0.2, 0.9, 3.0}) {
    const FixedPoint fp = da_fixed_point(d, Matrix{{-1.0, 0.0}, {1.0, 0.2}, {0.0, 1.5}}, beta, 1e-13, 200000);
    const Matrix psi{{0.3, -0.2}, {0.5, 0.9}, {-0.4, 0.1}};
    const double h = 1e-4;
    const double f0 = free_energy(d, fp.centroids, beta);
    const double fp1 = free_energy(d, offset(fp.centroids, psi, h), beta);
    const double fm1 = free_energy(d, offset(fp.centroids, psi, -h), beta);
    const double second = (fp1 - 2.0 * f0 + fm1) / (h * h);
    const double form = hessian_quadratic_form(d, fp.centroids, beta, psi);
    CHECK(form == doctest::Approx(second / 2.0).epsilon(1e-4));
  }
}

TEST_CASE("hessian changes sign at the predicted beta for split perturbations") {
  const Dataset d = gen_two_disks(1.0, 4.0, 500, 3);
  const Eigen::MatrixXd c = covariance(d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  const double predicted = 1.0 / (2.0 * es.eigenvalues()(1));
  const Eigen::VectorXd e = es.eigenvectors().col(1);
  const auto mean = mean_of(d);
  const Matrix y{{mean[0], mean[1]}, {mean[0], mean[1]}};
  const Matrix psi{{e(0), e(1)}, {-e(0), -e(1)}};
  CHECK(hessian_quadratic_form(d, y, 0.9 * predicted, psi) > 0.0);
  CHECK(hessian_quadratic_form(d, y, 1.1 * predicted, psi) < 0.0);
  double lo = 0.5 * predicted;
  double hi = 2.0 * predicted;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (hessian_quadratic_form(d, y, mid, psi) > 0.0 ? lo : hi) = mid;
  }
  CHECK(std::abs(lo - predicted) / predicted < 0.02);
  // The disks' own covariance: orthogonal perturbations stay positive.
  const Matrix side{{es.eigenvectors()(0, 0), es.eigenvectors()(1, 0)}, {-es.eigenvectors()(0, 0), -es.eigenvectors()(1, 0)}};
  CHECK(hessian_quadratic_form(d, y, 1.1 * predicted, side) > 0.0);
}

TEST_CASE("geometric schedule") {
  const auto s = geometric_schedule(1.0, 2.0, 1.05);
  CHECK(s.front() == 1.0);
  CHECK(s.back() <= 2.0);
  CHECK(s.back() * 1.05 > 2.0);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(s[i - 1] * 1.05));
  CHECK_THROWS(geometric_schedule(0.0, 1.0));
  CHECK_THROWS(geometric_schedule(1.0, 2.0, 1.0));
}

TEST_CASE("annealing sweep") {
  const Dataset d = gen_two_disks(1.0, 4.0, 300, 5);
  const double first = first_critical_beta(d);

  SUBCASE("below the first critical beta nothing splits") {
    const auto betas = geometric_schedule(0.1 * first, 0.95 * first, 1.05);
    const AnnealTrace t = anneal(d, betas);
    CHECK(t.splits.empty());
    for (const auto& s : t.steps) CHECK(s.distinct == 1);
  }
  SUBCASE("first split near the prediction, second near the per-disk one") {
    const ClusteringSolution two = kmeans(d, 2, 5, 0);
    // 1 / (2 lambda_max) of each hard cluster's normalised covariance.
    double second = INFINITY;
    for (int j = 0; j < 2; ++j) {
      const auto members = two.members(j);
      const double lam = oracle::lambda_max(oracle::scatter(d.points(), members)) / static_cast<double>(members.size());
      second = std::min(second, 1.0 / (2.0 * lam));
    }
    const auto betas = geometric_schedule(0.5 * first, 1.1 * second, 1.02);
    const AnnealTrace t = anneal(d, betas);
    REQUIRE_FALSE(t.splits.empty());
    CHECK(std::abs(t.splits.front().beta - first) / first < 0.05);
    int before = 0;
    for (const auto& s : t.splits) before += s.beta < 0.9 * second ? 1 : 0;
    CHECK(before == 1);
    for (const auto& s : t.steps) {
      if (s.beta < 0.9 * second && s.beta > 1.05 * first) CHECK(s.distinct == 2);
    }
    CHECK(t.steps.back().distinct > 2);
  }
  SUBCASE("deterministic, with the documented CSV") {
    const auto betas = geometric_schedule(0.5 * first, 2.0 * first, 1.1);
    AnnealOptions o;
    o.seed = 4;
    std::ostringstream a;
    std::ostringstream b;
    write_trace_csv(a, anneal(d, betas, o));
    write_trace_csv(b, anneal(d, betas, o));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("beta,k_distinct,free_energy\n", 0) == 0);
  }
  SUBCASE("schedule checks") {
    const std::vector<double> bad{1.0, 0.5};
    CHECK_THROWS(anneal(d, bad));
    const std::vector<double> zero{0.0, 1.0};
    CHECK_THROWS(anneal(d, zero));
  }
}
