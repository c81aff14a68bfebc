#include "persist/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "persist/error.hpp"
#include "persist/rng.hpp"

namespace persist {
namespace {

// Lower-triangular L with L L^T = a; throws if a is not symmetric positive definite.
Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw Error("covariance must be square");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(a(i, j)), std::abs(a(j, i))});
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) {
        throw Error("covariance is not symmetric");
      }
    }
  }
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw Error("covariance is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

void add_gaussian(Rng& rng, std::span<const double> mean, const Matrix& chol,
                  std::span<double> out) {
  const std::size_t d = mean.size();
  std::vector<double> z(d);
  for (auto& v : z) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    double s = mean[i];
    for (std::size_t k = 0; k <= i; ++k) s += chol(i, k) * z[k];
    out[i] = s;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

}  // namespace

Dataset::Dataset(Matrix points, std::optional<std::vector<int>> labels, std::string name,
                 std::vector<double> weights)
    : points_(std::move(points)),
      weights_(std::move(weights)),
      labels_(std::move(labels)),
      name_(std::move(name)) {
  if (points_.rows() == 0) throw Error("empty dataset");
  if (points_.cols() == 0) throw Error("dataset has no features");
  for (double v : points_.values()) {
    if (!std::isfinite(v)) throw Error("dataset contains NaN or Inf");
  }
  const std::size_t n = points_.rows();
  if (weights_.empty()) {
    weights_.assign(n, 1.0 / static_cast<double>(n));
  } else {
    if (weights_.size() != n) throw Error("weight count does not match point count");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error("weights must be finite and nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("weights must sum to 1");
  }
  if (labels_ && labels_->size() != n) throw Error("label count does not match point count");
}

Dataset Dataset::renamed(std::string name) const {
  Dataset copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

Dataset normalize_zscore(const Dataset& data) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  Matrix out = data.points();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += out(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out(i, j) -= mean;
      ss += out(i, j) * out(i, j);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    // A column is constant when its spread is at rounding level of its values.
    const double scale = std::max(1.0, std::abs(mean));
    if (sd <= 1e-12 * scale) {
      for (std::size_t i = 0; i < n; ++i) out(i, j) = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) out(i, j) /= sd;
    // One refinement pass removes the residual rounding in mean and sd.
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) m2 += out(i, j);
    m2 /= static_cast<double>(n);
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out(i, j) -= m2;
      s2 += out(i, j) * out(i, j);
    }
    const double sd2 = std::sqrt(s2 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) out(i, j) /= sd2;
  }
  return Dataset(std::move(out), data.labels(), data.name(),
                 std::vector<double>(data.weights().begin(), data.weights().end()));
}

Dataset gen_gaussian_mixture(const Matrix& means, const std::vector<Matrix>& covariances,
                             const std::vector<int>& counts, std::uint64_t seed) {
  const std::size_t k = means.rows();
  const std::size_t d = means.cols();
  if (k == 0 || d == 0) throw Error("gaussian mixture needs at least one component");
  if (covariances.size() != k || counts.size() != k) {
    throw Error("gaussian mixture: means, covariances and counts disagree in length");
  }
  std::vector<Matrix> factors;
  factors.reserve(k);
  for (const auto& cov : covariances) {
    if (cov.rows() != d || cov.cols() != d) throw Error("covariance has wrong dimension");
    factors.push_back(cholesky(cov));
  }
  std::size_t total = 0;
  for (int c : counts) {
    if (c <= 0) throw Error("gaussian mixture: component counts must be positive");
    total += static_cast<std::size_t>(c);
  }
  Rng rng(seed);
  Matrix points(total, d);
  std::vector<int> labels;
  labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (int i = 0; i < counts[c]; ++i, ++row) {
      add_gaussian(rng, means.row(c), factors[c], points.row(row));
      labels.push_back(static_cast<int>(c));
    }
  }
  return Dataset(std::move(points), std::move(labels), "gaussian-mixture");
}

Dataset gen_two_disks(double radius, double center_gap, int n_per_disk, std::uint64_t seed) {
  if (!(radius > 0.0) || !(center_gap > 0.0)) throw Error("two disks: radius and gap must be positive");
  if (n_per_disk < 1) throw Error("two disks: need at least one point per disk");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(n_per_disk);
  Matrix points(2 * n, 2);
  std::vector<int> labels(2 * n);
  for (std::size_t disk = 0; disk < 2; ++disk) {
    const double cy = disk == 0 ? -center_gap / 2.0 : center_gap / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = radius * std::sqrt(rng.uniform());
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const std::size_t row = disk * n + i;
      points(row, 0) = r * std::cos(theta);
      points(row, 1) = cy + r * std::sin(theta);
      labels[row] = static_cast<int>(disk);
    }
  }
  return Dataset(std::move(points), std::move(labels), "two-disks");
}

Dataset gen_supercluster_grid(double super_spacing, double sub_spacing, const Matrix& sub_cov,
                              int n_per_sub, std::uint64_t seed) {
  if (!(sub_spacing > 0.0) || !(super_spacing > sub_spacing)) {
    throw Error("supercluster grid: need super_spacing > sub_spacing > 0");
  }
  if (n_per_sub < 1) throw Error("supercluster grid: need at least one point per blob");
  if (sub_cov.rows() != 2 || sub_cov.cols() != 2) throw Error("supercluster grid is 2-d");
  // Unit-circumradius equilateral triangle; side = sqrt(3).
  const double pi = std::numbers::pi;
  auto vertex = [pi](int t, double side, double phase) {
    const double radius = side / std::sqrt(3.0);
    const double a = phase + 2.0 * pi * t / 3.0;
    return std::pair{radius * std::cos(a), radius * std::sin(a)};
  };
  Matrix means(9, 2);
  for (int g = 0; g < 3; ++g) {
    const auto [gx, gy] = vertex(g, super_spacing, pi / 2.0);
    for (int m = 0; m < 3; ++m) {
      const auto [mx, my] = vertex(m, sub_spacing, pi / 2.0);
      means(3 * g + m, 0) = gx + mx;
      means(3 * g + m, 1) = gy + my;
    }
  }
  Dataset mixture = gen_gaussian_mixture(means, std::vector<Matrix>(9, sub_cov),
                                         std::vector<int>(9, n_per_sub), seed);
  return mixture.renamed("supercluster-grid");
}

Dataset gen_rings(const std::vector<double>& radii, int n_per_ring, double noise_sd,
                  std::uint64_t seed) {
  if (radii.empty()) throw Error("rings: need at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw Error("rings: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw Error("rings: radii must be strictly increasing");
  }
  if (n_per_ring < 1) throw Error("rings: need at least one point per ring");
  if (!(noise_sd >= 0.0)) throw Error("rings: noise must be nonnegative");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(n_per_ring);
  Matrix points(radii.size() * n, 2);
  std::vector<int> labels(points.rows());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const std::size_t row = r * n + i;
      points(row, 0) = radii[r] * std::cos(theta);
      points(row, 1) = radii[r] * std::sin(theta);
      if (noise_sd > 0.0) {
        points(row, 0) += noise_sd * rng.normal();
        points(row, 1) += noise_sd * rng.normal();
      }
      labels[row] = static_cast<int>(r);
    }
  }
  return Dataset(std::move(points), std::move(labels), "rings");
}

Dataset gen_spirals(int n_arms, int n_per_arm, double noise_sd, std::uint64_t seed) {
  if (n_arms < 1) throw Error("spirals: need at least one arm");
  if (n_per_arm < 1) throw Error("spirals: need at least one point per arm");
  if (!(noise_sd >= 0.0)) throw Error("spirals: noise must be nonnegative");
  constexpr double kTurns = 1.5;
  constexpr double kInner = 0.2;
  constexpr double kOuter = 1.2;
  Rng rng(seed);
  const auto arms = static_cast<std::size_t>(n_arms);
  const auto n = static_cast<std::size_t>(n_per_arm);
  Matrix points(arms * n, 2);
  std::vector<int> labels(points.rows());
  for (std::size_t a = 0; a < arms; ++a) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(arms);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = rng.uniform();
      const double r = kInner + (kOuter - kInner) * t;
      const double theta = phase + 2.0 * std::numbers::pi * kTurns * t;
      const std::size_t row = a * n + i;
      points(row, 0) = r * std::cos(theta);
      points(row, 1) = r * std::sin(theta);
      if (noise_sd > 0.0) {
        points(row, 0) += noise_sd * rng.normal();
        points(row, 1) += noise_sd * rng.normal();
      }
      labels[row] = static_cast<int>(a);
    }
  }
  return Dataset(std::move(points), std::move(labels), "spirals");
}

Dataset gen_gaussian_grid(int side, double spacing, double sd, int n_per_blob,
                          std::uint64_t seed) {
  if (side < 1 || n_per_blob < 1) throw Error("gaussian grid: side and count must be positive");
  if (!(spacing > 0.0) || !(sd > 0.0)) throw Error("gaussian grid: spacing and sd must be positive");
  const auto blobs = static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  Matrix means(blobs, 2);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      means(static_cast<std::size_t>(r * side + c), 0) = spacing * c;
      means(static_cast<std::size_t>(r * side + c), 1) = spacing * r;
    }
  }
  const Matrix cov{{sd * sd, 0.0}, {0.0, sd * sd}};
  return gen_gaussian_mixture(means, std::vector<Matrix>(blobs, cov),
                              std::vector<int>(blobs, n_per_blob), seed)
      .renamed("gaussian-grid");
}

Dataset parse_csv(std::istream& in, const CsvOptions& options, std::string name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<int> labels;
  bool header_pending = options.has_header;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      width = split_commas(line).size();
      continue;
    }
    const auto cells = split_commas(line);
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                           " columns, found " + std::to_string(cells.size()),
                       line_no, std::min(cells.size(), width) + 1);
    }
    if (options.label_column && *options.label_column >= width) {
      throw ParseError("label column " + std::to_string(*options.label_column + 1) +
                           " is out of range for " + std::to_string(width) + " columns",
                       line_no, *options.label_column + 1);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw ParseError("row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             ": non-numeric value '" + std::string(cells[c]) + "'",
                         line_no, c + 1);
      }
      if (options.label_column && c == *options.label_column) {
        if (v != std::floor(v) || std::abs(v) > 1e9) {
          throw ParseError("row " + std::to_string(line_no) + ", column " +
                               std::to_string(c + 1) + ": label is not an integer",
                           line_no, c + 1);
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("empty file: no data rows", line_no, 0);
  const std::size_t d = width - (options.label_column ? 1 : 0);
  if (d == 0) throw ParseError("no feature columns besides the label", 1, 1);
  std::optional<std::vector<int>> maybe_labels;
  if (options.label_column) maybe_labels = std::move(labels);
  return Dataset(Matrix(rows, d, std::move(values)), std::move(maybe_labels), std::move(name));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_csv(in, options, path.stem().string());
}

void write_csv(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.dim();
  for (std::size_t j = 0; j < d; ++j) out << (j ? ",x" : "x") << j + 1;
  if (data.labels()) out << ",label";
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.points()(i, j));
      if (j) out << ',';
      out << buf;
    }
    if (data.labels()) out << ',' << (*data.labels())[i];
    out << '\n';
  }
}

}  // namespace persist
