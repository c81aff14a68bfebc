#include "persist/presets.hpp"

#include <array>

#include "persist/error.hpp"

namespace persist {
namespace {

Matrix isotropic(double sd) { return Matrix{{sd * sd, 0.0}, {0.0, sd * sd}}; }

// Four blobs on the corners of a square with side `spacing`.
Dataset square4(const PresetParams& p, double spacing, double sd, int n_default, const std::string& name) {
  const double h = p.spacing.value_or(spacing) / 2.0;
  const double s = p.sd.value_or(sd);
  const Matrix means{{-h, -h}, {h, -h}, {-h, h}, {h, h}};
  const int n = p.n.value_or(n_default);
  return gen_gaussian_mixture(means, std::vector<Matrix>(4, isotropic(s)), std::vector<int>(4, n), p.seed)
      .renamed(name);
}

// Eight blobs of mixed size, spread and orientation on a 4 x 2 layout.
Dataset combo8(const PresetParams& p) {
  const double c = p.spacing.value_or(10.0) / 10.0;
  const Matrix means{{0, 0}, {10, 0}, {20, 0}, {30, 0}, {0, 12}, {10, 12}, {20, 12}, {30, 12}};
  Matrix scaled = means;
  for (double& v : scaled.values()) v *= c;
  const std::array<double, 8> sd{0.6, 1.0, 1.3, 0.8, 1.1, 0.7, 1.0, 0.9};
  const std::array<double, 8> rho{0.0, 0.5, 0.0, -0.6, 0.3, 0.0, -0.3, 0.0};
  const std::array<double, 8> stretch{1.0, 1.0, 1.6, 1.0, 1.0, 0.6, 1.0, 1.3};
  std::vector<Matrix> covs;
  for (std::size_t j = 0; j < 8; ++j) {
    const double sx = c * sd[j] * stretch[j];
    const double sy = c * sd[j];
    covs.push_back(Matrix{{sx * sx, rho[j] * sx * sy}, {rho[j] * sx * sy, sy * sy}});
  }
  std::vector<int> counts{150, 300, 200, 100, 250, 150, 200, 120};
  if (p.n) counts.assign(8, *p.n);
  return gen_gaussian_mixture(scaled, covs, counts, p.seed).renamed("combo8");
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"gaussians4", "highvar4", "combo8", "supercluster",
                                              "two-disks",  "rings",    "spirals", "grid"};
  return names;
}

Dataset make_preset(const std::string& name, const PresetParams& p) {
  if (name == "gaussians4") return square4(p, 10.0, 1.0, 200, name);
  // Mean gap = 2 sd. Below a few thousand points per blob the k = 3 and
  // k = 4 persistences are within sampling noise of each other.
  if (name == "highvar4") return square4(p, 4.0, 2.0, 5000, name);
  if (name == "combo8") return combo8(p);
  if (name == "supercluster") {
    const double var = p.sub_var.value_or(0.25);
    return gen_supercluster_grid(p.super_spacing.value_or(40.0), p.sub_spacing.value_or(4.0),
                                 Matrix{{var, 0.0}, {0.0, var}}, p.n.value_or(200), p.seed)
        .renamed(name);
  }
  if (name == "two-disks") {
    const double r = p.radius.value_or(1.0);
    return gen_two_disks(r, p.gap.value_or(4.0 * r), p.n.value_or(5000), p.seed).renamed(name);
  }
  if (name == "rings") {
    return gen_rings(p.radii.value_or(std::vector<double>{1.0, 2.0, 3.0}), p.n.value_or(400),
                     p.noise.value_or(0.02), p.seed)
        .renamed(name);
  }
  if (name == "spirals") {
    return gen_spirals(p.arms.value_or(3), p.n.value_or(400), p.noise.value_or(0.01), p.seed)
        .renamed(name);
  }
  if (name == "grid") {
    return gen_gaussian_grid(p.side.value_or(10), p.spacing.value_or(10.0), p.sd.value_or(1.0),
                             p.n.value_or(100), p.seed)
        .renamed(name);
  }
  throw Error("unknown dataset shape '" + name + "'");
}

}  // namespace persist
