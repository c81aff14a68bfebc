#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "persist/dataset.hpp"

namespace persist {

// Overrides for the named synthetic datasets; unset fields take the preset's
// default.
struct PresetParams {
  std::optional<int> n;  // points per component
  std::optional<double> radius;
  std::optional<double> gap;
  std::optional<std::vector<double>> radii;
  std::optional<double> noise;
  std::optional<int> arms;
  std::optional<double> super_spacing;
  std::optional<double> sub_spacing;
  std::optional<double> sub_var;
  std::optional<int> side;
  std::optional<double> spacing;
  std::optional<double> sd;
  std::uint64_t seed = 0;
};

const std::vector<std::string>& preset_names();

// Throws Error for an unknown name.
Dataset make_preset(const std::string& name, const PresetParams& params);

}  // namespace persist
