#pragma once

#include <cstddef>

#include "pvni/types.hpp"

namespace pvni {

/// Interpolated neutral score for one trait, with everything needed to audit it.
struct TraitEstimate {
  Trait trait = Trait::O;
  double s_pos = 0.0;
  double s_neg = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double coef_raw = 0.0;
  double coef = 0.0;
  double s_hat = 0.0;
  VariantKey variant;
};

}  // namespace pvni
