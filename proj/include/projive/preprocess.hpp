#pragma once

// Per-feature preparation ahead of model fitting: covariate residualization,
// centering, and unit-variance scaling, with a report that records exactly
// what was removed so the transform can be inverted (and reproduced).

#include "projive/types.hpp"

#include <optional>
#include <vector>

namespace projive {

/// What center_and_scale removed/divided per feature, plus the per-feature
/// regression coefficients when residualization was applied.
struct PreprocessReport {
  std::vector<Vector> means;   // per block, length p_k
  std::vector<Vector> scales;  // per block, length p_k (all 1 when unscaled)
  // Per block, (q+1) x p_k coefficients of the intercept-augmented regression
  // (intercept row first); absent when residualize was not used.
  std::optional<std::vector<Matrix>> covariate_coeffs;
};

/// Removes each feature's mean and, when `scale` is set, divides by its
/// sample standard deviation (divisor n-1). A zero-variance feature with
/// scaling requested is an error naming the feature.
std::pair<MultiBlockData, PreprocessReport> center_and_scale(const MultiBlockData& data,
                                                             bool scale);

/// Undoes center_and_scale: multiplies scales back and restores means.
MultiBlockData invert_center_and_scale(const MultiBlockData& processed,
                                       const PreprocessReport& report);

/// Replaces every feature by its least-squares residual against the
/// intercept-augmented covariate matrix [1 | covariates] (n x q input).
/// When `report` is given, its covariate_coeffs are filled.
MultiBlockData residualize(const MultiBlockData& data, const Matrix& covariates,
                           PreprocessReport* report = nullptr);

}  // namespace projive
