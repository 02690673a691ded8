#pragma once

// Rank-selection utilities: a permutation test on the canonical correlations
// of per-block principal-component scores (joint rank of two coupled
// blocks), information-criterion grids over candidate rank combinations,
// and the eigen-spectrum export for scree inspection.

#include "projive/em.hpp"
#include "projive/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace projive {

struct PermTestResult {
  int selected_r_j = 0;
  std::vector<double> observed_stats;   // canonical correlations, non-increasing
  std::vector<double> null_quantiles;   // per component, the acceptance threshold
  int n_permutations = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

/// Permutation test for the number of shared components between two blocks.
///
/// Each block is reduced to its leading principal-component scores at the
/// given total rank; the observed statistics are the canonical correlations
/// between the two score sets. The null distribution is built by permuting
/// the subject order of block 2's scores n_perm times and recording the
/// largest canonical correlation of each permuted pair; every observed
/// correlation is compared against the (1-alpha)(n_perm+1)-th order
/// statistic of that null. Components are accepted sequentially from the
/// first until one fails.
///
/// Requires K = 2, n >= 4, 1 <= total_ranks[k] < min(p_k, n), n_perm >= 19.
PermTestResult permutation_joint_rank(const MultiBlockData& data,
                                      std::pair<int, int> total_ranks, int n_perm = 199,
                                      double alpha = 0.05, std::uint64_t seed = 0);

struct IcEntry {
  BlockRanks ranks;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  std::string error;  // non-empty when the fit threw; criteria are NaN then
};

struct IcGrid {
  std::vector<IcEntry> entries;  // input order
};

struct IcGridOptions {
  InitStrategy::Kind init = InitStrategy::Kind::kCholesky;
  NoiseKind noise = NoiseKind::kIsotropic;
  FitOptions fit;
  std::uint64_t seed = 0;
};

/// Fits every candidate rank combination with identical options and records
/// the information criteria. Each candidate's randomized-start seed is
/// derived from the ranks themselves (not the list position), so the grid
/// is invariant to reordering. Per-candidate failures are recorded in the
/// entry, not thrown.
IcGrid ic_grid(const MultiBlockData& data, const std::vector<BlockRanks>& candidates,
               const IcGridOptions& options = {});

/// Per block, the descending eigenvalues of the sample covariance of the
/// row-centered block (denominator n-1), truncated to the min(p_k, n-1)
/// values that can be nonzero. Requires n >= 2.
std::vector<Vector> eigen_spectrum(const MultiBlockData& data);

}  // namespace projive
