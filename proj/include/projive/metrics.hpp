#pragma once

// Subspace-recovery scoring: the scaled chordal distance between column
// spaces, variance-explained summaries of a ground-truth decomposition, and
// the bundled truth-vs-estimate recovery report.

#include "projive/em.hpp"
#include "projive/simulate.hpp"
#include "projive/types.hpp"

#include <vector>

namespace projive {

/// Scaled chordal distance between the column spaces of f1 and f2:
/// sqrt(sum_m sin^2 theta_m) / q over the principal angles theta_m, with
/// q = min(numerical rank f1, numerical rank f2). 0 means equal subspaces;
/// the value is invariant to invertible column transforms of either
/// argument and symmetric in its arguments. Throws on a zero/empty matrix.
double chordal_norm(const Matrix& f1, const Matrix& f2);

/// Frobenius variance fractions of each block recomputed from the stored
/// truth components: joint = ||J_k||^2/||X_k||^2, indiv = ||A_k||^2/||X_k||^2.
/// Throws when a block of the data has zero norm.
std::vector<BlockR2> variance_explained(const SimTruth& truth);

/// Chordal distances between estimated and true subspaces; entries whose
/// truth or estimate has zero rank are NaN (not applicable).
struct RecoveryReport {
  double joint_score_dist = 0.0;
  std::vector<double> joint_load_dist;   // per block
  std::vector<double> indiv_score_dist;  // per block
  std::vector<double> indiv_load_dist;   // per block
};

/// Compares a fit against the generating truth. Ranks may differ between
/// the two; each distance uses the min-rank convention of chordal_norm.
RecoveryReport score_recovery(const FitResult& result, const SimTruth& truth);

}  // namespace projive
