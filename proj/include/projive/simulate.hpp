#pragma once

// Synthetic multi-block data with known joint/individual structure.
//
// The factorial generator builds X_k = d_k J_k + c_k A_k + E_k from
// freshly drawn scores, loadings and noise, then solves for the scale
// constants (d_k, c_k) so that the realized variance-explained fractions
//   R2_Jk = ||d_k J_k||_F^2 / ||X_k||_F^2,
//   R2_Ik = ||c_k A_k||_F^2 / ||X_k||_F^2
// hit their targets; the defining ratios keep the cross-product terms
// (tr(J E^T), tr(A E^T), tr(J A^T)), so the calibration is exact for the
// realized draws, not merely in expectation. A second generator reproduces
// a fixed sparse-loading benchmark design with +-1 scores.

#include "projive/types.hpp"

#include <cstdint>
#include <vector>

namespace projive {

enum class ScoreDist { kGaussian, kMixtureGaussian };
enum class LoadingDist { kGaussian, kRademacher };

// The three-component Gaussian mixture used for joint scores when
// ScoreDist::kMixtureGaussian is selected. Fixed by the benchmark design.
inline constexpr double kMixtureWeights[3] = {0.2, 0.5, 0.3};
inline constexpr double kMixtureMeans[3] = {-4.0, 0.0, 4.0};
inline constexpr double kMixtureSds[3] = {1.0, 1.0, 1.0};

struct SimScenario {
  Index n = 0;                         // subjects
  std::vector<Index> p;                // block feature counts
  int r_j = 0;                         // joint rank
  std::vector<int> r_i;                // individual ranks per block
  std::vector<double> target_r2_joint; // per block, in (0,1)
  std::vector<double> target_r2_indiv; // per block, in (0,1)
  ScoreDist score_dist = ScoreDist::kGaussian;
  LoadingDist loading_dist = LoadingDist::kGaussian;
  // Diagonal scales applied to the raw loading draws; empty selects the
  // defaults (3,2,1) for joint and (2,1) for individual, truncated to the
  // rank in use. Ranks beyond a default's length require explicit scales.
  Vector q_joint;
  Vector q_indiv;
  std::uint64_t seed = 0;

  int n_blocks() const { return static_cast<int>(p.size()); }
  /// Throws std::invalid_argument when any field is out of contract.
  void validate() const;
  /// Scale diagonal for the joint (length r_j) and individual (length
  /// r_i[k]) loadings after applying defaults.
  Vector joint_scales() const;
  Vector indiv_scales(int k) const;
};

/// Realized variance-explained fractions of one block.
struct BlockR2 {
  double joint = 0.0;
  double indiv = 0.0;
};

/// Multipliers in X_k = d * J_k + c * A_k + E_k.
struct ScaleConstants {
  double c = 0.0;
  double d = 0.0;
};

/// A generated dataset together with every ground-truth component.
/// data.block(k) == joint_matrices[k] + indiv_matrices[k] + noise[k]
/// exactly; joint_matrices[k] already carries d_k and indiv_matrices[k]
/// carries c_k.
struct SimTruth {
  MultiBlockData data;
  Matrix joint_scores;                     // n x r_j
  std::vector<Matrix> indiv_scores;        // per block, n x r_ik
  std::vector<Matrix> joint_matrices;      // per block, p_k x n
  std::vector<Matrix> indiv_matrices;      // per block, p_k x n
  std::vector<Matrix> noise;               // per block, p_k x n
  std::vector<BlockR2> achieved_r2;        // recomputed from stored matrices
  std::vector<ScaleConstants> scale_constants;
  SimScenario scenario;                    // factorial targets, or realized
                                           // values for the fixed design
  std::string design = "factorial";        // "factorial" or "feng"
};

/// Draws scores/loadings/noise per the scenario, calibrates (d_k, c_k) so
/// both variance fractions hit their targets within 1e-6, and assembles the
/// blocks. Deterministic in scenario.seed.
SimTruth generate(const SimScenario& scenario);

/// Solves the two variance-fraction equations for positive (d, c) given the
/// realized component matrices, by alternating one-dimensional bisections
/// (each fraction is monotone in its own scale for the other held fixed),
/// up to 200 sweeps at residual tolerance 1e-10. Throws when no positive
/// solution exists in the search box or the plug-back residual exceeds 1e-8,
/// with the quadratic coefficients in the message.
ScaleConstants solve_scale_constants(const Matrix& joint, const Matrix& indiv,
                                     const Matrix& noise, double target_r2_joint,
                                     double target_r2_indiv);

/// Fixed two-block benchmark with piecewise-constant +-1 joint structure:
/// joint scores are -1 on the first half of subjects and +1 on the second;
/// block 1 joint loadings are 0 on the first half of features and 1 on the
/// rest; block 2 joint loadings are 0 on the first 80% and 1 on the rest.
/// Block 1 carries one individual component (+-1 scores on a quarter-wise
/// split, orthogonal to the joint scores at the default n), block 2 carries
/// two Gaussian ones; all individual loadings are exactly orthogonal to
/// their block's joint loadings at the default sizes. Noise is N(0,
/// noise_sd^2). Scale constants are fixed at 1, achieved_r2 reports the
/// realized fractions.
SimTruth generate_feng(Index n = 100, Index p1 = 100, Index p2 = 1000, double noise_sd = 1.0,
                       std::uint64_t seed = 0);

}  // namespace projive
