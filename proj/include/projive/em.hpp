#pragma once

// Maximum-likelihood estimation of the multi-block latent-variable model
//
//   x_ik = W_Jk z_i + W_Ik b_ik + eps_ik,   theta_i = (z_i, b_i1..b_iK) ~ N(0, I),
//   eps_ik ~ N(0, D_k),
//
// by expectation-maximization on the stacked representation x_i = W theta_i
// + eps_i with C = W W^T + D. Provides the observed-data log-likelihood, the
// conditional score moments (E-step), the closed-form loading/noise updates
// (M-step), initialization strategies, and the outer fitting loop with
// convergence control and information criteria.

#include "projive/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace projive {

/// Conditional moments of the latent scores given the data.
/// The conditional covariance does not depend on the observation, so one
/// r x r matrix serves all subjects.
struct PosteriorScores {
  Matrix mean;               // n x r_total, row i = E(theta_i | x_i)
  Matrix cov;                // r_total x r_total, Cov(theta_i | x_i)
  Matrix second_moment_sum;  // sum_i E(theta_i theta_i^T | x_i) = n*cov + mean^T mean
};

enum class TerminationReason { kTolerance, kMaxIters };

struct FitResult {
  ProjiveParams params;
  PosteriorScores scores;
  // loglik_trace[t] is the log-likelihood after t update sweeps; entry 0 is
  // the likelihood of the initial parameters, so the trace holds
  // iterations + 1 values.
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
  TerminationReason termination_reason = TerminationReason::kMaxIters;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

/// How the loadings (and the initial noise level) are chosen before the
/// first update sweep.
class InitStrategy {
 public:
  enum class Kind {
    kCholesky,      // leading columns of each block's sample-covariance factor
    kRandomNormal,  // seeded standard-normal loading entries
    kProvided,      // caller-supplied parameters used verbatim
  };

  static InitStrategy cholesky();
  static InitStrategy random_normal(std::uint64_t seed);
  static InitStrategy provided(ProjiveParams params);

  Kind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  const ProjiveParams& params() const;

 private:
  explicit InitStrategy(Kind kind) : kind_(kind) {}
  Kind kind_;
  std::uint64_t seed_ = 0;
  std::optional<ProjiveParams> params_;
};

struct FitOptions {
  double tol = 1e-8;     // relative log-likelihood change declaring convergence
  int max_iters = 5000;  // update sweeps before giving up
  bool warn = true;      // print data-hygiene / clamping warnings to stderr
};

/// Observed-data log-likelihood -(n/2){log|2 pi C| + tr(C^-1 S)} with
/// S = (1/n) sum_i x_i x_i^T. Computed through the diagonal-plus-low-rank
/// structure of C, so it stays cheap when p is large; errors when C is
/// numerically singular (conditioning estimated from spectral bounds).
double log_likelihood(const MultiBlockData& data, const ProjiveParams& params);

/// Conditional score moments: mean row i = (W^T C^-1 x_i)^T and
/// cov = I - W^T C^-1 W.
PosteriorScores e_step(const MultiBlockData& data, const ProjiveParams& params);

/// Closed-form parameter update from supplied moments: per block,
/// W~_k = (sum_i x_ik E(theta_ik^T)) (sum_i E(theta_ik theta_ik^T))^-1, and
/// the diagonal (or trace-averaged isotropic) noise update evaluated at the
/// fresh W~_k. Noise variances are clamped at the variance floor.
ProjiveParams m_step(const MultiBlockData& data, const PosteriorScores& scores,
                     const StackedLayout& layout, NoiseKind noise_model);

/// Starting parameters. All strategies set the noise level to the block's
/// trailing-eigenvalue average (the probabilistic-PCA noise estimate at the
/// requested ranks).
ProjiveParams initialize(const MultiBlockData& data, const BlockRanks& ranks,
                         const InitStrategy& strategy, NoiseKind noise_model);

/// Full estimation loop: initialize, then alternate E/M sweeps until the
/// relative log-likelihood change drops below tol or max_iters is reached.
/// A log-likelihood decrease beyond slack 1e-8*(|value|+1) aborts with an
/// error (it would indicate an implementation bug, not a data problem).
FitResult fit(const MultiBlockData& data, const BlockRanks& ranks, const InitStrategy& strategy,
              NoiseKind noise_model, const FitOptions& options = {});

/// Posterior score matrix split into its named groups.
struct ScoreGroups {
  Matrix joint;                    // n x r_J
  std::vector<Matrix> individual;  // per block, n x r_Ik
};

/// Slices PosteriorScores.mean into (joint, individual-per-block) groups;
/// concatenating the groups in canonical order reproduces mean exactly.
ScoreGroups extract_scores(const FitResult& result, const StackedLayout& layout);

}  // namespace projive
