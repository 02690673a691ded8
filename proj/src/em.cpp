#include "projive/em.hpp"

#include "projive/linalg.hpp"
#include "projive/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace projive {

namespace {

// Condition guard for C = W W^T + D, evaluated through the spectral bounds
// min eig(C) >= min_j D_jj and max eig(C) <= sigma_max(W)^2 + max_j D_jj.
// The ratio threshold sits above the double-precision cliff but is loose
// enough that noise variances clamped at the floor remain fittable on
// unit-scale data (a supported scenario: data carrying no noise at all).
constexpr double kCovarianceConditionGuard = 1e-14;

// Per-step tolerance for the required monotone log-likelihood ascent.
constexpr double kMonotonicitySlack = 1e-8;

struct FactorModel {
  Matrix w;          // p x r stacked loadings
  Vector d;          // p, diagonal of D
  Matrix u;          // D^-1 W
  Matrix g;          // (I_r + W^T D^-1 W)^-1 = Cov(theta | x)
  Matrix b;          // C^-1 W = U G
  double log_det_c;  // log |C|
};

Vector expanded_noise(const ProjiveParams& params, const StackedLayout& layout) {
  Vector d(layout.p_total());
  for (int k = 0; k < params.n_blocks(); ++k) {
    d.segment(layout.block_row_offset(k), layout.block_dim(k)) =
        params.noise(k).expand(params.block_dim(k));
  }
  return d;
}

FactorModel build_factor_model(const ProjiveParams& params, const StackedLayout& layout) {
  FactorModel fm;
  fm.w = assemble_w(params, layout);
  fm.d = expanded_noise(params, layout);

  const Index r = fm.w.cols();
  double w_spectral_sq = 0.0;
  if (r > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(fm.w.transpose() * fm.w);
    w_spectral_sq = eig.eigenvalues().maxCoeff();
  }
  const double d_min = fm.d.minCoeff();
  const double d_max = fm.d.maxCoeff();
  if (d_min < kCovarianceConditionGuard * (w_spectral_sq + d_max)) {
    throw std::runtime_error(
        "model covariance is numerically singular (smallest noise variance " +
        std::to_string(d_min) + " against spectral scale " +
        std::to_string(w_spectral_sq + d_max) + ")");
  }

  fm.u = fm.d.cwiseInverse().asDiagonal() * fm.w;
  Matrix phi = Matrix::Identity(r, r) + fm.w.transpose() * fm.u;
  Eigen::LLT<Matrix> llt(phi);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("model covariance is numerically singular (capacitance "
                             "factorization failed)");
  }
  fm.g = llt.solve(Matrix::Identity(r, r));
  fm.g = ((fm.g + fm.g.transpose()) / 2.0).eval();
  fm.b = fm.u * fm.g;

  double log_det_phi = 0.0;
  const Matrix l = llt.matrixL();
  for (Index j = 0; j < r; ++j) log_det_phi += 2.0 * std::log(l(j, j));
  fm.log_det_c = fm.d.array().log().sum() + log_det_phi;
  return fm;
}

// -(n/2){p log 2pi + log|C| + tr(C^-1 S)} given the model pieces, the stacked
// data (p x n), and the posterior score means X^T B (n x r). The trace uses
// the complete-the-square identity x^T C^-1 x = (x - Wm)^T D^-1 (x - Wm) +
// m^T m with m the posterior mean: the residual is formed before dividing by
// the noise variances, so the evaluation stays accurate when variances sit at
// the floor. The direct Woodbury difference tr(D^-1 S) - sum(U .* S B)
// subtracts two terms of order ||S||/min(D) there, and the lost digits are
// large enough to make a genuinely ascending likelihood trace look
// non-monotone.
double log_likelihood_from(const FactorModel& fm, const Matrix& x, const Matrix& scores,
                           Index n) {
  const Matrix resid = x - fm.w * scores.transpose();
  const double tr_cinv_s = ((resid.array().square().rowwise().sum() / fm.d.array()).sum() +
                            scores.squaredNorm()) /
                           static_cast<double>(n);
  const double p_log_2pi = static_cast<double>(fm.d.size()) * std::log(2.0 * std::numbers::pi);
  return -0.5 * static_cast<double>(n) * (p_log_2pi + fm.log_det_c + tr_cinv_s);
}

struct MStepOutcome {
  std::vector<Matrix> w;       // per block, [W_Jk | W_Ik]
  std::vector<Vector> noise;   // per block, updated diagonal (length p_k or 1)
  bool clamped = false;
};

// Closed-form update from the averaged cross-moment psi = (1/n) sum x E(theta^T)
// and score second moment omega = (1/n) sum E(theta theta^T). The noise update
// is evaluated at the fresh loadings (the exact maximizer given them).
MStepOutcome m_step_core(const Matrix& psi_full, const Matrix& omega_full, const Vector& s_diag,
                         const StackedLayout& layout, NoiseKind noise_model) {
  MStepOutcome out;
  for (int k = 0; k < layout.n_blocks(); ++k) {
    const auto idx = layout.score_indices(k);
    const Index rk = static_cast<Index>(idx.size());
    const Index pk = layout.block_dim(k);
    const Index row = layout.block_row_offset(k);

    Matrix psi_k(pk, rk);
    Matrix omega_k(rk, rk);
    for (Index a = 0; a < rk; ++a) {
      psi_k.col(a) = psi_full.block(row, idx[a], pk, 1);
      for (Index b = 0; b < rk; ++b) omega_k(a, b) = omega_full(idx[a], idx[b]);
    }
    omega_k = ((omega_k + omega_k.transpose()) / 2.0).eval();

    Matrix w_k;
    if (rk > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(omega_k);
      const double ev_max = eig.eigenvalues().maxCoeff();
      const double ev_min = eig.eigenvalues().minCoeff();
      if (!(ev_max > 0.0) || ev_min <= 1e-12 * ev_max) {
        throw std::runtime_error(
            "score second moment of block " + std::to_string(k + 1) +
            " is numerically singular; the requested ranks are likely too large for this data "
            "(consider reducing them)");
      }
      w_k = omega_k.ldlt().solve(psi_k.transpose()).transpose();
    } else {
      w_k = Matrix(pk, 0);
    }

    // Residual variance at the fresh loadings:
    // diag(S_kk) + diag(W Omega W^T) - 2 diag(W Psi^T), in per-subject average.
    Vector resid = s_diag.segment(row, pk);
    if (rk > 0) {
      resid += ((w_k * omega_k).array() * w_k.array()).rowwise().sum().matrix();
      resid -= 2.0 * (w_k.array() * psi_k.array()).rowwise().sum().matrix();
    }

    if (noise_model == NoiseKind::kIsotropic) {
      double sigma2 = resid.mean();
      if (sigma2 < kVarianceFloor) {
        sigma2 = kVarianceFloor;
        out.clamped = true;
      }
      Vector v(1);
      v(0) = sigma2;
      out.noise.push_back(std::move(v));
    } else {
      for (Index j = 0; j < pk; ++j) {
        if (resid(j) < kVarianceFloor) {
          resid(j) = kVarianceFloor;
          out.clamped = true;
        }
      }
      out.noise.push_back(std::move(resid));
    }
    out.w.push_back(std::move(w_k));
  }
  return out;
}

ProjiveParams params_from_outcome(const MStepOutcome& outcome, const StackedLayout& layout,
                                  NoiseKind noise_model) {
  std::vector<Matrix> w_joint, w_indiv;
  std::vector<BlockNoise> noise;
  for (int k = 0; k < layout.n_blocks(); ++k) {
    const Matrix& w_k = outcome.w[k];
    w_joint.push_back(w_k.leftCols(layout.joint_rank()));
    w_indiv.push_back(w_k.rightCols(layout.indiv_rank(k)));
    if (noise_model == NoiseKind::kIsotropic) {
      noise.push_back(BlockNoise::isotropic(outcome.noise[k](0)));
    } else {
      noise.push_back(BlockNoise::diagonal(outcome.noise[k]));
    }
  }
  return ProjiveParams(std::move(w_joint), std::move(w_indiv), std::move(noise));
}

void check_consistent(const MultiBlockData& data, const ProjiveParams& params) {
  if (data.n_blocks() != params.n_blocks()) {
    throw std::invalid_argument("data has " + std::to_string(data.n_blocks()) +
                                " blocks, parameters have " + std::to_string(params.n_blocks()));
  }
  for (int k = 0; k < data.n_blocks(); ++k) {
    if (data.block_dim(k) != params.block_dim(k)) {
      throw std::invalid_argument("block " + std::to_string(k + 1) + " has " +
                                  std::to_string(data.block_dim(k)) + " features but parameters "
                                  "expect " + std::to_string(params.block_dim(k)));
    }
  }
}

void require_full_joint_rank(const ProjiveParams& params) {
  for (int k = 0; k < params.n_blocks(); ++k) {
    Eigen::JacobiSVD<Matrix> svd(params.w_joint(k));
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0) || sv(sv.size() - 1) <= kRankTolerance * sv(0)) {
      throw std::invalid_argument("joint loadings of block " + std::to_string(k + 1) +
                                  " are rank deficient; the model requires full joint rank");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// InitStrategy
// ---------------------------------------------------------------------------

InitStrategy InitStrategy::cholesky() { return InitStrategy(Kind::kCholesky); }

InitStrategy InitStrategy::random_normal(std::uint64_t seed) {
  InitStrategy s(Kind::kRandomNormal);
  s.seed_ = seed;
  return s;
}

InitStrategy InitStrategy::provided(ProjiveParams params) {
  InitStrategy s(Kind::kProvided);
  s.params_ = std::move(params);
  return s;
}

const ProjiveParams& InitStrategy::params() const {
  if (!params_) throw std::logic_error("InitStrategy: no provided parameters");
  return *params_;
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

double log_likelihood(const MultiBlockData& data, const ProjiveParams& params) {
  check_consistent(data, params);
  const StackedLayout layout = StackedLayout::of(params);
  const FactorModel fm = build_factor_model(params, layout);
  const Matrix x = data.stacked();
  const Matrix scores = x.transpose() * fm.b;
  return log_likelihood_from(fm, x, scores, data.n_subjects());
}

PosteriorScores e_step(const MultiBlockData& data, const ProjiveParams& params) {
  check_consistent(data, params);
  const StackedLayout layout = StackedLayout::of(params);
  const FactorModel fm = build_factor_model(params, layout);
  PosteriorScores scores;
  scores.mean = data.stacked().transpose() * fm.b;
  scores.cov = fm.g;
  scores.second_moment_sum =
      static_cast<double>(data.n_subjects()) * fm.g + scores.mean.transpose() * scores.mean;
  return scores;
}

ProjiveParams m_step(const MultiBlockData& data, const PosteriorScores& scores,
                     const StackedLayout& layout, NoiseKind noise_model) {
  const Index n = data.n_subjects();
  if (n < 1) throw std::invalid_argument("m_step: need at least one subject");
  if (scores.mean.rows() != n || scores.mean.cols() != layout.r_total()) {
    throw std::invalid_argument("m_step: score means are " + std::to_string(scores.mean.rows()) +
                                "x" + std::to_string(scores.mean.cols()) + ", expected " +
                                std::to_string(n) + "x" + std::to_string(layout.r_total()));
  }
  if (scores.second_moment_sum.rows() != layout.r_total() ||
      scores.second_moment_sum.cols() != layout.r_total()) {
    throw std::invalid_argument("m_step: score second moment has wrong shape");
  }
  if (data.total_dim() != layout.p_total()) {
    throw std::invalid_argument("m_step: layout covers " + std::to_string(layout.p_total()) +
                                " features, data has " + std::to_string(data.total_dim()));
  }
  const Matrix x = data.stacked();
  const Vector s_diag = x.rowwise().squaredNorm() / static_cast<double>(n);
  const Matrix psi_full = (x * scores.mean) / static_cast<double>(n);
  const Matrix omega_full = scores.second_moment_sum / static_cast<double>(n);
  return params_from_outcome(m_step_core(psi_full, omega_full, s_diag, layout, noise_model),
                             layout, noise_model);
}

ProjiveParams initialize(const MultiBlockData& data, const BlockRanks& ranks,
                         const InitStrategy& strategy, NoiseKind noise_model) {
  ranks.validate_against(data.dims());
  const Index n = data.n_subjects();

  if (strategy.kind() == InitStrategy::Kind::kProvided) {
    const ProjiveParams& given = strategy.params();
    check_consistent(data, given);
    if (given.joint_rank() != ranks.joint()) {
      throw std::invalid_argument("initialize: provided parameters have joint rank " +
                                  std::to_string(given.joint_rank()) + ", requested " +
                                  std::to_string(ranks.joint()));
    }
    for (int k = 0; k < given.n_blocks(); ++k) {
      if (given.indiv_rank(k) != ranks.indiv(k)) {
        throw std::invalid_argument("initialize: provided parameters disagree with the "
                                    "requested individual rank of block " + std::to_string(k + 1));
      }
      if (given.noise(k).kind() != noise_model) {
        throw std::invalid_argument("initialize: provided noise of block " +
                                    std::to_string(k + 1) + " does not match the requested "
                                    "noise model");
      }
    }
    return given;
  }

  if (strategy.kind() == InitStrategy::Kind::kCholesky) {
    int max_r_i = 0;
    for (int k = 0; k < ranks.n_blocks(); ++k) max_r_i = std::max(max_r_i, ranks.indiv(k));
    if (n <= ranks.joint() + max_r_i) {
      throw std::invalid_argument("initialize: Cholesky start needs n > r_j + max r_i (n = " +
                                  std::to_string(n) + ")");
    }
  }

  RngEngine rng = make_engine(strategy.seed());
  std::vector<Matrix> w_joint, w_indiv;
  std::vector<BlockNoise> noise;
  for (int k = 0; k < data.n_blocks(); ++k) {
    const Index pk = data.block_dim(k);
    const Matrix& xk = data.block(k);
    Matrix s_k = (xk * xk.transpose()) / static_cast<double>(n);
    s_k = ((s_k + s_k.transpose()) / 2.0).eval();

    // Noise level: average of the eigenvalues beyond the retained rank (the
    // probabilistic-PCA maximum-likelihood estimate).
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s_k);  // ascending eigenvalues
    const Index trailing = pk - ranks.joint() - ranks.indiv(k);
    double sigma2 = eig.eigenvalues().head(trailing).mean();
    if (!(sigma2 >= kVarianceFloor)) sigma2 = kVarianceFloor;

    if (strategy.kind() == InitStrategy::Kind::kCholesky) {
      const Matrix l = psd_cholesky(s_k);
      w_joint.push_back(l.leftCols(ranks.joint()));
      w_indiv.push_back(l.middleCols(ranks.joint(), ranks.indiv(k)));
    } else {
      Matrix wj(pk, ranks.joint()), wi(pk, ranks.indiv(k));
      fill_standard_normal(wj, rng);
      fill_standard_normal(wi, rng);
      w_joint.push_back(std::move(wj));
      w_indiv.push_back(std::move(wi));
    }
    noise.push_back(noise_model == NoiseKind::kIsotropic
                        ? BlockNoise::isotropic(sigma2)
                        : BlockNoise::diagonal(Vector::Constant(pk, sigma2)));
  }
  return ProjiveParams(std::move(w_joint), std::move(w_indiv), std::move(noise));
}

FitResult fit(const MultiBlockData& data, const BlockRanks& ranks, const InitStrategy& strategy,
              NoiseKind noise_model, const FitOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("fit: tol must be positive");
  if (options.max_iters < 1) throw std::invalid_argument("fit: max_iters must be >= 1");
  ranks.validate_against(data.dims());
  if (ranks.joint() < 1) {
    throw std::invalid_argument("fit: the model requires at least one joint component");
  }

  ProjiveParams params = initialize(data, ranks, strategy, noise_model);
  require_full_joint_rank(params);

  const Index n = data.n_subjects();
  const StackedLayout layout = StackedLayout::create(data, ranks);
  const Matrix x = data.stacked();
  const Vector s_diag = x.rowwise().squaredNorm() / static_cast<double>(n);

  if (options.warn) {
    double worst_mean = 0.0;
    for (int k = 0; k < data.n_blocks(); ++k) {
      worst_mean = std::max(worst_mean, data.block(k).rowwise().mean().cwiseAbs().maxCoeff());
    }
    if (worst_mean > 1e-6) {
      std::cerr << "warning: feature means reach " << worst_mean
                << "; the model assumes centered data (see the preprocessing utilities)\n";
    }
  }

  // With more subjects than features it is cheaper to iterate on the p x p
  // second-moment matrix; otherwise stay in the n-sized representation.
  const bool use_gram = data.total_dim() <= n;
  Matrix s;
  if (use_gram) s = (x * x.transpose()) / static_cast<double>(n);

  FitResult result{params, PosteriorScores{}, {}, false, 0, TerminationReason::kMaxIters,
                   0.0, 0.0, 0.0};
  bool clamped_warned = false;

  for (int t = 0;; ++t) {
    const FactorModel fm = build_factor_model(result.params, layout);
    const Matrix scores = x.transpose() * fm.b;  // posterior means, n x r_total
    const Matrix psi =
        use_gram ? Matrix(s * fm.b) : Matrix(x * scores / static_cast<double>(n));
    const double ll = log_likelihood_from(fm, x, scores, n);
    result.loglik_trace.push_back(ll);

    if (t > 0) {
      const double prev = result.loglik_trace[static_cast<std::size_t>(t) - 1];
      const double slack = kMonotonicitySlack * (std::abs(prev) + 1.0);
      if (ll < prev - slack) {
        throw std::runtime_error("log-likelihood decreased from " + std::to_string(prev) +
                                 " to " + std::to_string(ll) + " at sweep " + std::to_string(t) +
                                 "; this indicates an internal numerical fault");
      }
      if (std::abs(ll - prev) / (std::abs(prev) + 1.0) < options.tol) {
        result.converged = true;
        result.termination_reason = TerminationReason::kTolerance;
        result.iterations = t;
      }
    }
    if (t == options.max_iters && !result.converged) {
      result.converged = false;
      result.termination_reason = TerminationReason::kMaxIters;
      result.iterations = options.max_iters;
    }

    if (result.converged || t == options.max_iters) {
      result.loglik = ll;
      result.scores.mean = scores;
      result.scores.cov = fm.g;
      result.scores.second_moment_sum =
          static_cast<double>(n) * fm.g + scores.transpose() * scores;
      break;
    }

    const Matrix omega = fm.g + fm.b.transpose() * psi;
    MStepOutcome outcome = m_step_core(psi, omega, s_diag, layout, noise_model);
    if (outcome.clamped && options.warn && !clamped_warned) {
      std::cerr << "warning: noise variance clamped at the floor " << kVarianceFloor << "\n";
      clamped_warned = true;
    }
    result.params = params_from_outcome(outcome, layout, noise_model);
  }

  int m_params = 0;
  for (int k = 0; k < data.n_blocks(); ++k) {
    m_params += static_cast<int>(data.block_dim(k)) * (ranks.joint() + ranks.indiv(k));
  }
  m_params += (noise_model == NoiseKind::kIsotropic) ? data.n_blocks()
                                                     : static_cast<int>(data.total_dim());
  result.aic = -2.0 * result.loglik + 2.0 * static_cast<double>(m_params);
  result.bic = -2.0 * result.loglik +
               static_cast<double>(m_params) * std::log(static_cast<double>(n));
  return result;
}

ScoreGroups extract_scores(const FitResult& result, const StackedLayout& layout) {
  if (result.scores.mean.cols() != layout.r_total()) {
    throw std::invalid_argument("extract_scores: layout expects " +
                                std::to_string(layout.r_total()) + " score columns, result has " +
                                std::to_string(result.scores.mean.cols()));
  }
  ScoreGroups groups;
  groups.joint = result.scores.mean.leftCols(layout.joint_rank());
  for (int k = 0; k < layout.n_blocks(); ++k) {
    groups.individual.push_back(
        result.scores.mean.middleCols(layout.indiv_col_offset(k), layout.indiv_rank(k)));
  }
  return groups;
}

}  // namespace projive
