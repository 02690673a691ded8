#include "projive/rank_select.hpp"

#include "projive/linalg.hpp"
#include "projive/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace projive {

namespace {

// Orthonormal basis of the leading principal-component score space of one
// block: right singular vectors of the feature-centered block.
Matrix pc_score_basis(const Matrix& block, int total_rank, int block_index) {
  const Matrix centered = block.colwise() - block.rowwise().mean();
  Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv(total_rank - 1) <= kRankTolerance * sv(0)) {
    throw std::invalid_argument("permutation test: block " + std::to_string(block_index + 1) +
                                " has numerical rank below the requested total rank " +
                                std::to_string(total_rank));
  }
  return svd.matrixV().leftCols(total_rank);
}

Vector canonical_correlations(const Matrix& q1, const Matrix& q2) {
  Eigen::JacobiSVD<Matrix> svd(q1.transpose() * q2);
  Vector cc = svd.singularValues();
  for (Index i = 0; i < cc.size(); ++i) cc(i) = std::clamp(cc(i), 0.0, 1.0);
  return cc;
}

std::string ranks_key(const BlockRanks& ranks) {
  std::ostringstream os;
  os << ranks.joint() << ":";
  for (int k = 0; k < ranks.n_blocks(); ++k) {
    if (k > 0) os << ",";
    os << ranks.indiv(k);
  }
  return os.str();
}

}  // namespace

PermTestResult permutation_joint_rank(const MultiBlockData& data,
                                      std::pair<int, int> total_ranks, int n_perm, double alpha,
                                      std::uint64_t seed) {
  if (data.n_blocks() != 2) {
    throw std::invalid_argument("permutation test: exactly two blocks required");
  }
  const Index n = data.n_subjects();
  if (n < 4) throw std::invalid_argument("permutation test: need at least 4 subjects");
  if (n_perm < 19) throw std::invalid_argument("permutation test: n_perm must be >= 19");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("permutation test: alpha must lie in (0,1)");
  }
  const int t1 = total_ranks.first;
  const int t2 = total_ranks.second;
  for (int k = 0; k < 2; ++k) {
    const int t = k == 0 ? t1 : t2;
    if (t < 1 || t >= std::min<Index>(data.block_dim(k), n)) {
      throw std::invalid_argument("permutation test: total rank of block " +
                                  std::to_string(k + 1) + " must satisfy 1 <= t < min(p, n)");
    }
  }

  const Matrix q1 = pc_score_basis(data.block(0), t1, 0);
  const Matrix q2 = pc_score_basis(data.block(1), t2, 1);
  const Vector observed = canonical_correlations(q1, q2);

  // Null: largest canonical correlation after permuting block 2's subjects.
  // Permuting rows of an orthonormal basis keeps it orthonormal, so no
  // re-orthonormalization is needed.
  RngEngine rng = make_engine(seed);
  std::vector<double> null_stats;
  null_stats.reserve(static_cast<std::size_t>(n_perm));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Matrix q2_perm(q2.rows(), q2.cols());
  for (int b = 0; b < n_perm; ++b) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index i = 0; i < n; ++i) q2_perm.row(i) = q2.row(perm[static_cast<std::size_t>(i)]);
    null_stats.push_back(canonical_correlations(q1, q2_perm)(0));
  }
  std::sort(null_stats.begin(), null_stats.end());

  // (1-alpha)(n_perm+1)-th order statistic, the standard finite-sample
  // permutation threshold; beyond the sample it is +infinity (nothing can
  // be declared significant at this alpha/n_perm combination).
  const int k_order =
      static_cast<int>(std::ceil((1.0 - alpha) * static_cast<double>(n_perm + 1)));
  const double threshold = k_order > n_perm
                               ? std::numeric_limits<double>::infinity()
                               : null_stats[static_cast<std::size_t>(k_order - 1)];

  PermTestResult result;
  result.observed_stats.assign(observed.data(), observed.data() + observed.size());
  result.null_quantiles.assign(result.observed_stats.size(), threshold);
  result.n_permutations = n_perm;
  result.alpha = alpha;
  result.seed = seed;
  for (double stat : result.observed_stats) {
    if (stat > threshold) {
      ++result.selected_r_j;
    } else {
      break;
    }
  }
  return result;
}

IcGrid ic_grid(const MultiBlockData& data, const std::vector<BlockRanks>& candidates,
               const IcGridOptions& options) {
  if (candidates.empty()) throw std::invalid_argument("ic_grid: empty candidate list");
  if (options.init == InitStrategy::Kind::kProvided) {
    throw std::invalid_argument("ic_grid: provided-parameter starts are not meaningful across a "
                                "grid; use cholesky or random_normal");
  }
  IcGrid grid;
  for (const BlockRanks& ranks : candidates) {
    IcEntry entry{ranks, std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN(), false, ""};
    try {
      const std::uint64_t cand_seed = derive_seed(options.seed, fnv1a(ranks_key(ranks)));
      const InitStrategy init = options.init == InitStrategy::Kind::kCholesky
                                    ? InitStrategy::cholesky()
                                    : InitStrategy::random_normal(cand_seed);
      const FitResult fit_result = fit(data, ranks, init, options.noise, options.fit);
      entry.loglik = fit_result.loglik;
      entry.aic = fit_result.aic;
      entry.bic = fit_result.bic;
      entry.converged = fit_result.converged;
    } catch (const std::exception& err) {
      entry.error = err.what();
    }
    grid.entries.push_back(std::move(entry));
  }
  return grid;
}

std::vector<Vector> eigen_spectrum(const MultiBlockData& data) {
  const Index n = data.n_subjects();
  if (n < 2) throw std::invalid_argument("eigen_spectrum: need at least 2 subjects");
  std::vector<Vector> spectra;
  for (int k = 0; k < data.n_blocks(); ++k) {
    const Matrix centered = data.block(k).colwise() - data.block(k).rowwise().mean();
    Eigen::JacobiSVD<Matrix> svd(centered);
    const Index count = std::min<Index>(data.block_dim(k), n - 1);
    Vector eig(count);
    for (Index i = 0; i < count; ++i) {
      const double sv = i < svd.singularValues().size() ? svd.singularValues()(i) : 0.0;
      eig(i) = std::max(sv * sv / static_cast<double>(n - 1), 0.0);
    }
    spectra.push_back(std::move(eig));
  }
  return spectra;
}

}  // namespace projive
