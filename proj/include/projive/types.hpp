#pragma once

// Core containers for multi-block Gaussian latent-variable modelling: coupled
// data blocks sharing a subject dimension, per-block loading/noise parameters,
// and the stacked layout bookkeeping (block-row and score-column selectors)
// that the estimation engine relies on throughout.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace projive {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr const char* kLibraryVersion = "0.1.0";

// Minimum admissible noise variance. Constructing parameters below the floor
// is an error; the estimation loop clamps at the floor and warns instead.
inline constexpr double kVarianceFloor = 1e-12;

// Relative singular-value cutoff used for every "full column rank" /
// numerical-rank decision (scale invariant: sigma_min > tol * sigma_max).
inline constexpr double kRankTolerance = 1e-10;

/// K feature blocks observed on one common set of subjects.
///
/// Block k is stored features x subjects (p_k x n): column i holds subject
/// i's measurements, so stacking the K columns for subject i yields the full
/// observation vector. Most tabular sources are subjects x features; the CSV
/// layer transposes on ingest.
///
/// Immutable after construction; safe to share across threads.
class MultiBlockData {
 public:
  /// Validates: K >= 2, equal column counts, all entries finite.
  explicit MultiBlockData(std::vector<Matrix> blocks,
                          std::vector<std::string> subject_ids = {},
                          std::vector<std::vector<std::string>> feature_names = {});

  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  Index n_subjects() const { return blocks_.front().cols(); }
  Index block_dim(int k) const { return blocks_.at(k).rows(); }
  Index total_dim() const;
  std::vector<Index> dims() const;

  const Matrix& block(int k) const { return blocks_.at(k); }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  /// All blocks stacked into one p_total x n matrix (block rows in order).
  Matrix stacked() const;

  /// Empty when the source carried no identifiers / names.
  const std::vector<std::string>& subject_ids() const { return subject_ids_; }
  const std::vector<std::vector<std::string>>& feature_names() const { return feature_names_; }

 private:
  std::vector<Matrix> blocks_;
  std::vector<std::string> subject_ids_;
  std::vector<std::vector<std::string>> feature_names_;
};

/// Number of joint components shared by all blocks plus per-block individual
/// component counts. Construction checks non-negativity and K >= 2 only; the
/// dimension-dependent condition r_j + r_i[k] < p_k is checked where ranks
/// meet data (validate_against, layout creation, fitting entry points).
class BlockRanks {
 public:
  BlockRanks(int r_j, std::vector<int> r_i);

  int joint() const { return r_j_; }
  int indiv(int k) const { return r_i_.at(k); }
  const std::vector<int>& indiv() const { return r_i_; }
  int n_blocks() const { return static_cast<int>(r_i_.size()); }
  int total() const;

  /// Enforces r_j + r_i[k] < p_k for every block; throws otherwise.
  void validate_against(const std::vector<Index>& block_dims) const;

 private:
  int r_j_;
  std::vector<int> r_i_;
};

enum class NoiseKind { kIsotropic, kDiagonal };

/// Per-block diagonal error covariance D_k: either sigma_k^2 * I or a full
/// positive diagonal. All variances must be >= kVarianceFloor.
class BlockNoise {
 public:
  static BlockNoise isotropic(double sigma2);
  static BlockNoise diagonal(Vector variances);

  NoiseKind kind() const { return kind_; }
  /// Isotropic variance; throws for diagonal noise.
  double sigma2() const;
  /// The length-p diagonal of D_k.
  Vector expand(Index p) const;

 private:
  BlockNoise(NoiseKind kind, Vector var) : kind_(kind), var_(std::move(var)) {}
  NoiseKind kind_;
  Vector var_;  // length 1 (isotropic) or p_k (diagonal)
};

/// Model parameters: per block the joint loadings W_Jk (p_k x r_J), the
/// individual loadings W_Ik (p_k x r_Ik) and the noise D_k. Construction
/// validates shape consistency and the variance floor; the full-column-rank
/// requirement on W_Jk applies to fitting and is checked when a fit starts
/// (degenerate loadings are legitimate values elsewhere, e.g. zero cases).
class ProjiveParams {
 public:
  ProjiveParams(std::vector<Matrix> w_joint, std::vector<Matrix> w_indiv,
                std::vector<BlockNoise> noise);

  int n_blocks() const { return static_cast<int>(w_joint_.size()); }
  Index block_dim(int k) const { return w_joint_.at(k).rows(); }
  std::vector<Index> dims() const;
  int joint_rank() const { return static_cast<int>(w_joint_.front().cols()); }
  int indiv_rank(int k) const { return static_cast<int>(w_indiv_.at(k).cols()); }
  BlockRanks ranks() const;

  const Matrix& w_joint(int k) const { return w_joint_.at(k); }
  const Matrix& w_indiv(int k) const { return w_indiv_.at(k); }
  const BlockNoise& noise(int k) const { return noise_.at(k); }
  const std::vector<Matrix>& w_joint() const { return w_joint_; }
  const std::vector<Matrix>& w_indiv() const { return w_indiv_; }
  const std::vector<BlockNoise>& noise() const { return noise_; }

 private:
  std::vector<Matrix> w_joint_;
  std::vector<Matrix> w_indiv_;
  std::vector<BlockNoise> noise_;
};

/// Offset bookkeeping for the stacked representation.
///
/// Stacked observation vectors order block rows 1..K; latent score vectors
/// order groups (z, b_1, ..., b_K) with the joint scores first. The block
/// selector (rows block_row_offset(k) .. +p_k) realises L_k; the score
/// selector (joint columns plus the block's individual columns) realises
/// M_k, so that theta_ik = M_k theta_i and L_k W = W_k M_k for the assembled
/// loading matrix W.
class StackedLayout {
 public:
  static StackedLayout create(const std::vector<Index>& block_dims, const BlockRanks& ranks);
  static StackedLayout create(const MultiBlockData& data, const BlockRanks& ranks);
  static StackedLayout of(const ProjiveParams& params);

  int n_blocks() const { return static_cast<int>(block_dims_.size()); }
  Index p_total() const { return p_total_; }
  Index r_total() const { return r_total_; }
  Index block_dim(int k) const { return block_dims_.at(k); }
  Index block_row_offset(int k) const { return block_row_offsets_.at(k); }
  int joint_rank() const { return r_j_; }
  int indiv_rank(int k) const { return r_i_.at(k); }
  /// Column where block k's individual score group starts within theta.
  Index indiv_col_offset(int k) const { return indiv_col_offsets_.at(k); }

  /// L_k applied to a stacked matrix: the p_k rows belonging to block k.
  Matrix select_block_rows(const Matrix& stacked, int k) const;

  /// Indices of theta_ik = (z_i, b_ik) within theta_i (M_k as an index set).
  std::vector<Index> score_indices(int k) const;

  /// M_k applied to the columns of an n x r_total score matrix: the columns
  /// holding (z, b_k), joint first.
  Matrix select_score_cols(const Matrix& scores, int k) const;

 private:
  std::vector<Index> block_dims_;
  std::vector<Index> block_row_offsets_;
  std::vector<Index> indiv_col_offsets_;
  std::vector<int> r_i_;
  int r_j_ = 0;
  Index p_total_ = 0;
  Index r_total_ = 0;
};

/// Assembles the block-structured stacked loading matrix W (p_total x
/// r_total): block k's rows are [W_Jk | 0 ... W_Ik ... 0] with the joint
/// columns first, then each block's individual columns in block order.
Matrix assemble_w(const ProjiveParams& params, const StackedLayout& layout);

/// Model covariance C = W W^T + D of the stacked observation vector.
/// Symmetric positive definite; the (k,k') off-diagonal block equals
/// W_Jk W_Jk'^T.
Matrix model_covariance(const ProjiveParams& params);

}  // namespace projive
