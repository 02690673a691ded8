#include "projive/types.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace projive {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

// ---------------------------------------------------------------------------
// MultiBlockData
// ---------------------------------------------------------------------------

MultiBlockData::MultiBlockData(std::vector<Matrix> blocks,
                               std::vector<std::string> subject_ids,
                               std::vector<std::vector<std::string>> feature_names)
    : blocks_(std::move(blocks)),
      subject_ids_(std::move(subject_ids)),
      feature_names_(std::move(feature_names)) {
  if (blocks_.size() < 2) {
    throw std::invalid_argument("MultiBlockData: need at least 2 blocks, got " +
                                std::to_string(blocks_.size()));
  }
  const Index n = blocks_.front().cols();
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (blocks_[k].cols() != n) {
      throw std::invalid_argument("MultiBlockData: block " + std::to_string(k + 1) + " has " +
                                  std::to_string(blocks_[k].cols()) +
                                  " subjects but block 1 has " + std::to_string(n));
    }
    if (blocks_[k].rows() < 1 || n < 1) {
      throw std::invalid_argument("MultiBlockData: block " + std::to_string(k + 1) +
                                  " is empty (" + shape_str(blocks_[k]) + ")");
    }
    if (!blocks_[k].allFinite()) {
      throw std::invalid_argument("MultiBlockData: block " + std::to_string(k + 1) +
                                  " contains non-finite entries");
    }
  }
  if (!subject_ids_.empty() && static_cast<Index>(subject_ids_.size()) != n) {
    throw std::invalid_argument("MultiBlockData: " + std::to_string(subject_ids_.size()) +
                                " subject ids for " + std::to_string(n) + " subjects");
  }
  if (!feature_names_.empty()) {
    if (feature_names_.size() != blocks_.size()) {
      throw std::invalid_argument("MultiBlockData: feature-name lists (" +
                                  std::to_string(feature_names_.size()) + ") != blocks (" +
                                  std::to_string(blocks_.size()) + ")");
    }
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      if (static_cast<Index>(feature_names_[k].size()) != blocks_[k].rows()) {
        throw std::invalid_argument("MultiBlockData: block " + std::to_string(k + 1) + " has " +
                                    std::to_string(feature_names_[k].size()) + " names for " +
                                    std::to_string(blocks_[k].rows()) + " features");
      }
    }
  }
}

Index MultiBlockData::total_dim() const {
  Index p = 0;
  for (const auto& b : blocks_) p += b.rows();
  return p;
}

std::vector<Index> MultiBlockData::dims() const {
  std::vector<Index> d(blocks_.size());
  for (std::size_t k = 0; k < blocks_.size(); ++k) d[k] = blocks_[k].rows();
  return d;
}

Matrix MultiBlockData::stacked() const {
  Matrix x(total_dim(), n_subjects());
  Index row = 0;
  for (const auto& b : blocks_) {
    x.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  return x;
}

// ---------------------------------------------------------------------------
// BlockRanks
// ---------------------------------------------------------------------------

BlockRanks::BlockRanks(int r_j, std::vector<int> r_i) : r_j_(r_j), r_i_(std::move(r_i)) {
  if (r_j_ < 0) throw std::invalid_argument("BlockRanks: joint rank must be >= 0");
  if (r_i_.size() < 2) {
    throw std::invalid_argument("BlockRanks: need individual ranks for at least 2 blocks");
  }
  for (std::size_t k = 0; k < r_i_.size(); ++k) {
    if (r_i_[k] < 0) {
      throw std::invalid_argument("BlockRanks: individual rank of block " +
                                  std::to_string(k + 1) + " must be >= 0");
    }
  }
}

int BlockRanks::total() const {
  return r_j_ + std::accumulate(r_i_.begin(), r_i_.end(), 0);
}

void BlockRanks::validate_against(const std::vector<Index>& block_dims) const {
  if (block_dims.size() != r_i_.size()) {
    throw std::invalid_argument("BlockRanks: " + std::to_string(r_i_.size()) +
                                " rank entries for " + std::to_string(block_dims.size()) +
                                " blocks");
  }
  for (std::size_t k = 0; k < r_i_.size(); ++k) {
    if (static_cast<Index>(r_j_ + r_i_[k]) >= block_dims[k]) {
      throw std::invalid_argument(
          "BlockRanks: block " + std::to_string(k + 1) + " requires r_j + r_i < p (got " +
          std::to_string(r_j_) + " + " + std::to_string(r_i_[k]) + " >= " +
          std::to_string(block_dims[k]) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// BlockNoise
// ---------------------------------------------------------------------------

BlockNoise BlockNoise::isotropic(double sigma2) {
  if (!std::isfinite(sigma2) || sigma2 < kVarianceFloor) {
    throw std::invalid_argument("BlockNoise: isotropic variance " + std::to_string(sigma2) +
                                " below the admissible floor " + std::to_string(kVarianceFloor));
  }
  Vector v(1);
  v(0) = sigma2;
  return BlockNoise(NoiseKind::kIsotropic, std::move(v));
}

BlockNoise BlockNoise::diagonal(Vector variances) {
  if (variances.size() < 1) {
    throw std::invalid_argument("BlockNoise: empty diagonal");
  }
  for (Index j = 0; j < variances.size(); ++j) {
    if (!std::isfinite(variances(j)) || variances(j) < kVarianceFloor) {
      throw std::invalid_argument("BlockNoise: diagonal variance at position " +
                                  std::to_string(j + 1) + " below the admissible floor");
    }
  }
  return BlockNoise(NoiseKind::kDiagonal, std::move(variances));
}

double BlockNoise::sigma2() const {
  if (kind_ != NoiseKind::kIsotropic) {
    throw std::logic_error("BlockNoise: sigma2() called on diagonal noise");
  }
  return var_(0);
}

Vector BlockNoise::expand(Index p) const {
  if (kind_ == NoiseKind::kIsotropic) return Vector::Constant(p, var_(0));
  if (var_.size() != p) {
    throw std::invalid_argument("BlockNoise: diagonal of length " + std::to_string(var_.size()) +
                                " expanded to " + std::to_string(p));
  }
  return var_;
}

// ---------------------------------------------------------------------------
// ProjiveParams
// ---------------------------------------------------------------------------

ProjiveParams::ProjiveParams(std::vector<Matrix> w_joint, std::vector<Matrix> w_indiv,
                             std::vector<BlockNoise> noise)
    : w_joint_(std::move(w_joint)), w_indiv_(std::move(w_indiv)), noise_(std::move(noise)) {
  const std::size_t K = w_joint_.size();
  if (K < 2) throw std::invalid_argument("ProjiveParams: need at least 2 blocks");
  if (w_indiv_.size() != K || noise_.size() != K) {
    throw std::invalid_argument("ProjiveParams: loading/noise lists disagree on block count");
  }
  const Index r_j = w_joint_.front().cols();
  for (std::size_t k = 0; k < K; ++k) {
    const Index p = w_joint_[k].rows();
    if (p < 1) {
      throw std::invalid_argument("ProjiveParams: block " + std::to_string(k + 1) + " is empty");
    }
    if (w_joint_[k].cols() != r_j) {
      throw std::invalid_argument("ProjiveParams: joint loadings of block " +
                                  std::to_string(k + 1) + " have " +
                                  std::to_string(w_joint_[k].cols()) + " columns, expected " +
                                  std::to_string(r_j));
    }
    if (w_indiv_[k].rows() != p) {
      throw std::invalid_argument("ProjiveParams: block " + std::to_string(k + 1) +
                                  " individual loadings are " + shape_str(w_indiv_[k]) +
                                  " but the block has " + std::to_string(p) + " features");
    }
    if (!w_joint_[k].allFinite() || !w_indiv_[k].allFinite()) {
      throw std::invalid_argument("ProjiveParams: block " + std::to_string(k + 1) +
                                  " loadings contain non-finite entries");
    }
    // Validates diagonal length against the block dimension.
    (void)noise_[k].expand(p);
  }
}

std::vector<Index> ProjiveParams::dims() const {
  std::vector<Index> d(w_joint_.size());
  for (std::size_t k = 0; k < w_joint_.size(); ++k) d[k] = w_joint_[k].rows();
  return d;
}

BlockRanks ProjiveParams::ranks() const {
  std::vector<int> r_i(w_indiv_.size());
  for (std::size_t k = 0; k < w_indiv_.size(); ++k) {
    r_i[k] = static_cast<int>(w_indiv_[k].cols());
  }
  return BlockRanks(joint_rank(), std::move(r_i));
}

// ---------------------------------------------------------------------------
// StackedLayout
// ---------------------------------------------------------------------------

StackedLayout StackedLayout::create(const std::vector<Index>& block_dims,
                                    const BlockRanks& ranks) {
  if (block_dims.size() != static_cast<std::size_t>(ranks.n_blocks())) {
    throw std::invalid_argument("StackedLayout: " + std::to_string(block_dims.size()) +
                                " block dims for " + std::to_string(ranks.n_blocks()) +
                                " rank entries");
  }
  StackedLayout layout;
  layout.block_dims_ = block_dims;
  layout.r_j_ = ranks.joint();
  layout.r_i_ = ranks.indiv();
  layout.block_row_offsets_.resize(block_dims.size());
  layout.indiv_col_offsets_.resize(block_dims.size());
  Index row = 0;
  Index col = ranks.joint();
  for (std::size_t k = 0; k < block_dims.size(); ++k) {
    if (block_dims[k] < 1) {
      throw std::invalid_argument("StackedLayout: block " + std::to_string(k + 1) + " is empty");
    }
    layout.block_row_offsets_[k] = row;
    layout.indiv_col_offsets_[k] = col;
    row += block_dims[k];
    col += ranks.indiv(static_cast<int>(k));
  }
  layout.p_total_ = row;
  layout.r_total_ = col;
  return layout;
}

StackedLayout StackedLayout::create(const MultiBlockData& data, const BlockRanks& ranks) {
  return create(data.dims(), ranks);
}

StackedLayout StackedLayout::of(const ProjiveParams& params) {
  return create(params.dims(), params.ranks());
}

Matrix StackedLayout::select_block_rows(const Matrix& stacked, int k) const {
  if (stacked.rows() != p_total_) {
    throw std::invalid_argument("StackedLayout: stacked matrix has " +
                                std::to_string(stacked.rows()) + " rows, layout expects " +
                                std::to_string(p_total_));
  }
  return stacked.middleRows(block_row_offset(k), block_dim(k));
}

std::vector<Index> StackedLayout::score_indices(int k) const {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(r_j_ + indiv_rank(k)));
  for (Index j = 0; j < r_j_; ++j) idx.push_back(j);
  const Index off = indiv_col_offset(k);
  for (Index j = 0; j < indiv_rank(k); ++j) idx.push_back(off + j);
  return idx;
}

Matrix StackedLayout::select_score_cols(const Matrix& scores, int k) const {
  if (scores.cols() != r_total_) {
    throw std::invalid_argument("StackedLayout: score matrix has " +
                                std::to_string(scores.cols()) + " columns, layout expects " +
                                std::to_string(r_total_));
  }
  const auto idx = score_indices(k);
  Matrix out(scores.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Index>(j)) = scores.col(idx[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

Matrix assemble_w(const ProjiveParams& params, const StackedLayout& layout) {
  if (layout.n_blocks() != params.n_blocks() || layout.joint_rank() != params.joint_rank()) {
    throw std::invalid_argument("assemble_w: layout does not match the parameter shapes");
  }
  Matrix w = Matrix::Zero(layout.p_total(), layout.r_total());
  for (int k = 0; k < params.n_blocks(); ++k) {
    if (layout.block_dim(k) != params.block_dim(k) ||
        layout.indiv_rank(k) != params.indiv_rank(k)) {
      throw std::invalid_argument("assemble_w: layout does not match block " +
                                  std::to_string(k + 1));
    }
    const Index row = layout.block_row_offset(k);
    w.block(row, 0, params.block_dim(k), params.joint_rank()) = params.w_joint(k);
    w.block(row, layout.indiv_col_offset(k), params.block_dim(k), params.indiv_rank(k)) =
        params.w_indiv(k);
  }
  return w;
}

Matrix model_covariance(const ProjiveParams& params) {
  const StackedLayout layout = StackedLayout::of(params);
  const Matrix w = assemble_w(params, layout);
  Matrix c = w * w.transpose();
  for (int k = 0; k < params.n_blocks(); ++k) {
    const Index row = layout.block_row_offset(k);
    c.diagonal().segment(row, params.block_dim(k)) += params.noise(k).expand(params.block_dim(k));
  }
  // Enforce exact symmetry against accumulation-order asymmetry.
  return ((c + c.transpose()) / 2.0).eval();
}

}  // namespace projive
