#include "projive/preprocess.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <string>

namespace projive {

namespace {

std::string feature_label(const MultiBlockData& data, int k, Index j) {
  if (!data.feature_names().empty() && !data.feature_names()[k].empty()) {
    return "'" + data.feature_names()[k][j] + "' (block " + std::to_string(k + 1) + ")";
  }
  return "feature " + std::to_string(j + 1) + " of block " + std::to_string(k + 1);
}

}  // namespace

std::pair<MultiBlockData, PreprocessReport> center_and_scale(const MultiBlockData& data,
                                                             bool scale) {
  const Index n = data.n_subjects();
  if (n < 2) {
    throw std::invalid_argument("center_and_scale: need at least 2 subjects, got " +
                                std::to_string(n));
  }
  PreprocessReport report;
  std::vector<Matrix> blocks;
  for (int k = 0; k < data.n_blocks(); ++k) {
    Matrix x = data.block(k);
    Vector mean = x.rowwise().mean();
    x.colwise() -= mean;
    Vector sd = Vector::Ones(x.rows());
    if (scale) {
      for (Index j = 0; j < x.rows(); ++j) {
        const double var = x.row(j).squaredNorm() / static_cast<double>(n - 1);
        if (var <= 0.0) {
          throw std::invalid_argument("center_and_scale: zero sample variance in " +
                                      feature_label(data, k, j) + "; cannot scale");
        }
        sd(j) = std::sqrt(var);
      }
      x.array().colwise() /= sd.array();
    }
    report.means.push_back(std::move(mean));
    report.scales.push_back(std::move(sd));
    blocks.push_back(std::move(x));
  }
  return {MultiBlockData(std::move(blocks), data.subject_ids(), data.feature_names()), report};
}

MultiBlockData invert_center_and_scale(const MultiBlockData& processed,
                                       const PreprocessReport& report) {
  if (report.means.size() != static_cast<std::size_t>(processed.n_blocks())) {
    throw std::invalid_argument("invert_center_and_scale: report covers " +
                                std::to_string(report.means.size()) + " blocks, data has " +
                                std::to_string(processed.n_blocks()));
  }
  std::vector<Matrix> blocks;
  for (int k = 0; k < processed.n_blocks(); ++k) {
    if (report.means[k].size() != processed.block_dim(k) ||
        report.scales[k].size() != processed.block_dim(k)) {
      throw std::invalid_argument("invert_center_and_scale: report shape mismatch at block " +
                                  std::to_string(k + 1));
    }
    Matrix x = processed.block(k);
    x.array().colwise() *= report.scales[k].array();
    x.colwise() += report.means[k];
    blocks.push_back(std::move(x));
  }
  return MultiBlockData(std::move(blocks), processed.subject_ids(), processed.feature_names());
}

MultiBlockData residualize(const MultiBlockData& data, const Matrix& covariates,
                           PreprocessReport* report) {
  const Index n = data.n_subjects();
  const Index q = covariates.cols();
  if (covariates.rows() != 0 && covariates.rows() != n) {
    throw std::invalid_argument("residualize: covariates have " +
                                std::to_string(covariates.rows()) + " rows for " +
                                std::to_string(n) + " subjects");
  }
  if (q + 1 >= n) {
    throw std::invalid_argument("residualize: need q + 1 < n (q = " + std::to_string(q) +
                                ", n = " + std::to_string(n) + ")");
  }

  // Intercept-augmented design matrix; rank checked via column-pivoted QR.
  Matrix design(n, q + 1);
  design.col(0).setOnes();
  if (q > 0) design.rightCols(q) = covariates;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < q + 1) {
    throw std::invalid_argument(
        "residualize: covariate matrix is rank deficient after prepending an intercept (rank " +
        std::to_string(qr.rank()) + " of " + std::to_string(q + 1) + ")");
  }

  std::vector<Matrix> blocks;
  std::vector<Matrix> coeffs;
  for (int k = 0; k < data.n_blocks(); ++k) {
    // Features are columns of the regression response: Y = X^T (n x p_k).
    Matrix y = data.block(k).transpose();
    Matrix beta = qr.solve(y);  // (q+1) x p_k
    Matrix resid = y - design * beta;
    blocks.push_back(resid.transpose());
    coeffs.push_back(std::move(beta));
  }
  if (report != nullptr) report->covariate_coeffs = std::move(coeffs);
  return MultiBlockData(std::move(blocks), data.subject_ids(), data.feature_names());
}

}  // namespace projive
