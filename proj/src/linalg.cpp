#include "projive/linalg.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace projive {

Matrix psd_cholesky(const Matrix& s, double rel_tol) {
  if (s.rows() != s.cols() || s.rows() < 1) {
    throw std::invalid_argument("psd_cholesky: matrix must be square and non-empty");
  }
  const Index p = s.rows();
  const double scale = std::max(s.diagonal().maxCoeff(), 1.0);
  const double tol = rel_tol * scale;
  Matrix l = Matrix::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    const double pivot = s(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -tol) {
      throw std::invalid_argument("psd_cholesky: matrix is not positive semidefinite (pivot " +
                                  std::to_string(pivot) + " at position " + std::to_string(j + 1) +
                                  ")");
    }
    if (pivot <= tol) continue;  // singular direction: leave the column zero
    l(j, j) = std::sqrt(pivot);
    if (j + 1 < p) {
      l.col(j).tail(p - j - 1) =
          (s.col(j).tail(p - j - 1) - l.bottomLeftCorner(p - j - 1, j) * l.row(j).head(j).transpose()) /
          l(j, j);
    }
  }
  return l;
}

Index numerical_rank(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cutoff = kRankTolerance * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return rank;
}

Matrix orthonormal_basis(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw std::invalid_argument("orthonormal_basis: empty matrix");
  }
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) {
    throw std::invalid_argument("orthonormal_basis: zero matrix has no column space");
  }
  const double cutoff = kRankTolerance * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

Vector principal_angle_cosines(const Matrix& qa, const Matrix& qb) {
  if (qa.rows() != qb.rows()) {
    throw std::invalid_argument("principal_angle_cosines: bases live in different spaces (" +
                                std::to_string(qa.rows()) + " vs " + std::to_string(qb.rows()) +
                                " rows)");
  }
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  Vector cos = svd.singularValues();
  for (Index i = 0; i < cos.size(); ++i) cos(i) = std::clamp(cos(i), 0.0, 1.0);
  return cos;
}

}  // namespace projive
