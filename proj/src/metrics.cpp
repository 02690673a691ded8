#include "projive/metrics.hpp"

#include "projive/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace projive {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Distance entry usable only when both sides carry columns and mass.
double applicable_chordal(const Matrix& estimate, const Matrix& truth) {
  if (estimate.cols() == 0 || truth.cols() == 0) return kNan;
  return chordal_norm(estimate, truth);
}

}  // namespace

double chordal_norm(const Matrix& f1, const Matrix& f2) {
  if (f1.rows() != f2.rows()) {
    throw std::invalid_argument("chordal_norm: arguments have " + std::to_string(f1.rows()) +
                                " and " + std::to_string(f2.rows()) + " rows");
  }
  const Matrix q1 = orthonormal_basis(f1);  // throws on zero/empty input
  const Matrix q2 = orthonormal_basis(f2);
  // With B the narrower basis, ||(I - A A^T) B||_F^2 equals the sum of
  // squared principal-angle sines. Unlike accumulating 1 - cos^2 from the
  // cosines, the residual form loses no precision when the angles are near
  // zero, so the distance between two bases of the same span stays at
  // roundoff level instead of sqrt(machine epsilon).
  const Matrix& a = q1.cols() >= q2.cols() ? q1 : q2;
  const Matrix& b = q1.cols() >= q2.cols() ? q2 : q1;
  const Index q = b.cols();
  const double sum_sin_sq = (b - a * (a.transpose() * b)).squaredNorm();
  return std::sqrt(sum_sin_sq) / static_cast<double>(q);
}

std::vector<BlockR2> variance_explained(const SimTruth& truth) {
  std::vector<BlockR2> out;
  for (int k = 0; k < truth.data.n_blocks(); ++k) {
    const double total = truth.data.block(k).squaredNorm();
    if (!(total > 0.0)) {
      throw std::invalid_argument("variance_explained: block " + std::to_string(k + 1) +
                                  " has zero norm");
    }
    out.push_back(BlockR2{truth.joint_matrices.at(k).squaredNorm() / total,
                          truth.indiv_matrices.at(k).squaredNorm() / total});
  }
  return out;
}

RecoveryReport score_recovery(const FitResult& result, const SimTruth& truth) {
  if (result.scores.mean.rows() != truth.data.n_subjects()) {
    throw std::invalid_argument("score_recovery: fit covers " +
                                std::to_string(result.scores.mean.rows()) +
                                " subjects, truth has " +
                                std::to_string(truth.data.n_subjects()));
  }
  const StackedLayout layout = StackedLayout::of(result.params);
  const Matrix est_joint_scores = result.scores.mean.leftCols(layout.joint_rank());

  RecoveryReport report;
  report.joint_score_dist = applicable_chordal(est_joint_scores, truth.joint_scores);
  for (int k = 0; k < layout.n_blocks(); ++k) {
    report.joint_load_dist.push_back(
        applicable_chordal(result.params.w_joint(k), truth.joint_matrices.at(k)));
    const Matrix est_indiv = result.scores.mean.middleCols(layout.indiv_col_offset(k),
                                                           layout.indiv_rank(k));
    report.indiv_score_dist.push_back(applicable_chordal(est_indiv, truth.indiv_scores.at(k)));
    report.indiv_load_dist.push_back(
        applicable_chordal(result.params.w_indiv(k), truth.indiv_matrices.at(k)));
  }
  return report;
}

}  // namespace projive
