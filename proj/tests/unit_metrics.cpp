#include "projive/metrics.hpp"

#include "projive/em.hpp"
#include "projive/linalg.hpp"
#include "projive/rng.hpp"
#include "projive/simulate.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace projive;

TEST_CASE("chordal distance of a 45-degree plane rotation") {
  Matrix f1(2, 1), f2(2, 1);
  f1 << 1.0, 0.0;
  f2 << 1.0, 1.0;  // 45 degrees from f1; normalisation is irrelevant
  CHECK(chordal_norm(f1, f2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(chordal_norm(f1, f2) == doctest::Approx(0.70710678).epsilon(1e-7));
}

TEST_CASE("chordal distance extremes: identical and orthogonal subspaces") {
  RngEngine rng = make_engine(50);
  const Matrix basis = testutil::random_orthogonal(6, rng);
  const Matrix a = basis.leftCols(2);
  const Matrix b = basis.middleCols(2, 2);
  CHECK(chordal_norm(a, a) < 1e-10);
  CHECK(chordal_norm(a, b) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));

  // Orthogonal one-dimensional spaces score exactly 1.
  CHECK(chordal_norm(basis.col(0), basis.col(1)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chordal distance is symmetric and transform-invariant") {
  RngEngine rng = make_engine(51);
  const Matrix f1 = testutil::random_normal(8, 3, rng);
  const Matrix f2 = testutil::random_normal(8, 3, rng);
  const double d = chordal_norm(f1, f2);
  CHECK(std::abs(chordal_norm(f2, f1) - d) < 1e-12);

  // Any invertible recombination of columns spans the same space.
  Matrix t = testutil::random_normal(3, 3, rng);
  t += 3.0 * Matrix::Identity(3, 3);
  CHECK(std::abs(chordal_norm(f1 * t, f2) - d) < 1e-10);
  CHECK(std::abs(chordal_norm(f1, f2 * t.transpose()) - d) < 1e-10);
  CHECK(std::abs(chordal_norm(2.5 * f1, f2) - d) < 1e-12);
}

TEST_CASE("chordal distance uses the smaller numerical rank") {
  RngEngine rng = make_engine(52);
  const Matrix basis = testutil::random_orthogonal(7, rng);
  const Matrix wide = basis.leftCols(3);
  const Matrix narrow = basis.col(0);
  // col(0) lies inside span(wide): one angle, zero distance.
  CHECK(chordal_norm(wide, narrow) < 1e-10);

  // Duplicated columns do not raise the rank.
  Matrix duplicated(7, 2);
  duplicated.col(0) = basis.col(0);
  duplicated.col(1) = 2.0 * basis.col(0);
  CHECK(std::abs(chordal_norm(duplicated, basis.col(1)) - 1.0) < 1e-10);
}

TEST_CASE("chordal distance rejects empty and zero inputs") {
  const Matrix zero = Matrix::Zero(4, 2);
  const Matrix ok = Matrix::Identity(4, 2);
  CHECK_THROWS_AS(chordal_norm(zero, ok), std::invalid_argument);
  CHECK_THROWS_AS(chordal_norm(ok, zero), std::invalid_argument);
  CHECK_THROWS_AS(chordal_norm(Matrix(4, 0), ok), std::invalid_argument);
}

TEST_CASE("variance explained matches the stored calibration") {
  SimScenario scenario;
  scenario.n = 400;
  scenario.p = {12, 18};
  scenario.r_j = 2;
  scenario.r_i = {1, 1};
  scenario.target_r2_joint = {0.5, 0.3};
  scenario.target_r2_indiv = {0.25, 0.25};
  scenario.seed = 77;
  const SimTruth truth = generate(scenario);
  const std::vector<BlockR2> r2 = variance_explained(truth);
  REQUIRE(r2.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(r2[static_cast<std::size_t>(k)].joint -
                   truth.achieved_r2[static_cast<std::size_t>(k)].joint) < 1e-10);
    CHECK(std::abs(r2[static_cast<std::size_t>(k)].indiv -
                   truth.achieved_r2[static_cast<std::size_t>(k)].indiv) < 1e-10);
  }
}

TEST_CASE("variance explained flags pure-signal and pure-noise blocks") {
  SimScenario scenario;
  scenario.n = 100;
  scenario.p = {6, 6};
  scenario.r_j = 1;
  scenario.r_i = {1, 1};
  scenario.target_r2_joint = {0.4, 0.4};
  scenario.target_r2_indiv = {0.2, 0.2};
  scenario.seed = 78;
  SimTruth truth = generate(scenario);

  // Rebuild block 1 as exactly its joint part: joint fraction 1, individual 0.
  const Matrix joint_part = truth.joint_matrices[0];
  truth.data = MultiBlockData({joint_part, truth.data.block(1)});
  truth.indiv_matrices[0].setZero();
  truth.noise[0].setZero();
  const std::vector<BlockR2> r2 = variance_explained(truth);
  CHECK(r2[0].joint == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r2[0].indiv == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("recovery report is near zero when scoring the truth against itself") {
  SimScenario scenario;
  scenario.n = 300;
  scenario.p = {8, 10};
  scenario.r_j = 2;
  scenario.r_i = {2, 1};
  scenario.target_r2_joint = {0.5, 0.5};
  scenario.target_r2_indiv = {0.25, 0.25};
  scenario.seed = 79;
  const SimTruth truth = generate(scenario);

  // Package the generating truth as if it were a fit result; the loading
  // column spaces equal the spans of the realised signal parts.
  std::vector<Matrix> w_joint, w_indiv;
  std::vector<BlockNoise> noise;
  for (int k = 0; k < 2; ++k) {
    w_joint.push_back(orthonormal_basis(truth.joint_matrices[static_cast<std::size_t>(k)]));
    w_indiv.push_back(orthonormal_basis(truth.indiv_matrices[static_cast<std::size_t>(k)]));
    noise.push_back(BlockNoise::isotropic(1.0));
  }
  FitResult result{ProjiveParams(std::move(w_joint), std::move(w_indiv), std::move(noise)),
                   PosteriorScores{}, {}, true, 0, TerminationReason::kTolerance,
                   0.0, 0.0, 0.0};
  const StackedLayout layout = StackedLayout::of(result.params);
  result.scores.mean = Matrix(scenario.n, layout.r_total());
  result.scores.mean.leftCols(2) = truth.joint_scores;
  result.scores.mean.middleCols(2, 2) = truth.indiv_scores[0];
  result.scores.mean.rightCols(1) = truth.indiv_scores[1];
  result.scores.cov = Matrix::Zero(layout.r_total(), layout.r_total());
  result.scores.second_moment_sum = result.scores.mean.transpose() * result.scores.mean;

  const RecoveryReport report = score_recovery(result, truth);
  CHECK(report.joint_score_dist < 1e-10);
  for (int k = 0; k < 2; ++k) {
    CHECK(report.joint_load_dist[static_cast<std::size_t>(k)] < 1e-10);
    CHECK(report.indiv_score_dist[static_cast<std::size_t>(k)] < 1e-10);
    CHECK(report.indiv_load_dist[static_cast<std::size_t>(k)] < 1e-10);
  }
}

TEST_CASE("recovery report from an actual fit beats chance on easy data") {
  SimScenario scenario;
  scenario.n = 1000;
  scenario.p = {20, 20};
  scenario.r_j = 1;
  scenario.r_i = {2, 2};
  scenario.target_r2_joint = {0.5, 0.5};
  scenario.target_r2_indiv = {0.25, 0.25};
  scenario.seed = 80;
  const SimTruth truth = generate(scenario);

  FitOptions options;
  options.warn = false;
  const FitResult result = fit(truth.data, BlockRanks(1, {2, 2}), InitStrategy::cholesky(),
                               NoiseKind::kIsotropic, options);
  const RecoveryReport report = score_recovery(result, truth);
  // A random one-dimensional direction in R^1000 scores ~1; recovery should
  // leave that regime decisively.
  CHECK(report.joint_score_dist < 0.5);
  CHECK(report.joint_load_dist[0] < 0.5);
  CHECK(report.joint_load_dist[1] < 0.5);
}

TEST_CASE("recovery report marks zero-rank comparisons as not applicable") {
  SimScenario scenario;
  scenario.n = 200;
  scenario.p = {6, 6};
  scenario.r_j = 1;
  scenario.r_i = {1, 1};
  scenario.target_r2_joint = {0.4, 0.4};
  scenario.target_r2_indiv = {0.2, 0.2};
  scenario.seed = 81;
  const SimTruth truth = generate(scenario);

  FitOptions options;
  options.warn = false;
  options.max_iters = 10;
  options.tol = 1e-16;
  const FitResult result = fit(truth.data, BlockRanks(1, {0, 0}), InitStrategy::cholesky(),
                               NoiseKind::kIsotropic, options);
  const RecoveryReport report = score_recovery(result, truth);
  CHECK(std::isfinite(report.joint_score_dist));
  for (int k = 0; k < 2; ++k) {
    CHECK(std::isnan(report.indiv_score_dist[static_cast<std::size_t>(k)]));
    CHECK(std::isnan(report.indiv_load_dist[static_cast<std::size_t>(k)]));
  }
}

TEST_CASE("recovery report rejects mismatched subject counts") {
  SimScenario scenario;
  scenario.n = 50;
  scenario.p = {5, 5};
  scenario.r_j = 1;
  scenario.r_i = {1, 1};
  scenario.target_r2_joint = {0.4, 0.4};
  scenario.target_r2_indiv = {0.2, 0.2};
  scenario.seed = 82;
  const SimTruth truth = generate(scenario);

  RngEngine rng = make_engine(83);
  const MultiBlockData other = testutil::random_data({5, 5}, 60, rng);
  FitOptions options;
  options.warn = false;
  options.max_iters = 5;
  options.tol = 1e-16;
  const FitResult result = fit(other, BlockRanks(1, {1, 1}), InitStrategy::cholesky(),
                               NoiseKind::kIsotropic, options);
  CHECK_THROWS_AS(score_recovery(result, truth), std::invalid_argument);
}
