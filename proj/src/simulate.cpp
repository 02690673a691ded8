#include "projive/simulate.hpp"

#include "projive/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace projive {

namespace {

void fill_mixture(Matrix& m, RngEngine& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      const double u = unif(rng);
      int comp = 0;
      double acc = kMixtureWeights[0];
      while (comp < 2 && u >= acc) acc += kMixtureWeights[++comp];
      m(i, j) = kMixtureMeans[comp] + kMixtureSds[comp] * normal(rng);
    }
  }
}

void fill_loadings(Matrix& m, LoadingDist dist, RngEngine& rng) {
  if (dist == LoadingDist::kGaussian) {
    fill_standard_normal(m, rng);
  } else {
    fill_rademacher(m, rng);
  }
}

Vector scales_or_default(const Vector& given, int rank, const char* label,
                         std::initializer_list<double> defaults) {
  if (given.size() > 0) {
    if (given.size() != rank) {
      throw std::invalid_argument(std::string(label) + " scale vector has " +
                                  std::to_string(given.size()) + " entries for rank " +
                                  std::to_string(rank));
    }
    return given;
  }
  if (rank > static_cast<int>(defaults.size())) {
    throw std::invalid_argument(std::string("rank ") + std::to_string(rank) +
                                " exceeds the default " + label +
                                " scale list; provide scales explicitly");
  }
  Vector v(rank);
  int i = 0;
  for (double d : defaults) {
    if (i >= rank) break;
    v(i++) = d;
  }
  return v;
}

struct RatioCoefficients {
  double a, b, e, u, v, w;  // ||J||^2, ||A||^2, ||E||^2, tr(JE^T), tr(AE^T), tr(JA^T)
};

double total_norm(const RatioCoefficients& q, double d, double c) {
  return q.a * d * d + q.b * c * c + q.e + 2.0 * d * q.u + 2.0 * c * q.v + 2.0 * c * d * q.w;
}

double joint_fraction(const RatioCoefficients& q, double d, double c) {
  return q.a * d * d / total_norm(q, d, c);
}

double indiv_fraction(const RatioCoefficients& q, double d, double c) {
  return q.b * c * c / total_norm(q, d, c);
}

// Root of fn on (0, inf): fn(0+) < 0, fn increases to a positive limit.
// Brackets by doubling from the hint, then bisects to xtol.
template <typename Fn>
double bisect_positive_root(Fn fn, double hint) {
  double lo = 0.0;
  double hi = std::max(hint, 1e-8);
  int expand = 0;
  while (fn(hi) <= 0.0) {
    hi *= 2.0;
    if (++expand > 200) {
      throw std::runtime_error("scale-constant bisection found no sign change while expanding "
                               "the bracket");
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fn(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
    if (hi - lo < 1e-14 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

std::string coefficient_diagnostics(const RatioCoefficients& q, double d, double c) {
  std::ostringstream os;
  os << "||J||^2=" << q.a << " ||A||^2=" << q.b << " ||E||^2=" << q.e << " tr(JE^T)=" << q.u
     << " tr(AE^T)=" << q.v << " tr(JA^T)=" << q.w << " d=" << d << " c=" << c;
  return os.str();
}

}  // namespace

void SimScenario::validate() const {
  if (n < 1) throw std::invalid_argument("scenario: n must be positive");
  if (p.size() < 2) throw std::invalid_argument("scenario: need at least two blocks");
  const auto k = p.size();
  if (r_i.size() != k || target_r2_joint.size() != k || target_r2_indiv.size() != k) {
    throw std::invalid_argument("scenario: per-block field lengths disagree with p");
  }
  if (r_j < 1) throw std::invalid_argument("scenario: joint rank must be >= 1");
  for (std::size_t i = 0; i < k; ++i) {
    if (r_i[i] < 1) throw std::invalid_argument("scenario: individual ranks must be >= 1");
    if (p[i] <= r_j + r_i[i]) {
      throw std::invalid_argument("scenario: block " + std::to_string(i + 1) +
                                  " needs p > r_j + r_i");
    }
    const double tj = target_r2_joint[i];
    const double ti = target_r2_indiv[i];
    if (!(tj > 0.0 && tj < 1.0) || !(ti > 0.0 && ti < 1.0) || !(tj + ti < 1.0)) {
      throw std::invalid_argument("scenario: variance targets of block " + std::to_string(i + 1) +
                                  " must lie in (0,1) and sum below 1");
    }
  }
  joint_scales();
  for (int b = 0; b < n_blocks(); ++b) indiv_scales(b);
}

Vector SimScenario::joint_scales() const {
  return scales_or_default(q_joint, r_j, "joint", {3.0, 2.0, 1.0});
}

Vector SimScenario::indiv_scales(int k) const {
  return scales_or_default(q_indiv, r_i.at(k), "individual", {2.0, 1.0});
}

ScaleConstants solve_scale_constants(const Matrix& joint, const Matrix& indiv,
                                     const Matrix& noise, double target_r2_joint,
                                     double target_r2_indiv) {
  if (joint.rows() != indiv.rows() || joint.cols() != indiv.cols() ||
      joint.rows() != noise.rows() || joint.cols() != noise.cols()) {
    throw std::invalid_argument("scale solver: component matrices must share one shape");
  }
  const double tj = target_r2_joint;
  const double ti = target_r2_indiv;
  if (!(tj > 0.0 && tj < 1.0) || !(ti > 0.0 && ti < 1.0) || !(tj + ti < 1.0)) {
    throw std::invalid_argument("scale solver: targets must lie in (0,1) and sum below 1");
  }
  RatioCoefficients q{joint.squaredNorm(), indiv.squaredNorm(), noise.squaredNorm(),
                      (joint.array() * noise.array()).sum(),
                      (indiv.array() * noise.array()).sum(),
                      (joint.array() * indiv.array()).sum()};
  if (!(q.a > 0.0) || !(q.b > 0.0) || !(q.e > 0.0)) {
    throw std::invalid_argument("scale solver: component matrices must have positive norms");
  }

  // Start from the solution of the trace-orthogonal case.
  const double leftover = 1.0 - tj - ti;
  double d = std::sqrt(tj * q.e / (q.a * leftover));
  double c = std::sqrt(ti * q.e / (q.b * leftover));

  double resid = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 200; ++sweep) {
    d = bisect_positive_root([&](double x) { return joint_fraction(q, x, c) - tj; }, d);
    c = bisect_positive_root([&](double x) { return indiv_fraction(q, d, x) - ti; }, c);
    resid = std::max(std::abs(joint_fraction(q, d, c) - tj),
                     std::abs(indiv_fraction(q, d, c) - ti));
    if (resid < 1e-10) break;
  }
  if (!(resid < 1e-8) || !(d > 0.0) || !(c > 0.0)) {
    throw std::runtime_error("scale solver failed to calibrate the variance fractions "
                             "(residual " + std::to_string(resid) + "; " +
                             coefficient_diagnostics(q, d, c) + ")");
  }
  return ScaleConstants{c, d};
}

SimTruth generate(const SimScenario& scenario) {
  scenario.validate();
  const Index n = scenario.n;
  const int n_blocks = scenario.n_blocks();

  // Joint scores come from their own stream so the per-block streams stay
  // aligned regardless of the score distribution.
  Matrix z(n, scenario.r_j);
  {
    RngEngine rng = make_engine(derive_seed(scenario.seed, 1));
    if (scenario.score_dist == ScoreDist::kGaussian) {
      fill_standard_normal(z, rng);
    } else {
      fill_mixture(z, rng);
    }
  }
  const Vector qj = scenario.joint_scales();

  std::vector<Matrix> blocks, indiv_scores, joint_matrices, indiv_matrices, noise;
  std::vector<BlockR2> achieved;
  std::vector<ScaleConstants> constants;
  for (int k = 0; k < n_blocks; ++k) {
    RngEngine rng = make_engine(derive_seed(scenario.seed, 2, static_cast<std::uint64_t>(k)));
    const Index pk = scenario.p[k];
    const int rik = scenario.r_i[k];

    Matrix b(n, rik);
    fill_standard_normal(b, rng);  // individual scores stay Gaussian always
    Matrix r_joint(pk, scenario.r_j);
    fill_loadings(r_joint, scenario.loading_dist, rng);
    Matrix r_indiv(pk, rik);
    fill_loadings(r_indiv, scenario.loading_dist, rng);
    Matrix e(pk, n);
    fill_standard_normal(e, rng);

    const Matrix w_joint = r_joint * qj.asDiagonal();
    const Matrix w_indiv = r_indiv * scenario.indiv_scales(k).asDiagonal();
    const Matrix j_k = w_joint * z.transpose();
    const Matrix a_k = w_indiv * b.transpose();

    const ScaleConstants sc = solve_scale_constants(j_k, a_k, e, scenario.target_r2_joint[k],
                                                    scenario.target_r2_indiv[k]);
    Matrix joint_part = sc.d * j_k;
    Matrix indiv_part = sc.c * a_k;
    Matrix x_k = joint_part + indiv_part + e;

    const double total = x_k.squaredNorm();
    achieved.push_back(BlockR2{joint_part.squaredNorm() / total,
                               indiv_part.squaredNorm() / total});
    constants.push_back(sc);
    blocks.push_back(std::move(x_k));
    indiv_scores.push_back(std::move(b));
    joint_matrices.push_back(std::move(joint_part));
    indiv_matrices.push_back(std::move(indiv_part));
    noise.push_back(std::move(e));
  }

  return SimTruth{MultiBlockData(std::move(blocks)),
                  std::move(z),
                  std::move(indiv_scores),
                  std::move(joint_matrices),
                  std::move(indiv_matrices),
                  std::move(noise),
                  std::move(achieved),
                  std::move(constants),
                  scenario,
                  "factorial"};
}

SimTruth generate_feng(Index n, Index p1, Index p2, double noise_sd, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("fixed design: n must be even");
  if (p1 < 10 || p2 < 10) throw std::invalid_argument("fixed design: blocks need >= 10 features");
  if (noise_sd < 0.0) throw std::invalid_argument("fixed design: noise_sd must be >= 0");

  const Index half_n = n / 2;
  Matrix z(n, 1);
  for (Index i = 0; i < n; ++i) z(i, 0) = i < half_n ? -1.0 : 1.0;

  // Block 1: joint loadings vanish on the first half of the features; the
  // individual component splits subjects quarter-wise (orthogonal to the
  // joint +-1 pattern when n is a multiple of 4) and its loading alternates
  // sign exactly where the joint loading is nonzero.
  Vector load_j1 = Vector::Zero(p1);
  load_j1.tail(p1 - p1 / 2).setOnes();
  Matrix b1(n, 1);
  const Index quarter = n / 4;
  for (Index i = 0; i < n; ++i) b1(i, 0) = ((i / std::max<Index>(quarter, 1)) % 2 == 0) ? -1.0 : 1.0;
  Vector load_i1(p1);
  load_i1.head(p1 / 2).setOnes();
  for (Index j = p1 / 2; j < p1; ++j) load_i1(j) = ((j - p1 / 2) % 2 == 0) ? 1.0 : -1.0;

  // Block 2: joint loadings vanish on the first 80% of features. The two
  // individual components load on the joint-zero region and, with
  // alternating signs, on the joint-support region.
  const Index p2_zero = (p2 * 8) / 10;
  Vector load_j2 = Vector::Zero(p2);
  load_j2.tail(p2 - p2_zero).setOnes();
  Matrix load_i2(p2, 2);
  load_i2.setZero();
  load_i2.col(0).head(p2_zero).setOnes();
  for (Index j = p2_zero; j < p2; ++j) load_i2(j, 1) = ((j - p2_zero) % 2 == 0) ? 1.0 : -1.0;

  RngEngine rng = make_engine(derive_seed(seed, 0));
  Matrix b2(n, 2);
  fill_standard_normal(b2, rng);
  Matrix e1(p1, n), e2(p2, n);
  fill_standard_normal(e1, rng);
  fill_standard_normal(e2, rng);
  e1 *= noise_sd;
  e2 *= noise_sd;

  Matrix j1 = load_j1 * z.transpose();
  Matrix j2 = load_j2 * z.transpose();
  Matrix a1 = load_i1 * b1.transpose();
  Matrix a2 = load_i2 * b2.transpose();
  Matrix x1 = j1 + a1 + e1;
  Matrix x2 = j2 + a2 + e2;

  std::vector<BlockR2> achieved;
  const double total1 = x1.squaredNorm();
  const double total2 = x2.squaredNorm();
  achieved.push_back(BlockR2{j1.squaredNorm() / total1, a1.squaredNorm() / total1});
  achieved.push_back(BlockR2{j2.squaredNorm() / total2, a2.squaredNorm() / total2});

  SimScenario scenario;
  scenario.n = n;
  scenario.p = {p1, p2};
  scenario.r_j = 1;
  scenario.r_i = {1, 2};
  scenario.target_r2_joint = {achieved[0].joint, achieved[1].joint};
  scenario.target_r2_indiv = {achieved[0].indiv, achieved[1].indiv};
  scenario.q_joint = Vector::Ones(1);
  scenario.q_indiv = Vector::Ones(2);
  scenario.seed = seed;

  std::vector<Matrix> blocks{std::move(x1), std::move(x2)};
  return SimTruth{MultiBlockData(std::move(blocks)),
                  std::move(z),
                  {std::move(b1), std::move(b2)},
                  {std::move(j1), std::move(j2)},
                  {std::move(a1), std::move(a2)},
                  {std::move(e1), std::move(e2)},
                  std::move(achieved),
                  {ScaleConstants{1.0, 1.0}, ScaleConstants{1.0, 1.0}},
                  std::move(scenario),
                  "feng"};
}

}  // namespace projive
