#pragma once

// Small dense-linear-algebra helpers shared by the estimation, metric and
// rank-selection code: a pivot-tolerant Cholesky for positive SEMIdefinite
// matrices (sample covariances with n < p are exactly singular) and
// numerical-rank / orthonormal-basis utilities built on the SVD.

#include "projive/types.hpp"

namespace projive {

/// Lower-triangular factor L with L L^T = s for a symmetric positive
/// semidefinite s. Columns whose pivot falls inside [-tol, tol] relative to
/// the largest diagonal entry are zeroed (the factor of a singular matrix);
/// a pivot below -tol means s is not PSD and raises an error.
Matrix psd_cholesky(const Matrix& s, double rel_tol = kRankTolerance);

/// Number of singular values exceeding kRankTolerance * largest.
Index numerical_rank(const Matrix& m);

/// Orthonormal basis of the column space (thin-SVD left vectors at the
/// numerical rank). Throws if m is zero or empty.
Matrix orthonormal_basis(const Matrix& m);

/// Singular values of qa^T qb for orthonormal-column qa, qb, clamped into
/// [0,1]: the cosines of the principal angles between the two column spaces.
Vector principal_angle_cosines(const Matrix& qa, const Matrix& qb);

}  // namespace projive
