#pragma once

#include <Eigen/Dense>

#include "sysid/errors.hpp"
#include "sysid/random.hpp"

namespace sysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-10;

bool all_finite(const Matrix& m);

/// Largest singular value of a square matrix.
///
/// Power iteration on M^T M from the normalized all-ones vector, stopping
/// when successive Rayleigh quotients agree to a relative `tol`. If the
/// result is below the largest column norm of M (a hard lower bound on the
/// spectral norm, reached only when the start vector is deficient), the
/// iteration is repeated from that column's basis vector.
///
/// Throws DimensionError for non-square input and ConvergenceError (carrying
/// the best estimate) if `max_iter` is exhausted.
double spectral_norm(const Matrix& m, double tol = kDefaultTol, int max_iter = 100000);

/// Stationary covariance G = sum_s A^s Sigma (A^T)^s, i.e. the solution of
/// G = A G A^T + Sigma, by fixed-point iteration from G_0 = Sigma. Stops once
/// ||G - A G A^T - Sigma||_F <= tol ||G||_F. Throws StabilityError when the
/// iteration diverges or fails to settle within `max_iter` steps.
Matrix solve_lyapunov(const Matrix& a, const Matrix& sigma, double tol = kDefaultTol,
                      long max_iter = 1'000'000);

/// Lower-triangular L with L L^T = S. Throws DefinitenessError on a
/// non-positive pivot.
Matrix cholesky(const Matrix& s);

/// Like cholesky() but accepts positive semidefinite input: pivots that are
/// zero up to rounding produce zero columns.
Matrix cholesky_psd(const Matrix& s, double tol = kDefaultTol);

/// chol * z with z ~ N(0, I) drawn from rng. Only the lower triangle of chol
/// is read.
Vector gaussian_vector(SeededRng& rng, const Matrix& chol);

/// Allocation-free variant writing into `out` (resized if needed).
void gaussian_vector(SeededRng& rng, const Matrix& chol, Vector& out);

}  // namespace sysid
