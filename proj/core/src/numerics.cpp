#include "sysid/numerics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sysid {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

struct PowerResult {
  double lambda;
  bool converged;
};

// Dominant eigenvalue of the PSD matrix `gram` starting from `v`.
PowerResult power_iterate(const Matrix& gram, Vector v, double tol, int max_iter) {
  Vector w(v.size());
  double lambda = v.dot(gram * v);
  for (int it = 0; it < max_iter; ++it) {
    w.noalias() = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      return {0.0, true};
    }
    v = w / norm;
    const double next = v.dot(gram * v);
    if (std::abs(next - lambda) <= tol * std::abs(next)) {
      return {next, true};
    }
    lambda = next;
  }
  return {lambda, false};
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

double spectral_norm(const Matrix& m, double tol, int max_iter) {
  require_square(m, "spectral_norm");
  if (!(tol > 0.0)) {
    throw ValidationError("spectral_norm: tol must be positive");
  }
  const Eigen::Index n = m.rows();
  const Matrix gram = m.transpose() * m;

  Eigen::Index best_col = 0;
  const double max_col_sq = gram.diagonal().maxCoeff(&best_col);
  if (max_col_sq == 0.0) {
    return 0.0;
  }

  PowerResult r = power_iterate(gram, Vector::Constant(n, 1.0 / std::sqrt(double(n))), tol, max_iter);
  if (r.lambda < max_col_sq * (1.0 - tol)) {
    r = power_iterate(gram, Vector::Unit(n, best_col), tol, max_iter);
  }
  const double sigma = std::sqrt(std::max(r.lambda, 0.0));
  if (!r.converged) {
    throw ConvergenceError("spectral_norm: no convergence after " + std::to_string(max_iter) +
                               " iterations",
                           sigma);
  }
  return sigma;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& sigma, double tol, long max_iter) {
  require_square(a, "solve_lyapunov");
  if (sigma.rows() != a.rows() || sigma.cols() != a.cols()) {
    throw DimensionError("solve_lyapunov: Sigma must match the dimension of A");
  }
  Matrix g = sigma;
  Matrix next(g.rows(), g.cols());
  for (long it = 0; it < max_iter; ++it) {
    next.noalias() = a * g * a.transpose();
    next += sigma;
    next = 0.5 * (next + next.transpose()).eval();
    const double scale = next.norm();
    if (!std::isfinite(scale)) {
      throw StabilityError("solve_lyapunov: iteration diverged (spectral radius >= 1?)");
    }
    const double residual = (next - g).norm();
    g.swap(next);
    if (residual <= tol * scale || scale == 0.0) {
      return g;
    }
  }
  throw StabilityError("solve_lyapunov: no fixed point within " + std::to_string(max_iter) +
                       " iterations (spectral radius >= 1?)");
}

Matrix cholesky(const Matrix& s) {
  require_square(s, "cholesky");
  const Eigen::Index n = s.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = s(j, j);
    for (Eigen::Index k = 0; k < j; ++k) {
      pivot -= l(j, k) * l(j, k);
    }
    if (!(pivot > 0.0)) {
      throw DefinitenessError("cholesky: matrix is not positive definite (pivot " +
                              std::to_string(j) + " = " + std::to_string(pivot) + ")");
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (Eigen::Index k = 0; k < j; ++k) {
        v -= l(i, k) * l(j, k);
      }
      l(i, j) = v / ljj;
    }
  }
  return l;
}

Matrix cholesky_psd(const Matrix& s, double tol) {
  require_square(s, "cholesky_psd");
  const Eigen::Index n = s.rows();
  const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = s(j, j);
    for (Eigen::Index k = 0; k < j; ++k) {
      pivot -= l(j, k) * l(j, k);
    }
    if (pivot <= tol * scale) {
      if (pivot < -tol * scale) {
        throw DefinitenessError("cholesky_psd: matrix is not positive semidefinite");
      }
      // Zero column; the remaining entries of this column must vanish too.
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double v = s(i, j);
        for (Eigen::Index k = 0; k < j; ++k) {
          v -= l(i, k) * l(j, k);
        }
        if (std::abs(v) > std::sqrt(tol) * scale) {
          throw DefinitenessError("cholesky_psd: matrix is not positive semidefinite");
        }
      }
      continue;
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (Eigen::Index k = 0; k < j; ++k) {
        v -= l(i, k) * l(j, k);
      }
      l(i, j) = v / ljj;
    }
  }
  return l;
}

void gaussian_vector(SeededRng& rng, const Matrix& chol, Vector& out) {
  if (chol.rows() != chol.cols()) {
    throw DimensionError("gaussian_vector: Cholesky factor must be square");
  }
  const Eigen::Index n = chol.rows();
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = rng.normal();
  }
  // In-place lower-triangular product, bottom row first so z_j (j <= i)
  // is still intact when row i is formed.
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      acc += chol(i, j) * out[j];
    }
    out[i] = acc;
  }
}

Vector gaussian_vector(SeededRng& rng, const Matrix& chol) {
  Vector out;
  gaussian_vector(rng, chol, out);
  return out;
}

}  // namespace sysid
