#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ddpi/errors.hpp"

namespace ddpi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdTol = 1e-9;
inline constexpr double kDefaultConditionCap = 1e12;

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw ContractError(std::string(what) + ": non-finite entry");
  }
}

inline void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected square matrix, got " + shape_str(m));
  }
}

/// Kronecker product; block (i, j) of the result is a(i, j) * b.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Column-stacking vectorization (first column on top).
inline Vec vec(const Mat& a) {
  return Eigen::Map<const Vec>(a.data(), a.size());
}

/// Inverse of vec.
inline Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0 || v.size() != rows * cols) {
    throw DimensionError("unvec: cannot reshape length " + std::to_string(v.size()) + " into " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Symmetry test, relative to max(1, |m|) so large information matrices are not
/// rejected for rounding-level asymmetry.
inline bool is_symmetric(const Mat& m, double tol = kSymmetryTol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).norm() <= tol * std::max(1.0, m.norm());
}

struct LinearSolution {
  Mat solution;
  double condition = 1.0;  ///< 2-norm condition number of the system matrix.
};

/// Solves m * x = rhs. Throws SingularMatrixError when cond(m) exceeds `condition_cap`.
inline LinearSolution solve_linear(const Mat& m, const Mat& rhs,
                                   double condition_cap = kDefaultConditionCap) {
  require_square(m, "solve_linear");
  if (rhs.rows() != m.rows()) {
    throw DimensionError("solve_linear: rhs " + shape_str(rhs) + " incompatible with " + shape_str(m));
  }
  const Vec sv = Eigen::JacobiSVD<Mat>(m).singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double smin = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  const double condition =
      (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(condition <= condition_cap)) {
    throw SingularMatrixError("solve_linear: matrix singular to tolerance (condition estimate " +
                                  std::to_string(condition) + ")",
                              condition);
  }
  Eigen::PartialPivLU<Mat> lu(m);
  Mat x = lu.solve(rhs);
  // One step of iterative refinement keeps the residual at rounding level.
  x += lu.solve(rhs - m * x);
  return {std::move(x), std::max(1.0, condition)};
}

/// Largest eigenvalue modulus, via real Schur form (Hessenberg + shifted QR).
inline double spectral_radius(const Mat& m) {
  require_square(m, "spectral_radius");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver;
  solver.setMaxIterations(400);
  solver.compute(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectral_radius: QR iteration did not converge within " +
                           std::to_string(400 * m.rows()) + " iterations",
                       static_cast<int>(400 * m.rows()));
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Mat& m) {
  require_square(m, "min_eigenvalue");
  if (!is_symmetric(m)) throw ContractError("min_eigenvalue: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

/// True iff the smallest eigenvalue of symmetric m is >= -tol.
inline bool is_psd(const Mat& m, double tol = kPsdTol) {
  require_square(m, "is_psd");
  if (!is_symmetric(m)) throw ContractError("is_psd: matrix is not symmetric");
  return min_eigenvalue(m) >= -tol;
}

}  // namespace ddpi
