#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddpi/matops.hpp"

namespace ddpi {

/// Discrete-time plant x+ = A x + B u.
struct Plant {
  Mat a;
  Mat b;

  Plant() = default;
  Plant(Mat a_in, Mat b_in) : a(std::move(a_in)), b(std::move(b_in)) {
    require_square(a, "Plant");
    if (b.rows() != a.rows() || b.cols() < 1) {
      throw DimensionError("Plant: B is " + shape_str(b) + " but A is " + shape_str(a));
    }
    require_finite(a, "Plant A");
    require_finite(b, "Plant B");
  }

  Eigen::Index nx() const { return a.rows(); }
  Eigen::Index nu() const { return b.cols(); }

  /// [A B], the regression parameter identified by least squares.
  Mat theta() const {
    Mat out(nx(), nx() + nu());
    out << a, b;
    return out;
  }

  static Plant from_theta(const Mat& theta, Eigen::Index nx) {
    if (theta.rows() != nx || theta.cols() <= nx) {
      throw DimensionError("Plant::from_theta: theta is " + shape_str(theta));
    }
    return Plant(theta.leftCols(nx), theta.rightCols(theta.cols() - nx));
  }
};

/// Stage cost x'Qx + u'Ru with Q >= 0 and R > 0.
struct CostWeights {
  Mat q;
  Mat r;

  CostWeights() = default;
  CostWeights(Mat q_in, Mat r_in) : q(std::move(q_in)), r(std::move(r_in)) {
    require_square(q, "CostWeights Q");
    require_square(r, "CostWeights R");
    require_finite(q, "CostWeights Q");
    require_finite(r, "CostWeights R");
    if (!is_psd(q)) throw ContractError("CostWeights: Q must be symmetric positive semidefinite");
    if (min_eigenvalue(r) <= 1e-12) {
      throw ContractError("CostWeights: R must be symmetric positive definite");
    }
  }
};

/// State-feedback gain, u = K x.
struct Gain {
  Mat k;

  Gain() = default;
  explicit Gain(Mat k_in) : k(std::move(k_in)) { require_finite(k, "Gain"); }
};

/// Symmetric quadratic value kernel, V(x) = x'Px. Stored symmetrized.
struct ValueKernel {
  Mat p;

  ValueKernel() = default;
  explicit ValueKernel(const Mat& p_in) {
    require_square(p_in, "ValueKernel");
    require_finite(p_in, "ValueKernel");
    if (!is_symmetric(p_in, 1e-9)) throw ContractError("ValueKernel: kernel is not symmetric");
    p = symmetrize(p_in);
  }
};

inline void check_dims(const Plant& plant, const CostWeights& w) {
  if (w.q.rows() != plant.nx() || w.r.rows() != plant.nu()) {
    throw DimensionError("cost weights " + shape_str(w.q) + "/" + shape_str(w.r) +
                         " do not match plant with nx=" + std::to_string(plant.nx()) +
                         ", nu=" + std::to_string(plant.nu()));
  }
}

inline void check_dims(const Plant& plant, const Gain& k) {
  if (k.k.rows() != plant.nu() || k.k.cols() != plant.nx()) {
    throw DimensionError("gain " + shape_str(k.k) + " does not match plant with nx=" +
                         std::to_string(plant.nx()) + ", nu=" + std::to_string(plant.nu()));
  }
}

inline Mat closed_loop(const Plant& plant, const Gain& k) {
  check_dims(plant, k);
  return plant.a + plant.b * k.k;
}

inline constexpr double kStabilityMargin = 1e-10;

inline bool is_stabilizing(const Plant& plant, const Gain& k) {
  return spectral_radius(closed_loop(plant, k)) < 1.0 - kStabilityMargin;
}

/// Solves P = M + F'PF through (I - F'⊗F') vec(P) = vec(M). F must be Schur stable.
inline Mat solve_stein(const Mat& f, const Mat& m) {
  const Eigen::Index n = f.rows();
  const Mat ft = f.transpose();
  const Mat lhs = Mat::Identity(n * n, n * n) - kron(ft, ft);
  const LinearSolution sol = solve_linear(lhs, vec(m));
  return symmetrize(unvec(sol.solution, n, n));
}

/// |P - (Q + K'RK + (A+BK)'P(A+BK))|.
inline double bellman_residual(const Plant& plant, const CostWeights& w, const Gain& k,
                               const ValueKernel& p) {
  const Mat f = closed_loop(plant, k);
  return (p.p - (w.q + k.k.transpose() * w.r * k.k + f.transpose() * p.p * f)).norm();
}

/// Policy evaluation: the kernel of the cost of a stabilizing gain.
inline ValueKernel policy_evaluation(const Plant& plant, const CostWeights& w, const Gain& k) {
  check_dims(plant, w);
  const Mat f = closed_loop(plant, k);
  const double rho = spectral_radius(f);
  if (!(rho < 1.0 - kStabilityMargin)) {
    throw StabilizationError("policy_evaluation: gain is not stabilizing (spectral radius " +
                                 std::to_string(rho) + ")",
                             rho);
  }
  return ValueKernel(solve_stein(f, w.q + k.k.transpose() * w.r * k.k));
}

/// Greedy gain K = -(R + B'PB)^{-1} B'PA.
inline Gain policy_improvement(const Plant& plant, const CostWeights& w, const ValueKernel& p) {
  check_dims(plant, w);
  const Mat btp = plant.b.transpose() * p.p;
  const Mat lhs = w.r + btp * plant.b;
  return Gain(-solve_linear(lhs, btp * plant.a).solution);
}

/// One Riccati step P -> Q + A'PA - A'PB (R + B'PB)^{-1} B'PA.
inline Mat riccati_map(const Plant& plant, const CostWeights& w, const Mat& p) {
  const Mat btpa = plant.b.transpose() * p * plant.a;
  const Mat beta = w.r + plant.b.transpose() * p * plant.b;
  const Mat gain_term = beta.llt().solve(btpa);
  return symmetrize(w.q + plant.a.transpose() * p * plant.a - btpa.transpose() * gain_term);
}

inline double dare_residual(const Plant& plant, const CostWeights& w, const ValueKernel& p) {
  return (p.p - riccati_map(plant, w, p.p)).norm();
}

/// Riccati value iteration from P0 = Q. Returns the first iterate whose DARE residual is
/// at most tol * max(1, |P|). Failure to converge is reported as non-stabilizability.
inline ValueKernel dare_value_iteration(const Plant& plant, const CostWeights& w,
                                        double tol = 1e-12, int max_iter = 200000) {
  check_dims(plant, w);
  Mat p = w.q;
  for (int it = 0; it < max_iter; ++it) {
    Mat next = riccati_map(plant, w, p);
    const double residual = (next - p).norm();
    // |P| overflows before the entries do when iterates diverge
    if (!next.allFinite() || !std::isfinite(residual) || !std::isfinite(next.norm())) break;
    if (residual <= tol * std::max(1.0, p.norm())) return ValueKernel(p);
    p = std::move(next);
  }
  throw NotStabilizableError("dare_value_iteration: no convergence within " +
                                 std::to_string(max_iter) +
                                 " iterations; (A, B) treated as not stabilizable",
                             max_iter);
}

struct LqrSolution {
  ValueKernel p;
  Gain k;
};

/// P* by value iteration and the associated optimal gain K*.
inline LqrSolution optimal_lqr(const Plant& plant, const CostWeights& w, double tol = 1e-12) {
  ValueKernel p = dare_value_iteration(plant, w, tol);
  Gain k = policy_improvement(plant, w, p);
  return {std::move(p), std::move(k)};
}

struct PiIterate {
  ValueKernel p;  ///< P_i, the kernel of K_i.
  Gain k_next;    ///< K_{i+1}.
};

/// Model-based policy iteration from a stabilizing K0; returns (P_i, K_{i+1}) for i < iters.
inline std::vector<PiIterate> model_based_pi(const Plant& plant, const CostWeights& w,
                                             const Gain& k0, int iters) {
  std::vector<PiIterate> out;
  out.reserve(static_cast<std::size_t>(std::max(iters, 0)));
  Gain k = k0;
  for (int i = 0; i < iters; ++i) {
    ValueKernel p = policy_evaluation(plant, w, k);
    Gain next = policy_improvement(plant, w, p);
    k = next;
    out.push_back({std::move(p), std::move(next)});
  }
  return out;
}

inline double closed_loop_cost(const ValueKernel& p, const Vec& x0) {
  if (x0.size() != p.p.rows()) {
    throw DimensionError("closed_loop_cost: x0 has length " + std::to_string(x0.size()));
  }
  return x0.dot(p.p * x0);
}

}  // namespace ddpi
