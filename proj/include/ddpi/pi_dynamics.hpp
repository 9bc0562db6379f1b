#pragma once

// Policy iteration written as a discrete-time dynamical system on the value kernel:
//   (I ⊗ I - Ω(P) ⊗ Ω(P)) vec(P+) = vec(Γ(P)).

#include <cstdint>
#include <random>

#include "ddpi/lqr.hpp"
#include "ddpi/random.hpp"

namespace ddpi {

struct PiStepCache {
  Mat alpha;     ///< B'PA
  Mat beta;      ///< R + B'PB
  Mat omega;     ///< A' - alpha' beta^{-1} B', the transposed closed loop of the greedy gain
  Mat gamma;     ///< Q + alpha' beta^{-1} R beta^{-1} alpha
  Mat script_a;  ///< I ⊗ I - omega ⊗ omega
};

inline PiStepCache build_cache(const Plant& plant, const CostWeights& w, const ValueKernel& p) {
  check_dims(plant, w);
  if (p.p.rows() != plant.nx()) throw DimensionError("build_cache: kernel size mismatch");
  if (!is_psd(p.p)) throw ContractError("build_cache: kernel is not positive semidefinite");

  const Eigen::Index n = plant.nx();
  PiStepCache c;
  c.alpha = plant.b.transpose() * p.p * plant.a;
  c.beta = symmetrize(w.r + plant.b.transpose() * p.p * plant.b);
  const Eigen::LLT<Mat> beta_llt(c.beta);
  const Mat gain = beta_llt.solve(c.alpha);  // beta^{-1} alpha, i.e. -K
  c.omega = plant.a.transpose() - gain.transpose() * plant.b.transpose();
  c.gamma = symmetrize(w.q + gain.transpose() * w.r * gain);
  c.script_a = Mat::Identity(n * n, n * n) - kron(c.omega, c.omega);
  return c;
}

/// P_{i+1} = unvec(script_a(P_i)^{-1} vec(Γ(P_i))). Throws SingularMatrixError when
/// script_a is not invertible to the solver's condition cap.
inline ValueKernel pi_step_vectorized(const Plant& plant, const CostWeights& w,
                                      const ValueKernel& p) {
  const PiStepCache c = build_cache(plant, w, p);
  const LinearSolution sol = solve_linear(c.script_a, vec(c.gamma));
  return ValueKernel(symmetrize(unvec(sol.solution, plant.nx(), plant.nx())));
}

/// Random symmetric direction with Frobenius norm `radius`.
inline Mat random_symmetric_perturbation(Eigen::Index n, double radius, std::uint64_t seed,
                                         std::uint64_t sample) {
  auto rng = stream_engine(seed, Stream::kPerturbation, sample);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Mat d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      d(i, j) = unif(rng);
      d(j, i) = d(i, j);
    }
  }
  const double norm = d.norm();
  if (norm == 0.0) return d;
  return d * (radius / norm);
}

struct ContractionEstimate {
  double ratio = 0.0;  ///< max |P_next - P*| / |ΔP| over accepted samples
  int accepted = 0;
  int skipped = 0;  ///< singular script_a or indefinite P* + ΔP
};

/// Empirical one-step contraction factor of the PI map on the sphere |ΔP| = radius
/// around P*. Deterministic in `seed`.
inline ContractionEstimate contraction_estimate(const Plant& plant, const CostWeights& w,
                                                const ValueKernel& p_star, double radius,
                                                int samples, std::uint64_t seed) {
  if (!(radius > 0.0)) throw DomainError("contraction_estimate: radius must be positive");
  if (samples < 1) throw DomainError("contraction_estimate: need at least one sample");
  ContractionEstimate est;
  for (int s = 0; s < samples; ++s) {
    const Mat delta = random_symmetric_perturbation(plant.nx(), radius, seed,
                                                    static_cast<std::uint64_t>(s));
    const double delta_norm = delta.norm();
    if (delta_norm == 0.0) {
      ++est.skipped;
      continue;
    }
    try {
      const ValueKernel next = pi_step_vectorized(plant, w, ValueKernel(p_star.p + delta));
      est.ratio = std::max(est.ratio, (next.p - p_star.p).norm() / delta_norm);
      ++est.accepted;
    } catch (const SingularMatrixError&) {
      ++est.skipped;
    } catch (const ContractError&) {
      ++est.skipped;
    }
  }
  if (est.accepted == 0) {
    throw NumericError("contraction_estimate: every sample hit a singular or indefinite kernel",
                       samples);
  }
  return est;
}

}  // namespace ddpi
