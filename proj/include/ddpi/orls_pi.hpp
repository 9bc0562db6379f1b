#pragma once

// Online identification-based policy iteration: RLS identifies [A B] from closed-loop
// data while each step evaluates the current gain on the estimated model and improves it.
// The policy-gradient variant replaces the improvement step by one gradient step.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddpi/lqr.hpp"
#include "ddpi/noise.hpp"
#include "ddpi/random.hpp"
#include "ddpi/rls.hpp"

namespace ddpi {

/// The current gain is not stabilizing for the current model estimate.
class CertaintyEquivalenceError : public StabilizationError {
 public:
  using StabilizationError::StabilizationError;
};

enum class ExcitationMode { kOnPolicy, kOffPolicy };

struct OrlsPiConfig {
  Plant true_plant;  ///< simulator only; the loop never reads it
  CostWeights weights;
  Mat theta0;  ///< [Â0 B̂0]
  Mat h0;      ///< initial information matrix, SPD
  Vec x0;
  double dither_bound = 0.0;
  ExcitationMode excitation = ExcitationMode::kOnPolicy;
  std::optional<Gain> off_policy_gain;  ///< defaults to the initial estimate's LQR gain
  std::optional<Gain> initial_gain;     ///< defaults to the initial estimate's LQR gain
  int horizon = 1;
  std::uint64_t seed = 0;
  std::optional<double> pg_stepsize;
  double state_cap = 1e9;

  Eigen::Index nx() const { return true_plant.nx(); }
  Eigen::Index nu() const { return true_plant.nu(); }
};

struct TraceStep {
  int t = 0;
  Vec x, u, e, w, d, x_next;
  Mat theta_hat;  ///< θ̂_t, after the RLS update of step t
  Mat p_hat;      ///< P̂_t, evaluation of K̂_t on θ̂_{t-1}
  Mat k_hat;      ///< K̂_t, the gain applied at step t
  double err_theta = 0.0;
  double err_p = 0.0;
  double err_k = 0.0;
  double lambda_min_h = 0.0;
  double lambda_max_h = 0.0;
  bool breakdown = false;
};

struct IterateTrace {
  std::vector<TraceStep> steps;
  Mat theta_true;
  Mat theta0;
  Mat h0;
  ValueKernel p_star;
  Gain k_star;
  int breakdown_events = 0;
  double lambda_min_h0 = 0.0;
  double lambda_max_h0 = 0.0;
  Mat excitation_gain;  ///< fixed behaviour gain in off-policy runs, empty otherwise

  std::vector<RegressionSample> regression_samples() const {
    std::vector<RegressionSample> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back({s.d, s.x_next});
    return out;
  }
  std::vector<Vec> regressors() const {
    std::vector<Vec> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.d);
    return out;
  }
  std::vector<Vec> noise() const {
    std::vector<Vec> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.w);
    return out;
  }
  std::vector<double> err_theta() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.err_theta);
    return out;
  }
  std::vector<double> err_p() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.err_p);
    return out;
  }
  /// λ_min(H_t) for t = 0..T.
  std::vector<double> lambda_min_h() const {
    std::vector<double> out{lambda_min_h0};
    for (const auto& s : steps) out.push_back(s.lambda_min_h);
    return out;
  }
  std::vector<double> lambda_max_h() const {
    std::vector<double> out{lambda_max_h0};
    for (const auto& s : steps) out.push_back(s.lambda_max_h);
    return out;
  }
};

/// Solves P̂ = Q + K̂'RK̂ + (Â + B̂K̂)'P̂(Â + B̂K̂) on the estimated model.
inline ValueKernel ce_policy_evaluation(const Mat& theta_hat, const CostWeights& w,
                                        const Gain& k_hat) {
  const Plant model = Plant::from_theta(theta_hat, w.q.rows());
  try {
    return policy_evaluation(model, w, k_hat);
  } catch (const StabilizationError& e) {
    throw CertaintyEquivalenceError(
        std::string("certainty-equivalence breakdown: ") + e.what(), e.spectral_radius());
  } catch (const SingularMatrixError& e) {
    throw CertaintyEquivalenceError(
        std::string("certainty-equivalence breakdown: ") + e.what(), 1.0);
  }
}

inline Vec excitation_input(ExcitationMode mode, const Gain& k_hat,
                            const std::optional<Gain>& k_fixed, const Vec& x, const Vec& e) {
  if (mode == ExcitationMode::kOnPolicy) return k_hat.k * x + e;
  if (!k_fixed) throw ConfigError("off-policy excitation requires a fixed gain");
  return k_fixed->k * x + e;
}

/// Entries i.i.d. uniform on [-e_bar, e_bar], reproducible from (seed, t).
inline Vec dither_sample(std::uint64_t seed, double e_bar, int n_u, int t) {
  if (e_bar < 0.0) throw DomainError("dither_sample: bound must be nonnegative");
  if (e_bar == 0.0) return Vec::Zero(n_u);
  auto rng = stream_engine(seed, Stream::kDither, static_cast<std::uint64_t>(t));
  std::uniform_real_distribution<double> unif(-e_bar, e_bar);
  Vec e(n_u);
  for (int i = 0; i < n_u; ++i) e(i) = unif(rng);
  return e;
}

/// Direction of the certainty-equivalent LQR cost gradient in K:
/// 2((R + B̂'P̂B̂)K̂ + B̂'P̂Â).
inline Mat pg_gradient(const Plant& model, const CostWeights& w, const ValueKernel& p,
                       const Gain& k) {
  const Mat btp = model.b.transpose() * p.p;
  return 2.0 * ((w.r + btp * model.b) * k.k + btp * model.a);
}

namespace detail {

inline void validate(const OrlsPiConfig& cfg) {
  check_dims(cfg.true_plant, cfg.weights);
  const Eigen::Index nx = cfg.nx(), nd = cfg.nx() + cfg.nu();
  if (cfg.theta0.rows() != nx || cfg.theta0.cols() != nd) {
    throw ConfigError("theta0 must be " + std::to_string(nx) + "x" + std::to_string(nd));
  }
  if (cfg.h0.rows() != nd || cfg.h0.cols() != nd) {
    throw ConfigError("H0 must be " + std::to_string(nd) + "x" + std::to_string(nd));
  }
  if (cfg.x0.size() != nx) throw ConfigError("x0 must have length " + std::to_string(nx));
  if (!(cfg.dither_bound >= 0.0)) throw ConfigError("dither bound must be nonnegative");
  if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(cfg.state_cap > 0.0)) throw ConfigError("state cap must be positive");
}

/// Initial gain: user override or the LQR gain of the initial estimate.
inline Gain initial_gain(const OrlsPiConfig& cfg) {
  if (cfg.initial_gain) return *cfg.initial_gain;
  const Plant model = Plant::from_theta(cfg.theta0, cfg.nx());
  try {
    return optimal_lqr(model, cfg.weights, 1e-12).k;
  } catch (const NotStabilizableError&) {
    throw ConfigError("initial estimate (Â0, B̂0) admits no Riccati solution");
  }
}

enum class GainUpdate { kPolicyIteration, kPolicyGradient };

inline IterateTrace run_loop(const OrlsPiConfig& cfg, const NoiseSchedule& schedule,
                             GainUpdate update) {
  validate(cfg);
  if (schedule.dimension != cfg.nx()) {
    throw ConfigError("noise schedule dimension does not match the state dimension");
  }
  double stepsize = 0.0;
  if (update == GainUpdate::kPolicyGradient) {
    if (!cfg.pg_stepsize) throw ConfigError("policy-gradient run requires a stepsize");
    stepsize = *cfg.pg_stepsize;
  }

  const Eigen::Index nx = cfg.nx();
  const int nu = static_cast<int>(cfg.nu());
  const CostWeights& w = cfg.weights;
  const Plant& plant = cfg.true_plant;

  IterateTrace trace;
  trace.theta_true = plant.theta();
  trace.theta0 = cfg.theta0;
  trace.h0 = cfg.h0;
  {
    LqrSolution opt = optimal_lqr(plant, w, 1e-12);
    trace.p_star = std::move(opt.p);
    trace.k_star = std::move(opt.k);
  }

  Gain k_hat = initial_gain(cfg);
  std::optional<Gain> k_fixed = cfg.off_policy_gain;
  if (cfg.excitation == ExcitationMode::kOffPolicy && !k_fixed) k_fixed = initial_gain(cfg);
  if (cfg.excitation == ExcitationMode::kOffPolicy) trace.excitation_gain = k_fixed->k;

  RlsState rls(cfg.theta0, cfg.h0);
  {
    Eigen::SelfAdjointEigenSolver<Mat> eig(rls.h, Eigen::EigenvaluesOnly);
    trace.lambda_min_h0 = eig.eigenvalues()(0);
    trace.lambda_max_h0 = eig.eigenvalues()(eig.eigenvalues().size() - 1);
  }
  std::optional<ValueKernel> p_prev;
  Vec x = cfg.x0;
  trace.steps.reserve(static_cast<std::size_t>(cfg.horizon));

  for (int t = 1; t <= cfg.horizon; ++t) {
    TraceStep step;
    step.t = t;

    // (i) evaluate K̂_t on θ̂_{t-1}
    ValueKernel p_hat;
    try {
      p_hat = ce_policy_evaluation(rls.theta_hat, w, k_hat);
    } catch (const CertaintyEquivalenceError&) {
      step.breakdown = true;
      ++trace.breakdown_events;
      try {
        LqrSolution anchor = optimal_lqr(Plant::from_theta(rls.theta_hat, nx), w, 1e-10);
        k_hat = anchor.k;
        p_hat = ce_policy_evaluation(rls.theta_hat, w, k_hat);
      } catch (const Error&) {
        if (!p_prev) {
          throw ConfigError("initial gain is not stabilizing for the initial estimate");
        }
        p_hat = *p_prev;
      }
    }

    // (ii) excite
    step.e = dither_sample(cfg.seed, cfg.dither_bound, nu, t);
    step.u = excitation_input(cfg.excitation, k_hat, k_fixed, x, step.e);

    // (iii) true plant
    step.w = sample_noise(schedule, t);
    step.x = x;
    step.x_next = plant.a * x + plant.b * step.u + step.w;
    const double x_norm = step.x_next.norm();
    if (!std::isfinite(x_norm) || x_norm > cfg.state_cap) {
      throw DivergenceError("state norm " + std::to_string(x_norm) + " exceeded cap " +
                                std::to_string(cfg.state_cap) + " at step " + std::to_string(t),
                            t, x_norm);
    }

    // (iv) identify
    step.d = Vec(nx + nu);
    step.d << step.x, step.u;
    rls = rls_update(rls, step.d, step.x_next);

    // (v) improve
    const Plant model = Plant::from_theta(rls.theta_hat, nx);
    Gain k_next;
    if (update == GainUpdate::kPolicyIteration) {
      k_next = policy_improvement(model, w, p_hat);
    } else {
      k_next = Gain(k_hat.k - stepsize * pg_gradient(model, w, p_hat, k_hat));
    }

    step.theta_hat = rls.theta_hat;
    step.p_hat = p_hat.p;
    step.k_hat = k_hat.k;
    step.err_theta = (rls.theta_hat - trace.theta_true).norm();
    step.err_p = (p_hat.p - trace.p_star.p).norm();
    step.err_k = (k_hat.k - trace.k_star.k).norm();
    {
      Eigen::SelfAdjointEigenSolver<Mat> eig(rls.h, Eigen::EigenvaluesOnly);
      step.lambda_min_h = eig.eigenvalues()(0);
      step.lambda_max_h = eig.eigenvalues()(eig.eigenvalues().size() - 1);
    }
    trace.steps.push_back(std::move(step));

    p_prev = std::move(p_hat);
    k_hat = std::move(k_next);
    x = trace.steps.back().x_next;
  }
  return trace;
}

}  // namespace detail

/// ORLS+PI. Breakdowns of certainty equivalence re-anchor the gain on the current
/// estimate's Riccati solution and are counted, never fatal. Throws DivergenceError when
/// |x_t| exceeds cfg.state_cap.
inline IterateTrace orls_pi_run(const OrlsPiConfig& cfg, const NoiseSchedule& schedule) {
  return detail::run_loop(cfg, schedule, detail::GainUpdate::kPolicyIteration);
}

/// ORLS+PG baseline: same identification path, gradient step on the gain.
inline IterateTrace orls_pg_run(const OrlsPiConfig& cfg, const NoiseSchedule& schedule) {
  return detail::run_loop(cfg, schedule, detail::GainUpdate::kPolicyGradient);
}

/// max{ (|B| ē + ‖w‖∞) / (1 - K̄_cl), |x0| }, with K̄_cl a bound on the closed-loop norm.
inline double state_bound(double b_norm, double e_bar, double w_sup, double k_cl_bar,
                          double x0_norm) {
  if (!(k_cl_bar >= 0.0 && k_cl_bar < 1.0)) {
    throw DomainError("state_bound: closed-loop bound must lie in [0, 1)");
  }
  return std::max((b_norm * e_bar + w_sup) / (1.0 - k_cl_bar), x0_norm);
}

/// (1 + K̄) x̄ + ē
inline double data_bound(double k_bar, double x_bar, double e_bar) {
  if (k_bar < 0.0 || x_bar < 0.0 || e_bar < 0.0) {
    throw DomainError("data_bound: inputs must be nonnegative");
  }
  return (1.0 + k_bar) * x_bar + e_bar;
}

}  // namespace ddpi
