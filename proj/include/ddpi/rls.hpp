#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddpi/matops.hpp"

namespace ddpi {

/// Recursive least-squares estimate of theta = [A B] with information matrix H.
struct RlsState {
  Mat theta_hat;  ///< n_x x (n_x + n_u)
  Mat h;          ///< (n_x + n_u) square, SPD
  int t = 0;

  RlsState() = default;
  RlsState(Mat theta0, Mat h0) : theta_hat(std::move(theta0)), h(std::move(h0)) {
    require_square(h, "RlsState H0");
    if (theta_hat.cols() != h.rows()) {
      throw DimensionError("RlsState: theta is " + shape_str(theta_hat) + " but H0 is " +
                           shape_str(h));
    }
    if (!is_symmetric(h) || min_eigenvalue(h) <= 0.0) {
      throw ContractError("RlsState: H0 must be symmetric positive definite");
    }
  }

  static RlsState scaled_identity(Mat theta0, double a) {
    if (!(a > 0.0)) throw ContractError("RlsState: H0 scale must be positive");
    const Eigen::Index n = theta0.cols();
    return RlsState(std::move(theta0), a * Mat::Identity(n, n));
  }
};

/// H' = H + d d';  theta' = theta + (x_next - theta d) d' H'^{-1}.
inline RlsState rls_update(const RlsState& s, const Vec& d, const Vec& x_next) {
  if (d.size() != s.h.rows() || x_next.size() != s.theta_hat.rows()) {
    throw DimensionError("rls_update: regressor/target length mismatch");
  }
  RlsState out = s;
  out.h = symmetrize(s.h + d * d.transpose());
  const Vec gain = out.h.llt().solve(d);  // H'^{-1} d, H' symmetric
  out.theta_hat = s.theta_hat + (x_next - s.theta_hat * d) * gain.transpose();
  out.t = s.t + 1;
  return out;
}

/// One regression pair (d_k, x_{k+1}).
struct RegressionSample {
  Vec d;
  Vec x_next;
};

inline Mat information_matrix(const Mat& h0, std::span<const RegressionSample> data) {
  Mat h = h0;
  for (const auto& s : data) h += s.d * s.d.transpose();
  return h;
}

/// Closed form of RLS: (theta0 H0 + Σ x_{k+1} d_k')(H0 + Σ d_k d_k')^{-1}.
inline Mat batch_ls_regularized(const Mat& theta0, const Mat& h0,
                                std::span<const RegressionSample> data) {
  Mat cross = theta0 * h0;
  for (const auto& s : data) cross += s.x_next * s.d.transpose();
  const Mat h = information_matrix(h0, data);
  // theta H = cross  <=>  H theta' = cross'  (H symmetric)
  return h.llt().solve(cross.transpose()).transpose();
}

/// (theta0 - theta) H0 H_t^{-1} + (Σ w_k d_k') H_t^{-1}, the error of RLS after the data.
inline Mat estimation_error_decomposition(const Mat& theta0, const Mat& theta_true, const Mat& h0,
                                          std::span<const RegressionSample> data,
                                          std::span<const Vec> noise) {
  if (noise.size() != data.size()) {
    throw DimensionError("estimation_error_decomposition: noise and data lengths differ");
  }
  Mat acc = (theta0 - theta_true) * h0;
  for (std::size_t k = 0; k < data.size(); ++k) acc += noise[k] * data[k].d.transpose();
  const Mat h = information_matrix(h0, data);
  return h.llt().solve(acc.transpose()).transpose();
}

// ---------------------------------------------------------------------------
// Local persistency

struct PersistencyParams {
  int n_window = 1;    ///< N
  int m_interval = 1;  ///< M
  double alpha = 0.0;  ///< lower bound on every window Gram
};

inline constexpr double kPersistencyEigTol = 1e-10;

/// Minimum over window starts j = M k (0-based) of λ_min(Σ_{i<N} d_{j+i} d_{j+i}').
/// Windows running past the end are skipped; empty when no window fits.
inline std::optional<double> min_window_eigenvalue(std::span<const Vec> data, int n_window,
                                                   int m_interval) {
  if (n_window < 1 || m_interval < 1) throw DomainError("persistency: N and M must be >= 1");
  if (data.empty()) return std::nullopt;
  const Eigen::Index dim = data.front().size();
  std::optional<double> worst;
  for (std::size_t j = 0; j + static_cast<std::size_t>(n_window) <= data.size();
       j += static_cast<std::size_t>(m_interval)) {
    Mat gram = Mat::Zero(dim, dim);
    for (int i = 0; i < n_window; ++i) gram += data[j + i] * data[j + i].transpose();
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(gram, Eigen::EigenvaluesOnly)
                            .eigenvalues()(0);
    worst = worst ? std::min(*worst, lmin) : lmin;
  }
  return worst;
}

inline bool check_local_persistency(std::span<const Vec> data, const PersistencyParams& pers) {
  if (!(pers.alpha > 0.0)) throw DomainError("check_local_persistency: alpha must be positive");
  if (data.size() < static_cast<std::size_t>(pers.n_window)) {
    throw ContractError("check_local_persistency: trace shorter than the window");
  }
  const auto lmin = min_window_eigenvalue(data, pers.n_window, pers.m_interval);
  return lmin && *lmin >= pers.alpha - kPersistencyEigTol;
}

/// Smallest window N <= n_max for which every window Gram is positive definite, with the
/// sharpest alpha for that N.
inline std::optional<PersistencyParams> find_persistency_params(std::span<const Vec> data,
                                                                int m_interval, int n_max) {
  for (int n = 1; n <= n_max && static_cast<std::size_t>(n) <= data.size(); ++n) {
    const auto lmin = min_window_eigenvalue(data, n, m_interval);
    if (lmin && *lmin > kPersistencyEigTol) return PersistencyParams{n, m_interval, *lmin};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Estimation error bounds

struct RlsBoundParams {
  double a = 1.0;  ///< H0 = a I
  PersistencyParams pers;
  double d_bar = 1.0;  ///< sup |d_t|
  int nx = 1;
  int nu = 1;
};

inline double bound_denominator(const RlsBoundParams& p) {
  return std::min(p.a, p.pers.alpha);
}

/// a (M + N) s / (min(a, alpha) t), the decaying initial-error term.
inline double beta_theta(double s0, int t, const RlsBoundParams& p) {
  if (t < 1) throw DomainError("beta_theta: defined for t >= 1");
  return p.a * (p.pers.m_interval + p.pers.n_window) * s0 / (bound_denominator(p) * t);
}

/// (n_x + n_u)(M + N) / min(a, alpha).
inline double eta(const RlsBoundParams& p) {
  return (p.nx + p.nu) * (p.pers.m_interval + p.pers.n_window) / bound_denominator(p);
}

/// d̄ η x, the noise gain.
inline double gamma_theta(double x, const RlsBoundParams& p) {
  if (x < 0.0) throw DomainError("gamma_theta: argument must be nonnegative");
  return p.d_bar * eta(p) * x;
}

enum class NoiseNorm { kPointwise, kEnergy };

/// Largest estimation error over all t >= 0 implied by the bound; noise_level is ‖w‖∞
/// (pointwise) or ‖w‖₂ (energy). Both cases share the same formula.
inline double max_est_error(double theta0_err, const RlsBoundParams& p, double noise_level,
                            NoiseNorm /*kind*/ = NoiseNorm::kPointwise) {
  if (theta0_err < 0.0 || noise_level < 0.0) {
    throw DomainError("max_est_error: inputs must be nonnegative");
  }
  return std::max(theta0_err, beta_theta(theta0_err, 1, p) + p.d_bar * eta(p) * noise_level);
}

enum class Verdict { kPass, kFail, kNotApplicable };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kNotApplicable: return "not-applicable";
  }
  return "?";
}

struct BoundCheck {
  Verdict verdict = Verdict::kNotApplicable;
  int checked = 0;
  int violations = 0;
  double min_slack = 0.0;  ///< min over t of (bound - observed); negative on violation
  std::string reason;
};

/// Checks |θ̂_t - θ| <= β_θ(s0, t) + γ_θ(‖w‖∞) for t = 1..T. err_theta[t-1] is the error
/// after t updates.
inline BoundCheck check_pointwise_noise_bound(std::span<const double> err_theta, double s0,
                                              const RlsBoundParams& p, double w_sup) {
  BoundCheck out;
  const double noise_term = gamma_theta(w_sup, p);
  for (std::size_t i = 0; i < err_theta.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const double slack = beta_theta(s0, t, p) + noise_term - err_theta[i];
    out.min_slack = out.checked == 0 ? slack : std::min(out.min_slack, slack);
    ++out.checked;
    if (slack < 0.0) ++out.violations;
  }
  out.verdict = out.violations == 0 ? Verdict::kPass : Verdict::kFail;
  return out;
}

/// Checks |θ̂_t - θ| <= β_θ(s0, t) + d̄ η ‖w‖₂ / sqrt(t) for t = 1..T.
inline BoundCheck check_energy_noise_bound(std::span<const double> err_theta, double s0,
                                           const RlsBoundParams& p, double w_energy) {
  BoundCheck out;
  const double gain = p.d_bar * eta(p) * w_energy;
  for (std::size_t i = 0; i < err_theta.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const double slack = beta_theta(s0, t, p) + gain / std::sqrt(double(t)) - err_theta[i];
    out.min_slack = out.checked == 0 ? slack : std::min(out.min_slack, slack);
    ++out.checked;
    if (slack < 0.0) ++out.violations;
  }
  out.verdict = out.violations == 0 ? Verdict::kPass : Verdict::kFail;
  return out;
}

/// λ_min(H_t) >= a + floor(t / (M + N)) α at every recorded t. lambda_min[t] belongs to H_t
/// (index 0 is H0). Not applicable unless `data` is locally persistent with p.pers.
inline BoundCheck h_min_eig_growth_check(std::span<const double> lambda_min,
                                         std::span<const double> lambda_max,
                                         std::span<const Vec> data, const RlsBoundParams& p) {
  BoundCheck out;
  if (data.size() < static_cast<std::size_t>(p.pers.n_window) || !(p.pers.alpha > 0.0) ||
      !check_local_persistency(data, p.pers)) {
    out.reason = "data not locally persistent with the given (N, M, alpha)";
    return out;
  }
  const int period = p.pers.m_interval + p.pers.n_window;
  for (std::size_t t = 0; t < lambda_min.size(); ++t) {
    const double bound = p.a + std::floor(double(t) / period) * p.pers.alpha;
    // eigenvalues of H_t carry rounding error proportional to |H_t|
    const double tol = 1e-12 * std::max(1.0, t < lambda_max.size() ? lambda_max[t] : 1.0);
    const double slack = lambda_min[t] - bound;
    out.min_slack = out.checked == 0 ? slack : std::min(out.min_slack, slack);
    ++out.checked;
    if (slack < -tol) ++out.violations;
  }
  out.verdict = out.violations == 0 ? Verdict::kPass : Verdict::kFail;
  return out;
}

}  // namespace ddpi
