#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ddpi/harness/config.hpp"
#include "ddpi/noise.hpp"
#include "ddpi/orls_pi.hpp"
#include "ddpi/rls.hpp"

namespace ddpi::harness {

/// Output could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

struct RunSummary {
  std::uint64_t seed = 0;
  std::string method = "pi";
  std::string schedule;
  int horizon = 0;
  double final_err_p = 0.0;
  double final_err_theta = 0.0;
  double final_err_k = 0.0;
  double initial_err_theta = 0.0;
  int breakdown_events = 0;
  double d_bar = 0.0;
  double w_sup = 0.0;
  double w_energy = 0.0;
  double e_sup = 0.0;
  double x_sup = 0.0;
  std::optional<PersistencyParams> persistency;
  double max_est_error_pointwise = 0.0;  ///< only meaningful with persistency
  double max_est_error_energy = 0.0;
  BoundCheck pointwise_bound;  ///< |θ̂_t - θ| <= β_θ + γ_θ(‖w‖∞)
  BoundCheck energy_bound;     ///< |θ̂_t - θ| <= β_θ + d̄η‖w‖₂/√t
  BoundCheck h_growth;         ///< λ_min(H_t) >= a + ⌊t/(M+N)⌋α
  BoundCheck noise_sums;       ///< Σ|w_k| <= t‖w‖∞ and <= √t‖w‖₂
  BoundCheck state_bound;      ///< sup|x_t| <= state_bound with realized closed-loop norm
  BoundCheck data_bound;       ///< sup|d_t| <= (1 + K̄)x̄ + ē
  double wall_clock_seconds = 0.0;
};

/// Gain applied to the true plant at step s.
inline const Mat& applied_gain(const TraceStep& s, const IterateTrace& trace) {
  return trace.excitation_gain.size() > 0 ? trace.excitation_gain : s.k_hat;
}

inline bool schedule_is_energy_bounded(const ScheduleSpec& s) {
  return s.kind == ScheduleKind::kEB || s.kind == ScheduleKind::kCustom ||
         (s.kind == ScheduleKind::kConstant && s.magnitude == 0.0);
}

/// Evaluates every applicable bound on a finished run.
inline RunSummary summarize(const IterateTrace& trace, const ExperimentConfig& cfg,
                            std::uint64_t seed, const std::string& method) {
  RunSummary s;
  s.seed = seed;
  s.method = method;
  s.schedule = to_string(cfg.schedule.kind);
  s.horizon = static_cast<int>(trace.steps.size());
  s.breakdown_events = trace.breakdown_events;
  s.initial_err_theta = (trace.theta0 - trace.theta_true).norm();
  if (!trace.steps.empty()) {
    s.final_err_p = trace.steps.back().err_p;
    s.final_err_theta = trace.steps.back().err_theta;
    s.final_err_k = trace.steps.back().err_k;
  }

  const std::vector<Vec> noise = trace.noise();
  const std::vector<Vec> data = trace.regressors();
  const std::vector<double> err_theta = trace.err_theta();
  s.w_sup = sup_norm(noise);
  s.w_energy = energy_norm(noise);
  double k_bar = 0.0;
  double k_cl = 0.0;
  for (const auto& st : trace.steps) {
    s.d_bar = std::max(s.d_bar, st.d.norm());
    s.e_sup = std::max(s.e_sup, st.e.norm());
    s.x_sup = std::max({s.x_sup, st.x.norm(), st.x_next.norm()});
    const Mat& k = applied_gain(st, trace);
    k_bar = std::max(k_bar, k.norm());
    const Mat f = cfg.plant.a + cfg.plant.b * k;
    k_cl = std::max(k_cl, Eigen::JacobiSVD<Mat>(f).singularValues()(0));
  }

  s.noise_sums.checked = static_cast<int>(noise.size());
  if (noise_sum_inequalities_hold(noise)) {
    s.noise_sums.verdict = Verdict::kPass;
  } else {
    s.noise_sums.verdict = Verdict::kFail;
    s.noise_sums.violations = 1;
  }

  s.persistency = find_persistency_params(data, cfg.persistency_interval(),
                                          cfg.persistency_max_window());
  if (s.persistency) {
    RlsBoundParams p;
    p.a = cfg.h0_scale;
    p.pers = *s.persistency;
    p.d_bar = s.d_bar;
    p.nx = static_cast<int>(cfg.plant.nx());
    p.nu = static_cast<int>(cfg.plant.nu());
    s.max_est_error_pointwise = max_est_error(s.initial_err_theta, p, s.w_sup, NoiseNorm::kPointwise);
    s.max_est_error_energy = max_est_error(s.initial_err_theta, p, s.w_energy, NoiseNorm::kEnergy);
    s.pointwise_bound = check_pointwise_noise_bound(err_theta, s.initial_err_theta, p, s.w_sup);
    if (schedule_is_energy_bounded(cfg.schedule)) {
      s.energy_bound = check_energy_noise_bound(err_theta, s.initial_err_theta, p, s.w_energy);
    } else {
      s.energy_bound.reason = "schedule is not energy bounded";
    }
    s.h_growth = h_min_eig_growth_check(trace.lambda_min_h(), trace.lambda_max_h(), data, p);
  } else {
    const std::string why = "no local persistency found with M=" +
                            std::to_string(cfg.persistency_interval()) + ", N<=" +
                            std::to_string(cfg.persistency_max_window());
    s.pointwise_bound.reason = why;
    s.energy_bound.reason = why;
    s.h_growth.reason = why;
  }

  if (k_cl < 1.0) {
    const double bound = ddpi::state_bound(cfg.plant.b.norm(), s.e_sup, s.w_sup, k_cl,
                                           trace.steps.empty() ? 0.0 : trace.steps.front().x.norm());
    s.state_bound.checked = 1;
    s.state_bound.min_slack = bound - s.x_sup;
    s.state_bound.violations = s.x_sup <= bound * (1.0 + 1e-12) ? 0 : 1;
    s.state_bound.verdict = s.state_bound.violations == 0 ? Verdict::kPass : Verdict::kFail;
  } else {
    s.state_bound.reason = "realized closed-loop spectral norm >= 1";
  }
  {
    const double bound = ddpi::data_bound(k_bar, s.x_sup, s.e_sup);
    s.data_bound.checked = 1;
    s.data_bound.min_slack = bound - s.d_bar;
    s.data_bound.violations = s.d_bar <= bound * (1.0 + 1e-12) ? 0 : 1;
    s.data_bound.verdict = s.data_bound.violations == 0 ? Verdict::kPass : Verdict::kFail;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Emission

/// Shortest decimal with at least 17 significant digits of precision (round-trippable).
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void ensure_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

inline const char* kTraceCsvHeader =
    "t,err_p,err_theta,err_k,x_norm,u_norm,w_norm,lambda_min_h,breakdown_flag\n";

inline void emit_trace_csv(const IterateTrace& trace, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << kTraceCsvHeader;
  for (const auto& s : trace.steps) {
    out << s.t << ',' << format_double(s.err_p) << ',' << format_double(s.err_theta) << ','
        << format_double(s.err_k) << ',' << format_double(s.x.norm()) << ','
        << format_double(s.u.norm()) << ',' << format_double(s.w.norm()) << ','
        << format_double(s.lambda_min_h) << ',' << (s.breakdown ? 1 : 0) << '\n';
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

inline nlohmann::json to_json(const BoundCheck& b) {
  nlohmann::json j;
  j["verdict"] = to_string(b.verdict);
  if (b.verdict != Verdict::kNotApplicable) {
    j["checked"] = b.checked;
    j["violations"] = b.violations;
    j["min_slack"] = b.min_slack;
  }
  if (!b.reason.empty()) j["reason"] = b.reason;
  return j;
}

inline nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["method"] = s.method;
  j["schedule"] = s.schedule;
  j["horizon"] = s.horizon;
  j["final_err_p"] = s.final_err_p;
  j["final_err_theta"] = s.final_err_theta;
  j["final_err_k"] = s.final_err_k;
  j["initial_err_theta"] = s.initial_err_theta;
  j["breakdown_events"] = s.breakdown_events;
  j["d_bar"] = s.d_bar;
  j["w_sup_norm"] = s.w_sup;
  j["w_energy_norm"] = s.w_energy;
  j["e_sup"] = s.e_sup;
  j["x_sup"] = s.x_sup;
  if (s.persistency) {
    j["persistency"] = {{"found", true},
                        {"n_window", s.persistency->n_window},
                        {"m_interval", s.persistency->m_interval},
                        {"alpha", s.persistency->alpha}};
    j["max_est_error"] = {{"pointwise", s.max_est_error_pointwise},
                          {"energy", s.max_est_error_energy}};
  } else {
    j["persistency"] = {{"found", false}};
  }
  j["bounds"] = {{"rls_pointwise_noise", to_json(s.pointwise_bound)},
                 {"rls_energy_noise", to_json(s.energy_bound)},
                 {"h_min_eig_growth", to_json(s.h_growth)},
                 {"noise_sum_inequalities", to_json(s.noise_sums)},
                 {"state_bound", to_json(s.state_bound)},
                 {"data_bound", to_json(s.data_bound)}};
  j["wall_clock_seconds"] = s.wall_clock_seconds;
  return j;
}

inline void emit_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

inline void emit_summary_json(const RunSummary& s, const std::filesystem::path& path) {
  emit_json(to_json(s), path);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-timestep median and min/max envelope across seeds.
struct Aggregate {
  std::vector<double> err_p_median, err_p_min, err_p_max;
  std::vector<double> err_theta_median, err_theta_min, err_theta_max;
};

inline Aggregate aggregate(std::span<const IterateTrace> traces) {
  Aggregate a;
  if (traces.empty()) return a;
  std::size_t len = traces.front().steps.size();
  for (const auto& t : traces) len = std::min(len, t.steps.size());
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> p, th;
    for (const auto& t : traces) {
      p.push_back(t.steps[i].err_p);
      th.push_back(t.steps[i].err_theta);
    }
    a.err_p_median.push_back(median(p));
    a.err_p_min.push_back(*std::min_element(p.begin(), p.end()));
    a.err_p_max.push_back(*std::max_element(p.begin(), p.end()));
    a.err_theta_median.push_back(median(th));
    a.err_theta_min.push_back(*std::min_element(th.begin(), th.end()));
    a.err_theta_max.push_back(*std::max_element(th.begin(), th.end()));
  }
  return a;
}

inline void emit_aggregate_csv(const Aggregate& a, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "t,err_p_median,err_p_min,err_p_max,err_theta_median,err_theta_min,err_theta_max\n";
  for (std::size_t i = 0; i < a.err_p_median.size(); ++i) {
    out << (i + 1) << ',' << format_double(a.err_p_median[i]) << ','
        << format_double(a.err_p_min[i]) << ',' << format_double(a.err_p_max[i]) << ','
        << format_double(a.err_theta_median[i]) << ',' << format_double(a.err_theta_min[i])
        << ',' << format_double(a.err_theta_max[i]) << '\n';
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

/// First step t with err_p <= threshold, if any.
inline std::optional<int> first_step_below(const IterateTrace& trace, double threshold) {
  for (const auto& s : trace.steps) {
    if (s.err_p <= threshold) return s.t;
  }
  return std::nullopt;
}

}  // namespace ddpi::harness
