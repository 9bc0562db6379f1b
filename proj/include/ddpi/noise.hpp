#pragma once

// Adversarial process-noise schedules. Only the magnitude |w_t| is prescribed; the
// direction is drawn uniformly on the unit sphere from a stream keyed by (seed, t).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include "ddpi/matops.hpp"
#include "ddpi/random.hpp"

namespace ddpi {

enum class ScheduleKind {
  kPB1,       ///< 0.5/t + 0.5
  kPB2,       ///< 0.5/t
  kEB,        ///< 0.5/t^2
  kConstant,  ///< fixed magnitude c
  kCustom,    ///< table t -> magnitude, zero for unlisted steps
};

struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kEB;
  int dimension = 1;
  std::uint64_t seed = 0;
  double constant = 0.0;
  std::map<int, double> table;

  static NoiseSchedule pb1(int n, std::uint64_t seed) { return {ScheduleKind::kPB1, n, seed, 0.0, {}}; }
  static NoiseSchedule pb2(int n, std::uint64_t seed) { return {ScheduleKind::kPB2, n, seed, 0.0, {}}; }
  static NoiseSchedule eb(int n, std::uint64_t seed) { return {ScheduleKind::kEB, n, seed, 0.0, {}}; }
  static NoiseSchedule constant_magnitude(int n, std::uint64_t seed, double c) {
    if (c < 0.0) throw ContractError("noise schedule: magnitude must be nonnegative");
    return {ScheduleKind::kConstant, n, seed, c, {}};
  }
  static NoiseSchedule custom(int n, std::uint64_t seed, std::map<int, double> table) {
    for (const auto& [t, m] : table) {
      if (t < 1 || !(m >= 0.0) || !std::isfinite(m)) {
        throw ContractError("noise schedule: entry t=" + std::to_string(t) +
                            " must have t >= 1 and a finite nonnegative magnitude");
      }
    }
    return {ScheduleKind::kCustom, n, seed, 0.0, std::move(table)};
  }
};

inline const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::kPB1: return "PB1";
    case ScheduleKind::kPB2: return "PB2";
    case ScheduleKind::kEB: return "EB";
    case ScheduleKind::kConstant: return "constant";
    case ScheduleKind::kCustom: return "custom";
  }
  return "?";
}

inline double magnitude_at(const NoiseSchedule& s, int t) {
  if (t < 1) throw DomainError("magnitude_at: noise schedules are indexed from t = 1");
  const double td = t;
  switch (s.kind) {
    case ScheduleKind::kPB1: return 0.5 / td + 0.5;
    case ScheduleKind::kPB2: return 0.5 / td;
    case ScheduleKind::kEB: return 0.5 / (td * td);
    case ScheduleKind::kConstant: return s.constant;
    case ScheduleKind::kCustom: {
      const auto it = s.table.find(t);
      return it == s.table.end() ? 0.0 : it->second;
    }
  }
  return 0.0;
}

/// Uniform direction on the unit sphere in R^n for stream (seed, t).
inline Vec unit_direction(int n, std::uint64_t seed, int t) {
  auto rng = stream_engine(seed, Stream::kNoise, static_cast<std::uint64_t>(t));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  double norm = 0.0;
  do {
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

inline Vec sample_noise(const NoiseSchedule& s, int t) {
  const double mag = magnitude_at(s, t);
  if (mag == 0.0) return Vec::Zero(s.dimension);
  return mag * unit_direction(s.dimension, s.seed, t);
}

/// sup_t |w_t|
inline double sup_norm(std::span<const Vec> trace) {
  double out = 0.0;
  for (const auto& w : trace) out = std::max(out, w.norm());
  return out;
}

/// Σ_t |w_t| (sum of Euclidean norms, not a root-sum-of-squares)
inline double energy_norm(std::span<const Vec> trace) {
  double out = 0.0;
  for (const auto& w : trace) out += w.norm();
  return out;
}

/// Σ_{k<=t}|w_k| <= t ‖w‖∞ and Σ_{k<=t}|w_k| <= sqrt(t) sqrt(Σ_{k<=t}|w_k|²) <= sqrt(t) ‖w‖₂
/// for every prefix of the trace.
inline bool noise_sum_inequalities_hold(std::span<const Vec> trace) {
  const double sup = sup_norm(trace);
  const double energy = energy_norm(trace);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double n = trace[k].norm();
    sum += n;
    sum_sq += n * n;
    const double t = double(k + 1);
    const double slack = 1e-12 * std::max(1.0, sum);
    if (sum > t * sup + slack) return false;
    const double cs = std::sqrt(t) * std::sqrt(sum_sq);
    if (sum > cs + slack) return false;
    if (cs > std::sqrt(t) * energy + slack) return false;
  }
  return true;
}

/// Two-column CSV "t,magnitude" (an optional non-numeric header line is skipped).
inline NoiseSchedule load_custom_schedule_csv(const std::string& path, int n,
                                              std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open custom noise schedule");
  std::map<int, double> table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    long long t = 0;
    double m = 0.0;
    if (!(row >> t >> m)) {
      if (line_no == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 't,magnitude'");
    }
    if (t < 1 || !(m >= 0.0) || !std::isfinite(m)) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": t must be >= 1 and magnitude finite and nonnegative");
    }
    table[static_cast<int>(t)] = m;
  }
  return NoiseSchedule::custom(n, seed, std::move(table));
}

}  // namespace ddpi
