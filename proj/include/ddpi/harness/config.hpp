#pragma once

// JSON experiment configuration. Matrices are row-major nested arrays. The schema lives
// in configs/schema.json; parse_config enforces the same rules and reports the offending
// field on failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddpi/harness/presets.hpp"
#include "ddpi/noise.hpp"
#include "ddpi/orls_pi.hpp"

namespace ddpi::harness {

using json = nlohmann::json;

enum class Preset { kNone, kPaper51, kPaper52 };
enum class InitRule { kAdditive, kMultiplicative };

inline const char* to_string(Preset p) {
  switch (p) {
    case Preset::kNone: return "none";
    case Preset::kPaper51: return "paper_5_1";
    case Preset::kPaper52: return "paper_5_2";
  }
  return "?";
}

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kEB;
  double magnitude = 0.0;          // constant schedules
  std::string path;                // custom schedules, as written in the config
  std::map<int, double> table;     // custom schedules, loaded
};

struct ExperimentConfig {
  std::string name;
  Preset preset = Preset::kNone;
  Plant plant;
  CostWeights weights;
  InitRule init_rule = InitRule::kAdditive;
  double a_param = 0.0;  ///< offset (additive) or factor (multiplicative) applied to A
  double b_param = 0.0;  ///< same for B
  double h0_scale = 1.0;
  ScheduleSpec schedule;
  int horizon = 1;
  std::vector<std::uint64_t> seeds;
  ExcitationMode excitation = ExcitationMode::kOnPolicy;
  std::optional<Mat> off_policy_gain;
  double dither_bound = 0.0;
  std::optional<double> pg_stepsize;
  Vec x0;
  std::string output_dir = "out";
  double state_cap = 1e9;
  int persistency_m = 0;      ///< 0: n_x + n_u
  int persistency_n_max = 0;  ///< 0: 10 (n_x + n_u)

  Mat theta0() const {
    const Eigen::Index nx = plant.nx(), nu = plant.nu();
    Mat a_hat, b_hat;
    if (init_rule == InitRule::kAdditive) {
      a_hat = plant.a + a_param * Mat::Identity(nx, nx);
      b_hat = plant.b + b_param * Mat::Identity(nx, nu);
    } else {
      a_hat = a_param * plant.a;
      b_hat = b_param * plant.b;
    }
    Mat theta(nx, nx + nu);
    theta << a_hat, b_hat;
    return theta;
  }

  NoiseSchedule noise(std::uint64_t seed) const {
    const int n = static_cast<int>(plant.nx());
    switch (schedule.kind) {
      case ScheduleKind::kPB1: return NoiseSchedule::pb1(n, seed);
      case ScheduleKind::kPB2: return NoiseSchedule::pb2(n, seed);
      case ScheduleKind::kEB: return NoiseSchedule::eb(n, seed);
      case ScheduleKind::kConstant: return NoiseSchedule::constant_magnitude(n, seed, schedule.magnitude);
      case ScheduleKind::kCustom: return NoiseSchedule::custom(n, seed, schedule.table);
    }
    throw ConfigError("unknown schedule kind");
  }

  OrlsPiConfig run_config(std::uint64_t seed) const {
    OrlsPiConfig c;
    c.true_plant = plant;
    c.weights = weights;
    c.theta0 = theta0();
    const Eigen::Index nd = plant.nx() + plant.nu();
    c.h0 = h0_scale * Mat::Identity(nd, nd);
    c.x0 = x0.size() == 0 ? Vec::Zero(plant.nx()) : x0;
    c.dither_bound = dither_bound;
    c.excitation = excitation;
    if (off_policy_gain) c.off_policy_gain = Gain(*off_policy_gain);
    c.horizon = horizon;
    c.seed = seed;
    c.pg_stepsize = pg_stepsize;
    c.state_cap = state_cap;
    return c;
  }

  int persistency_interval() const {
    return persistency_m > 0 ? persistency_m : static_cast<int>(plant.nx() + plant.nu());
  }
  int persistency_max_window() const {
    return persistency_n_max > 0 ? persistency_n_max
                                 : static_cast<int>(10 * (plant.nx() + plant.nu()));
  }
};

namespace detail {

[[noreturn]] inline void field_error(const std::string& field, const std::string& msg) {
  throw ConfigError("field '" + field + "': " + msg);
}

inline double read_number(const json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(field, "must be finite");
  return v;
}

inline long long read_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) field_error(field, "expected an integer");
  return j.get<long long>();
}

inline std::string read_string(const json& j, const std::string& field) {
  if (!j.is_string()) field_error(field, "expected a string");
  return j.get<std::string>();
}

inline Mat read_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) field_error(field, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) field_error(field + "[0]", "expected a non-empty row");
  const std::size_t cols = j[0].size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string row_field = field + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != cols) {
      field_error(row_field, "expected a row of " + std::to_string(cols) + " numbers");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          read_number(j[i][k], row_field + "[" + std::to_string(k) + "]");
    }
  }
  return m;
}

inline Vec read_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) field_error(field, "expected a non-empty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = read_number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) {
      field_error(where.empty() ? key : where + "." + key, "unknown field");
    }
  }
}

inline ScheduleKind parse_schedule_kind(const std::string& s, const std::string& field) {
  if (s == "PB1") return ScheduleKind::kPB1;
  if (s == "PB2") return ScheduleKind::kPB2;
  if (s == "EB") return ScheduleKind::kEB;
  if (s == "constant") return ScheduleKind::kConstant;
  if (s == "custom") return ScheduleKind::kCustom;
  field_error(field, "unknown schedule kind '" + s + "' (PB1, PB2, EB, constant, custom)");
}

}  // namespace detail

/// Builds an experiment from parsed JSON. `base_dir` resolves relative custom-schedule paths.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown(j, "", {"name", "preset", "plant", "weights", "initialization", "schedule",
                         "horizon", "seeds", "excitation", "dither_bound", "pg_stepsize", "x0",
                         "output_dir", "state_cap", "persistency"});
  ExperimentConfig cfg;

  if (!j.contains("name")) field_error("name", "required");
  cfg.name = read_string(j["name"], "name");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
    field_error("name", "must be a non-empty file-name-safe string");
  }

  if (j.contains("preset")) {
    const std::string p = read_string(j["preset"], "preset");
    if (p == "paper_5_1") {
      cfg.preset = Preset::kPaper51;
    } else if (p == "paper_5_2") {
      cfg.preset = Preset::kPaper52;
    } else {
      field_error("preset", "unknown preset '" + p + "' (paper_5_1, paper_5_2)");
    }
  }

  if (cfg.preset != Preset::kNone) {
    for (const char* f : {"plant", "weights", "initialization", "dither_bound"}) {
      if (j.contains(f)) field_error(f, "fixed by preset " + std::string(to_string(cfg.preset)));
    }
    if (cfg.preset == Preset::kPaper52 && j.contains("pg_stepsize")) {
      field_error("pg_stepsize", "fixed by preset paper_5_2");
    }
  }

  switch (cfg.preset) {
    case Preset::kPaper51:
      cfg.plant = presets::paper_5_1_plant();
      cfg.weights = presets::paper_5_1_weights();
      cfg.init_rule = InitRule::kAdditive;
      cfg.a_param = presets::kPaper51Offset;
      cfg.b_param = presets::kPaper51Offset;
      cfg.h0_scale = presets::kPaper51H0;
      cfg.dither_bound = presets::kPaper51Dither;
      break;
    case Preset::kPaper52:
      cfg.plant = presets::paper_5_2_plant();
      cfg.weights = presets::paper_5_2_weights();
      cfg.init_rule = InitRule::kMultiplicative;
      cfg.a_param = presets::kPaper52AFactor;
      cfg.b_param = presets::kPaper52BFactor;
      cfg.h0_scale = presets::kPaper52H0;
      cfg.dither_bound = presets::kPaper52Dither;
      cfg.pg_stepsize = presets::kPaper52Stepsize;
      break;
    case Preset::kNone: {
      if (!j.contains("plant")) field_error("plant", "required without a preset");
      const json& pj = j["plant"];
      if (!pj.is_object()) field_error("plant", "expected an object with 'a' and 'b'");
      reject_unknown(pj, "plant", {"a", "b"});
      if (!pj.contains("a")) field_error("plant.a", "required");
      if (!pj.contains("b")) field_error("plant.b", "required");
      try {
        cfg.plant = Plant(read_matrix(pj["a"], "plant.a"), read_matrix(pj["b"], "plant.b"));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        field_error("plant", e.what());
      }

      if (!j.contains("weights")) field_error("weights", "required without a preset");
      const json& wj = j["weights"];
      if (!wj.is_object()) field_error("weights", "expected an object with 'q' and 'r'");
      reject_unknown(wj, "weights", {"q", "r"});
      if (!wj.contains("q")) field_error("weights.q", "required");
      if (!wj.contains("r")) field_error("weights.r", "required");
      try {
        cfg.weights = CostWeights(read_matrix(wj["q"], "weights.q"), read_matrix(wj["r"], "weights.r"));
        check_dims(cfg.plant, cfg.weights);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        field_error("weights", e.what());
      }

      if (!j.contains("initialization")) field_error("initialization", "required without a preset");
      const json& ij = j["initialization"];
      if (!ij.is_object()) field_error("initialization", "expected an object");
      reject_unknown(ij, "initialization", {"rule", "a", "b", "h0_scale"});
      for (const char* f : {"rule", "a", "b", "h0_scale"}) {
        if (!ij.contains(f)) field_error(std::string("initialization.") + f, "required");
      }
      const std::string rule = read_string(ij["rule"], "initialization.rule");
      if (rule == "additive") {
        cfg.init_rule = InitRule::kAdditive;
      } else if (rule == "multiplicative") {
        cfg.init_rule = InitRule::kMultiplicative;
      } else {
        field_error("initialization.rule", "expected 'additive' or 'multiplicative'");
      }
      cfg.a_param = read_number(ij["a"], "initialization.a");
      cfg.b_param = read_number(ij["b"], "initialization.b");
      cfg.h0_scale = read_number(ij["h0_scale"], "initialization.h0_scale");
      if (!(cfg.h0_scale > 0.0)) field_error("initialization.h0_scale", "must be positive");

      if (!j.contains("dither_bound")) field_error("dither_bound", "required without a preset");
      cfg.dither_bound = read_number(j["dither_bound"], "dither_bound");
      if (cfg.dither_bound < 0.0) field_error("dither_bound", "must be nonnegative");
      break;
    }
  }

  if (j.contains("pg_stepsize")) {
    cfg.pg_stepsize = read_number(j["pg_stepsize"], "pg_stepsize");
    if (*cfg.pg_stepsize < 0.0) field_error("pg_stepsize", "must be nonnegative");
  }

  if (!j.contains("schedule")) field_error("schedule", "required");
  {
    const json& sj = j["schedule"];
    if (!sj.is_object()) field_error("schedule", "expected an object with 'kind'");
    reject_unknown(sj, "schedule", {"kind", "magnitude", "path"});
    if (!sj.contains("kind")) field_error("schedule.kind", "required");
    cfg.schedule.kind = parse_schedule_kind(read_string(sj["kind"], "schedule.kind"), "schedule.kind");
    if (cfg.schedule.kind == ScheduleKind::kConstant) {
      if (!sj.contains("magnitude")) field_error("schedule.magnitude", "required for constant schedules");
      cfg.schedule.magnitude = read_number(sj["magnitude"], "schedule.magnitude");
      if (cfg.schedule.magnitude < 0.0) field_error("schedule.magnitude", "must be nonnegative");
    } else if (sj.contains("magnitude")) {
      field_error("schedule.magnitude", "only valid for constant schedules");
    }
    if (cfg.schedule.kind == ScheduleKind::kCustom) {
      if (!sj.contains("path")) field_error("schedule.path", "required for custom schedules");
      cfg.schedule.path = read_string(sj["path"], "schedule.path");
      std::filesystem::path p(cfg.schedule.path);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      try {
        cfg.schedule.table = load_custom_schedule_csv(p.string(), 1, 0).table;
      } catch (const ConfigError& e) {
        field_error("schedule.path", e.what());
      }
    } else if (sj.contains("path")) {
      field_error("schedule.path", "only valid for custom schedules");
    }
  }

  if (!j.contains("horizon")) field_error("horizon", "required");
  {
    const long long h = read_integer(j["horizon"], "horizon");
    if (h < 1 || h > 100000000) field_error("horizon", "must be in [1, 1e8]");
    cfg.horizon = static_cast<int>(h);
  }

  if (!j.contains("seeds")) field_error("seeds", "required");
  {
    const json& sj = j["seeds"];
    if (!sj.is_array() || sj.empty()) field_error("seeds", "expected a non-empty array of integers");
    for (std::size_t i = 0; i < sj.size(); ++i) {
      const long long s = read_integer(sj[i], "seeds[" + std::to_string(i) + "]");
      if (s < 0) field_error("seeds[" + std::to_string(i) + "]", "must be nonnegative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }

  if (j.contains("excitation")) {
    const json& ej = j["excitation"];
    if (!ej.is_object()) field_error("excitation", "expected an object with 'mode'");
    reject_unknown(ej, "excitation", {"mode", "gain"});
    if (!ej.contains("mode")) field_error("excitation.mode", "required");
    const std::string mode = read_string(ej["mode"], "excitation.mode");
    if (mode == "on_policy") {
      cfg.excitation = ExcitationMode::kOnPolicy;
      if (ej.contains("gain")) field_error("excitation.gain", "only valid for off_policy");
    } else if (mode == "off_policy") {
      cfg.excitation = ExcitationMode::kOffPolicy;
      if (ej.contains("gain")) {
        Mat k = read_matrix(ej["gain"], "excitation.gain");
        if (k.rows() != cfg.plant.nu() || k.cols() != cfg.plant.nx()) {
          field_error("excitation.gain", "expected " + std::to_string(cfg.plant.nu()) + "x" +
                                             std::to_string(cfg.plant.nx()));
        }
        cfg.off_policy_gain = std::move(k);
      }
    } else {
      field_error("excitation.mode", "expected 'on_policy' or 'off_policy'");
    }
  }

  if (j.contains("x0")) {
    cfg.x0 = read_vector(j["x0"], "x0");
    if (cfg.x0.size() != cfg.plant.nx()) {
      field_error("x0", "expected length " + std::to_string(cfg.plant.nx()));
    }
  }
  if (j.contains("output_dir")) cfg.output_dir = read_string(j["output_dir"], "output_dir");
  if (j.contains("state_cap")) {
    cfg.state_cap = read_number(j["state_cap"], "state_cap");
    if (!(cfg.state_cap > 0.0)) field_error("state_cap", "must be positive");
  }
  if (j.contains("persistency")) {
    const json& pj = j["persistency"];
    if (!pj.is_object()) field_error("persistency", "expected an object");
    reject_unknown(pj, "persistency", {"m_interval", "n_max"});
    if (pj.contains("m_interval")) {
      const long long m = read_integer(pj["m_interval"], "persistency.m_interval");
      if (m < 1) field_error("persistency.m_interval", "must be >= 1");
      cfg.persistency_m = static_cast<int>(m);
    }
    if (pj.contains("n_max")) {
      const long long n = read_integer(pj["n_max"], "persistency.n_max");
      if (n < 1) field_error("persistency.n_max", "must be >= 1");
      cfg.persistency_n_max = static_cast<int>(n);
    }
  }
  return cfg;
}

/// Reads and parses a config file; JSON syntax errors report line and column.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Presets must expand to exactly the published values; returns a list of mismatches.
inline std::vector<std::string> preset_mismatches(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  auto same = [&](const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) out.push_back(what);
  };
  auto same_num = [&](double a, double b, const char* what) {
    if (a != b) out.push_back(what);
  };
  if (cfg.preset == Preset::kPaper51) {
    same(cfg.plant.a, presets::paper_5_1_plant().a, "A");
    same(cfg.plant.b, presets::paper_5_1_plant().b, "B");
    same(cfg.weights.q, presets::paper_5_1_weights().q, "Q");
    same(cfg.weights.r, presets::paper_5_1_weights().r, "R");
    Mat theta(3, 6);
    theta << presets::paper_5_1_plant().a + 0.5 * Mat::Identity(3, 3),
        presets::paper_5_1_plant().b + 0.5 * Mat::Identity(3, 3);
    same(cfg.theta0(), theta, "theta0");
    same_num(cfg.h0_scale, 0.1, "H0");
    same_num(cfg.dither_bound, 10.0, "dither bound");
  } else if (cfg.preset == Preset::kPaper52) {
    same(cfg.plant.a, presets::paper_5_2_plant().a, "A");
    same(cfg.plant.b, presets::paper_5_2_plant().b, "B");
    same(cfg.weights.q, presets::paper_5_2_weights().q, "Q");
    same(cfg.weights.r, presets::paper_5_2_weights().r, "R");
    Mat theta(3, 5);
    theta << 1.3 * presets::paper_5_2_plant().a, 0.7 * presets::paper_5_2_plant().b;
    same(cfg.theta0(), theta, "theta0");
    same_num(cfg.h0_scale, 0.01, "H0");
    same_num(cfg.dither_bound, 10.0, "dither bound");
    same_num(cfg.pg_stepsize.value_or(-1.0), 0.005, "PG stepsize");
  }
  return out;
}

/// Semantic checks beyond parsing: preset integrity and an initial estimate that admits
/// a Riccati solution (so the first gain exists).
inline void validate_experiment(const ExperimentConfig& cfg) {
  if (const auto bad = preset_mismatches(cfg); !bad.empty()) {
    std::string msg = "preset " + std::string(to_string(cfg.preset)) + " does not match: ";
    for (const auto& b : bad) msg += b + " ";
    throw ConfigError(msg);
  }
  const OrlsPiConfig run = cfg.run_config(cfg.seeds.front());
  ddpi::detail::validate(run);
  try {
    (void)optimal_lqr(cfg.plant, cfg.weights, 1e-10);
  } catch (const NotStabilizableError&) {
    throw ConfigError("field 'plant': (A, B) is not stabilizable for the given weights");
  }
  (void)ddpi::detail::initial_gain(run);
}

}  // namespace ddpi::harness
