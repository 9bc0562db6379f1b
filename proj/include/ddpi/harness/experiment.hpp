#pragma once

// Multi-seed execution. Seeds run on a small worker pool; each run owns its trace and
// summary, and aggregation happens after all workers join.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ddpi/harness/config.hpp"
#include "ddpi/harness/report.hpp"
#include "ddpi/orls_pi.hpp"

namespace ddpi::harness {

inline constexpr const char* kThreadCapEnv = "DDPI_MAX_THREADS";

enum class Method { kPolicyIteration, kPolicyGradient };

inline const char* to_string(Method m) {
  return m == Method::kPolicyIteration ? "pi" : "pg";
}

/// Worker count: hardware concurrency, capped by DDPI_MAX_THREADS and the job count.
inline int worker_count(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  long cap = hw == 0 ? 1 : static_cast<long>(hw);
  if (const char* env = std::getenv(kThreadCapEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cap = std::min(cap, v);
  }
  return static_cast<int>(std::max<long>(1, std::min<long>(cap, static_cast<long>(jobs))));
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<IterateTrace> trace;
  std::optional<RunSummary> summary;
  std::string error;  ///< non-empty when the run aborted
  bool diverged = false;
  int divergence_step = 0;
};

inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, Method method) {
  SeedResult r;
  r.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const OrlsPiConfig rc = cfg.run_config(seed);
    const NoiseSchedule schedule = cfg.noise(seed);
    IterateTrace trace = method == Method::kPolicyIteration ? orls_pi_run(rc, schedule)
                                                            : orls_pg_run(rc, schedule);
    RunSummary s = summarize(trace, cfg, seed, to_string(method));
    s.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.summary = std::move(s);
    r.trace = std::move(trace);
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.divergence_step = e.step();
    r.error = e.what();
  }
  return r;
}

/// Runs every seed; results keep the order of `seeds`.
inline std::vector<SeedResult> run_seeds(const ExperimentConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds, Method method) {
  std::vector<SeedResult> results(seeds.size());
  const int workers = worker_count(seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = run_seed(cfg, seeds[i], method);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(seeds.size());
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) {
        try {
          results[i] = run_seed(cfg, seeds[i], method);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return results;
}

inline std::vector<IterateTrace> completed_traces(const std::vector<SeedResult>& results) {
  std::vector<IterateTrace> out;
  for (const auto& r : results) {
    if (r.trace) out.push_back(*r.trace);
  }
  return out;
}

inline nlohmann::json results_json(const ExperimentConfig& cfg,
                                   const std::vector<SeedResult>& results, Method method) {
  nlohmann::json j;
  j["name"] = cfg.name;
  j["preset"] = to_string(cfg.preset);
  j["method"] = to_string(method);
  j["schedule"] = to_string(cfg.schedule.kind);
  j["horizon"] = cfg.horizon;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : results) {
    if (r.summary) {
      j["runs"].push_back(to_json(*r.summary));
    } else {
      j["runs"].push_back({{"seed", r.seed},
                           {"aborted", true},
                           {"divergence_step", r.divergence_step},
                           {"reason", r.error}});
    }
  }
  return j;
}

/// Writes per-seed CSV/JSON, the joint summary, and the aggregate CSV under `dir`.
/// Returns true when every seed completed.
inline bool write_results(const ExperimentConfig& cfg, const std::vector<SeedResult>& results,
                          Method method, const std::filesystem::path& dir) {
  bool all_ok = true;
  for (const auto& r : results) {
    const std::string stem = "seed_" + std::to_string(r.seed);
    if (r.trace) {
      emit_trace_csv(*r.trace, dir / (stem + ".csv"));
      emit_summary_json(*r.summary, dir / (stem + ".json"));
    } else {
      all_ok = false;
    }
  }
  emit_json(results_json(cfg, results, method), dir / "summary.json");
  const std::vector<IterateTrace> traces = completed_traces(results);
  if (!traces.empty()) emit_aggregate_csv(aggregate(traces), dir / "aggregate.csv");
  return all_ok;
}

inline constexpr double kCompareThreshold = 1e-3;

struct CompareRow {
  std::uint64_t seed = 0;
  std::optional<int> pi_step;
  std::optional<int> pg_step;
  bool pi_faster = false;  ///< PI reached the threshold strictly earlier (PG may never reach it)
};

inline std::vector<CompareRow> compare_rows(const std::vector<SeedResult>& pi,
                                            const std::vector<SeedResult>& pg,
                                            double threshold = kCompareThreshold) {
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < pi.size() && i < pg.size(); ++i) {
    CompareRow row;
    row.seed = pi[i].seed;
    if (pi[i].trace) row.pi_step = first_step_below(*pi[i].trace, threshold);
    if (pg[i].trace) row.pg_step = first_step_below(*pg[i].trace, threshold);
    row.pi_faster = row.pi_step && (!row.pg_step || *row.pi_step < *row.pg_step);
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json compare_json(const std::vector<CompareRow>& rows, double threshold) {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["seeds"] = nlohmann::json::array();
  bool all = !rows.empty();
  for (const auto& r : rows) {
    nlohmann::json e;
    e["seed"] = r.seed;
    e["pi_first_step"] = r.pi_step ? nlohmann::json(*r.pi_step) : nlohmann::json(nullptr);
    e["pg_first_step"] = r.pg_step ? nlohmann::json(*r.pg_step) : nlohmann::json(nullptr);
    e["pi_strictly_faster"] = r.pi_faster;
    j["seeds"].push_back(e);
    all = all && r.pi_faster;
  }
  j["pi_faster_on_every_seed"] = all;
  return j;
}

}  // namespace ddpi::harness
