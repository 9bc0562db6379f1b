// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddpi/harness/config.hpp"
#include "ddpi/harness/experiment.hpp"
#include "ddpi/harness/presets.hpp"
#include "ddpi/harness/report.hpp"
#include "ddpi/pi_dynamics.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace h = ddpi::harness;
namespace pr = ddpi::harness::presets;
using ddpi::CostWeights;
using ddpi::Gain;
using ddpi::Mat;
using ddpi::Plant;
using ddpi::ValueKernel;
using ddpi::Vec;

namespace {

const fs::path kConfigDir = DDPI_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0: no runtime requirement
  std::function<Outcome()> body;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Runs of the §5.1 preset shared by criteria 5, 6, 7.
struct SweepRun {
  std::string schedule;
  h::SeedResult result;
};

std::vector<SweepRun>& paper_5_1_sweep() {
  static std::vector<SweepRun> runs = [] {
    std::vector<SweepRun> out;
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
    for (const char* name : {"pb1", "pb2", "eb"}) {
      h::ExperimentConfig cfg = h::load_config(kConfigDir / ("paper_5_1_" + std::string(name) + ".json"));
      cfg.horizon = 3000;
      for (auto& r : h::run_seeds(cfg, seeds, h::Method::kPolicyIteration)) {
        out.push_back({to_string(cfg.schedule.kind), std::move(r)});
      }
    }
    return out;
  }();
  return runs;
}

Outcome scalar_dare() {
  const Plant plant(Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0));
  const CostWeights w(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
  const auto sol = ddpi::optimal_lqr(plant, w);
  const double p_ref = oracle::scalar_dare(0.5, 1.0, 1.0, 1.0);
  const double k_ref = oracle::scalar_gain(0.5, 1.0, 1.0, p_ref);
  const double ep = std::abs(sol.p.p(0, 0) - p_ref);
  const double ek = std::abs(sol.k.k(0, 0) - k_ref);
  const double ep_pub = std::abs(sol.p.p(0, 0) - 1.1327822);
  const double ek_pub = std::abs(sol.k.k(0, 0) + 0.2655644);
  const bool ok = ep <= 1e-6 && ek <= 1e-6 && ep_pub <= 1e-6 && ek_pub <= 1e-6;
  return {ok, "P*=" + h::format_double(sol.p.p(0, 0)) + " K*=" + h::format_double(sol.k.k(0, 0)) +
                  " |dP|=" + fmt(ep) + " |dK|=" + fmt(ek) + " (tol 1e-6)"};
}

Outcome pi_monotone_contraction() {
  const Plant plant = pr::paper_5_1_plant();
  const CostWeights w = pr::paper_5_1_weights();
  const Plant model(plant.a + pr::kPaper51Offset * Mat::Identity(3, 3),
                    plant.b + pr::kPaper51Offset * Mat::Identity(3, 3));
  const Gain k0 = ddpi::optimal_lqr(model, w).k;
  // reference at a tighter tolerance than the default: value iteration contracts slowly here
  // (closed-loop radius ~0.97), so a 1e-12 residual leaves P* off by ~1e-11
  const Mat p_star = ddpi::dare_value_iteration(plant, w, 1e-15).p;
  const auto it = ddpi::model_based_pi(plant, w, k0, 20);
  // ratios are only meaningful above the accuracy of the reference
  const double floor = 1e-12 * std::max(1.0, p_star.norm());
  bool ok = true;
  double worst_ratio = 0.0, worst_eig = 0.0;
  for (std::size_t i = 0; i < it.size(); ++i) {
    const Mat gap = ddpi::symmetrize(it[i].p.p - p_star);
    worst_eig = std::min(worst_eig, ddpi::min_eigenvalue(gap));
    if (!ddpi::is_psd(gap, 1e-9)) ok = false;
    if (i + 1 < it.size()) {
      const Mat step = ddpi::symmetrize(it[i].p.p - it[i + 1].p.p);
      worst_eig = std::min(worst_eig, ddpi::min_eigenvalue(step));
      if (!ddpi::is_psd(step, 1e-9)) ok = false;
      const double e0 = (it[i].p.p - p_star).norm();
      const double e1 = (it[i + 1].p.p - p_star).norm();
      if (e0 > floor) {
        worst_ratio = std::max(worst_ratio, e1 / e0);
        if (!(e1 / e0 < 1.0)) ok = false;
      }
    }
  }
  const double final_err = (it.back().p.p - p_star).norm();
  ok = ok && final_err <= 1e-8;
  return {ok, "max ratio " + fmt(worst_ratio) + ", min eig " + fmt(worst_eig) + ", |P_19-P*|=" +
                  fmt(final_err) + " (tol 1e-8)"};
}

Outcome pi_dynamics_equivalence() {
  std::mt19937_64 rng(2025);
  std::normal_distribution<double> n(0.0, 0.05);
  int done = 0;
  double worst = 0.0, worst_fixed = 0.0;
  while (done < 100) {
    const int nx = 1 + done % 3;
    std::uniform_int_distribution<int> nu_dist(1, nx);
    const int nu = nu_dist(rng);
    const Plant plant = oracle::random_plant(rng, nx, nu, 1.3);
    const CostWeights w = oracle::random_weights(rng, nx, nu);
    ddpi::LqrSolution opt;
    try {
      opt = ddpi::optimal_lqr(plant, w);
    } catch (const ddpi::NotStabilizableError&) {
      continue;
    }
    Mat dk(nu, nx);
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nx; ++j) dk(i, j) = n(rng);
    const Gain k(opt.k.k + dk);
    if (!ddpi::is_stabilizing(plant, k)) continue;
    const ValueKernel p = ddpi::policy_evaluation(plant, w, k);
    const Mat via_map = ddpi::pi_step_vectorized(plant, w, p).p;
    const Mat via_pi = ddpi::policy_evaluation(plant, w, ddpi::policy_improvement(plant, w, p)).p;
    worst = std::max(worst, (via_map - via_pi).norm() / std::max(1.0, via_pi.norm()));
    const Mat fixed = ddpi::pi_step_vectorized(plant, w, opt.p).p;
    worst_fixed = std::max(worst_fixed, (fixed - opt.p.p).norm() / std::max(1.0, opt.p.p.norm()));
    ++done;
  }
  return {worst <= 1e-9 && worst_fixed <= 1e-8,
          "100 plants, max rel dev " + fmt(worst) + " (tol 1e-9), fixed point " + fmt(worst_fixed) +
              " (tol 1e-8)"};
}

Outcome rls_batch_equivalence() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> len_dist(1, 200);
  double worst_batch = 0.0, worst_decomp = 0.0;
  for (int run = 0; run < 100; ++run) {
    const int nx = 1 + run % 3, nu = 1 + run % 2, nd = nx + nu;
    const int len = len_dist(rng);
    Mat theta(nx, nd), theta0(nx, nd);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nd; ++j) {
        theta(i, j) = n(rng);
        theta0(i, j) = theta(i, j) + n(rng);
      }
    const Mat h0 = 0.5 * Mat::Identity(nd, nd);
    std::vector<ddpi::RegressionSample> data;
    std::vector<Vec> noise;
    ddpi::RlsState s(theta0, h0);
    for (int t = 0; t < len; ++t) {
      Vec d(nd), wv(nx);
      for (int i = 0; i < nd; ++i) d(i) = n(rng);
      for (int i = 0; i < nx; ++i) wv(i) = 0.1 * n(rng);
      data.push_back({d, theta * d + wv});
      noise.push_back(wv);
      s = ddpi::rls_update(s, d, data.back().x_next);
      const Mat batch = ddpi::batch_ls_regularized(theta0, h0, data);
      worst_batch = std::max(worst_batch, (s.theta_hat - batch).cwiseAbs().maxCoeff());
      const Mat e = ddpi::estimation_error_decomposition(theta0, theta, h0, data, noise);
      worst_decomp = std::max(worst_decomp, (s.theta_hat - theta - e).cwiseAbs().maxCoeff());
    }
  }
  return {worst_batch <= 1e-9 && worst_decomp <= 1e-10,
          "100 runs, batch dev " + fmt(worst_batch) + " (tol 1e-9), decomposition " +
              fmt(worst_decomp) + " (tol 1e-10)"};
}

Outcome theorem_bound(bool energy) {
  int runs = 0, violations = 0, inapplicable = 0, aborted = 0;
  double min_slack = INFINITY;
  for (const auto& r : paper_5_1_sweep()) {
    if (energy && r.schedule != "EB") continue;
    ++runs;
    if (!r.result.summary) {
      ++aborted;
      continue;
    }
    const ddpi::BoundCheck& b = energy ? r.result.summary->energy_bound : r.result.summary->pointwise_bound;
    if (b.verdict == ddpi::Verdict::kNotApplicable) {
      ++inapplicable;
      continue;
    }
    violations += b.violations;
    min_slack = std::min(min_slack, b.min_slack);
  }
  return {violations == 0 && inapplicable == 0 && aborted == 0,
          std::to_string(runs) + " runs, " + std::to_string(violations) + " violations, " +
              std::to_string(inapplicable) + " without persistency, " + std::to_string(aborted) +
              " aborted, min slack " + fmt(min_slack)};
}

Outcome h_growth() {
  int persistent = 0, violations = 0;
  for (const auto& r : paper_5_1_sweep()) {
    if (!r.result.summary || !r.result.summary->persistency) continue;
    const ddpi::BoundCheck& b = r.result.summary->h_growth;
    ++persistent;
    if (b.verdict != ddpi::Verdict::kPass) violations += std::max(b.violations, 1);
  }
  return {persistent > 0 && violations == 0,
          std::to_string(persistent) + " persistent runs, " + std::to_string(violations) + " violations"};
}

std::vector<double> median_err_p(const std::vector<ddpi::IterateTrace>& traces) {
  return h::aggregate(traces).err_p_median;
}

Outcome figure_2() {
  std::vector<std::string> notes;
  bool ok = true;
  for (const char* name : {"eb", "pb2", "pb1"}) {
    h::ExperimentConfig cfg = h::load_config(kConfigDir / ("paper_5_1_" + std::string(name) + ".json"));
    cfg.horizon = 3000;
    const auto results = h::run_seeds(cfg, {1, 2, 3, 4, 5}, h::Method::kPolicyIteration);
    const auto traces = h::completed_traces(results);
    if (traces.size() != 5) {
      notes.push_back(std::string(name) + ": aborted seeds");
      ok = false;
      continue;
    }
    const auto med = median_err_p(traces);
    const int big_t = cfg.horizon;
    if (std::string(name) == "eb") {
      // envelope: max over seeds, reduced to 100-step block maxima from t = 100
      const auto env = h::aggregate(traces).err_p_max;
      bool mono = true;
      double prev = INFINITY;
      for (int start = 100; start <= big_t; start += 100) {
        double block = 0.0;
        for (int t = start; t < std::min(start + 100, big_t + 1); ++t) block = std::max(block, env[t - 1]);
        if (block > prev) mono = false;
        prev = block;
      }
      const bool pass = med[big_t - 1] < 1e-3 && mono;
      ok = ok && pass;
      notes.push_back("EB err_p(T)=" + fmt(med[big_t - 1]) + (mono ? " envelope monotone" : " envelope NOT monotone"));
    } else if (std::string(name) == "pb2") {
      const bool pass = med[big_t - 1] < med[99] / 10.0;
      ok = ok && pass;
      notes.push_back("PB2 err_p(100)=" + fmt(med[99]) + " err_p(T)=" + fmt(med[big_t - 1]));
    } else {
      double floor = INFINITY;
      for (const auto& tr : traces)
        for (int t = big_t / 2; t <= big_t; ++t) floor = std::min(floor, tr.steps[t - 1].err_p);
      ok = ok && floor > 0.0;
      notes.push_back("PB1 min err_p on [T/2,T]=" + fmt(floor));
    }
  }
  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {ok, detail};
}

Outcome figure_3() {
  h::ExperimentConfig cfg = h::load_config(kConfigDir / "paper_5_2_compare.json");
  cfg.horizon = 3000;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto pi = h::run_seeds(cfg, seeds, h::Method::kPolicyIteration);
  const auto pg = h::run_seeds(cfg, seeds, h::Method::kPolicyGradient);
  const auto rows = h::compare_rows(pi, pg, h::kCompareThreshold);
  bool ok = rows.size() == seeds.size();
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.pi_faster;
    detail += "s" + std::to_string(r.seed) + ":" + (r.pi_step ? std::to_string(*r.pi_step) : "-") + "/" +
              (r.pg_step ? std::to_string(*r.pg_step) : "-") + " ";
  }
  return {ok, "first step err_p<=1e-3 PI/PG " + detail};
}

Outcome noise_free_reduction() {
  const Plant plant = pr::paper_5_1_plant();
  const CostWeights w = pr::paper_5_1_weights();
  ddpi::OrlsPiConfig cfg;
  cfg.true_plant = plant;
  cfg.weights = w;
  cfg.theta0 = plant.theta();
  cfg.h0 = pr::kPaper51H0 * Mat::Identity(6, 6);
  cfg.x0 = Vec::Zero(3);
  cfg.dither_bound = pr::kPaper51Dither;
  cfg.horizon = 50;
  cfg.seed = 1;
  const Plant model(plant.a + pr::kPaper51Offset * Mat::Identity(3, 3),
                    plant.b + pr::kPaper51Offset * Mat::Identity(3, 3));
  const Gain k0 = ddpi::optimal_lqr(model, w).k;
  cfg.initial_gain = k0;
  const auto trace = ddpi::orls_pi_run(cfg, ddpi::NoiseSchedule::constant_magnitude(3, 1, 0.0));
  const auto ref = ddpi::model_based_pi(plant, w, k0, 50);
  double worst = 0.0;
  for (std::size_t i = 0; i < 50 && i < trace.steps.size(); ++i) {
    worst = std::max(worst, (trace.steps[i].p_hat - ref[i].p.p).cwiseAbs().maxCoeff());
    if (i + 1 < trace.steps.size()) {
      worst = std::max(worst, (trace.steps[i + 1].k_hat - ref[i].k_next.k).cwiseAbs().maxCoeff());
    }
  }
  return {trace.steps.size() == 50 && worst <= 1e-9, "50 steps, max deviation " + fmt(worst) + " (tol 1e-9)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "ddpi_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ok = true;
  int compared = 0;
  for (const char* name : {"paper_5_1_pb1.json", "paper_5_2_compare.json", "custom_scalar.json"}) {
    h::ExperimentConfig cfg = h::load_config(kConfigDir / name);
    cfg.horizon = std::min(cfg.horizon, 500);
    const std::uint64_t seed = cfg.seeds.front();
    for (int rep = 0; rep < 2; ++rep) {
      const auto r = h::run_seed(cfg, seed, h::Method::kPolicyIteration);
      h::emit_trace_csv(*r.trace, dir / ("run" + std::to_string(rep) + ".csv"));
    }
    ok = ok && slurp(dir / "run0.csv") == slurp(dir / "run1.csv");
    ++compared;
  }
  // separate processes through the CLI
  const std::string cfg_path = (kConfigDir / "custom_scalar.json").string();
  for (int rep = 0; rep < 2; ++rep) {
    const std::string cmd = std::string("\"") + DDPI_CLI_PATH + "\" run --config \"" + cfg_path +
                            "\" --out \"" + (dir / ("cli" + std::to_string(rep))).string() + "\" > /dev/null 2>&1";
    ok = ok && std::system(cmd.c_str()) == 0;
  }
  ok = ok && slurp(dir / "cli0" / "custom_scalar" / "seed_7.csv") ==
                 slurp(dir / "cli1" / "custom_scalar" / "seed_7.csv") &&
       !slurp(dir / "cli0" / "custom_scalar" / "seed_7.csv").empty();
  ++compared;
  fs::remove_all(dir);
  return {ok, std::to_string(compared) + " repeated (config, seed) pairs byte-compared"};
}

Outcome local_contraction() {
  const std::vector<std::pair<const char*, std::pair<Plant, CostWeights>>> cases = {
      {"scalar", {Plant(Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0)),
                  CostWeights(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0))}},
      {"5.1", {pr::paper_5_1_plant(), pr::paper_5_1_weights()}},
      {"5.2", {pr::paper_5_2_plant(), pr::paper_5_2_weights()}}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, pw] : cases) {
    const ValueKernel p_star = ddpi::dare_value_iteration(pw.first, pw.second);
    const auto est = ddpi::contraction_estimate(pw.first, pw.second, p_star, 1e-6, 200, 1);
    ok = ok && est.accepted > 0 && est.ratio < 1.0;
    detail += std::string(name) + "=" + fmt(est.ratio) + " ";
  }
  return {ok, "ratios " + detail};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "scalar DARE oracle", 1e-3, scalar_dare},
      {2, "PI monotonicity and contraction", 1.0, pi_monotone_contraction},
      {3, "PI-dynamics equivalence", 5.0, pi_dynamics_equivalence},
      {4, "RLS recursion-batch equivalence", 5.0, rls_batch_equivalence},
      {5, "pointwise-noise estimation bound", 30.0, [] { return theorem_bound(false); }},
      {6, "energy-noise estimation bound", 0.0, [] { return theorem_bound(true); }},
      {7, "information-matrix eigenvalue growth", 0.0, h_growth},
      {8, "schedule comparison trends (5.1)", 120.0, figure_2},
      {9, "PI reaches 1e-3 before PG (5.2)", 120.0, figure_3},
      {10, "noise-free reduction to model-based PI", 0.0, noise_free_reduction},
      {11, "byte-identical CSV on replay", 0.0, determinism},
      {12, "local contraction surrogate", 0.0, local_contraction},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_budget = c.budget_seconds <= 0.0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s  [%2d] %s: %s | %.3gs%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                in_budget ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
