// ddpi: run, validate and compare data-driven policy iteration experiments.
//
//   ddpi run --config cfg.json [--out dir] [--seeds 1,2,3]
//   ddpi validate --config cfg.json
//   ddpi compare --config cfg.json [--out dir] [--seeds 1,2,3]
//
// Exit codes: 0 success, 2 configuration error, 3 divergence or I/O failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddpi/harness/config.hpp"
#include "ddpi/harness/experiment.hpp"
#include "ddpi/harness/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

namespace h = ddpi::harness;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size() || item.front() == '-') {
      throw ddpi::ConfigError("--seeds: '" + item + "' is not a nonnegative integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ddpi::ConfigError("--seeds: empty list");
  return out;
}

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
};

h::ExperimentConfig load(const Common& c) {
  h::ExperimentConfig cfg = h::load_config(c.config);
  if (!c.seeds.empty()) cfg.seeds = parse_seed_list(c.seeds);
  if (!c.out.empty()) cfg.output_dir = c.out;
  h::validate_experiment(cfg);
  return cfg;
}

void report_aborts(const std::vector<h::SeedResult>& results, const char* label) {
  for (const auto& r : results) {
    if (!r.error.empty()) {
      std::cerr << "ddpi: " << label << " seed " << r.seed << " aborted: " << r.error << '\n';
    }
  }
}

int cmd_validate(const Common& c) {
  const h::ExperimentConfig cfg = load(c);
  std::cout << c.config << ": ok (" << cfg.name << ", preset " << h::to_string(cfg.preset)
            << ", " << cfg.seeds.size() << " seed(s), T=" << cfg.horizon << ")\n";
  return kExitOk;
}

int cmd_run(const Common& c) {
  const h::ExperimentConfig cfg = load(c);
  const auto dir = std::filesystem::path(cfg.output_dir) / cfg.name;
  const auto results = h::run_seeds(cfg, cfg.seeds, h::Method::kPolicyIteration);
  const bool ok = h::write_results(cfg, results, h::Method::kPolicyIteration, dir);
  report_aborts(results, "run");
  for (const auto& r : results) {
    if (!r.summary) continue;
    std::cout << "seed " << r.seed << ": err_p=" << h::format_double(r.summary->final_err_p)
              << " err_theta=" << h::format_double(r.summary->final_err_theta)
              << " breakdowns=" << r.summary->breakdown_events << '\n';
  }
  std::cout << "wrote " << dir.string() << '\n';
  return ok ? kExitOk : kExitRuntime;
}

int cmd_compare(const Common& c) {
  const h::ExperimentConfig cfg = load(c);
  if (!cfg.pg_stepsize) throw ddpi::ConfigError("field 'pg_stepsize': required by compare");
  const auto dir = std::filesystem::path(cfg.output_dir) / cfg.name;
  const auto pi = h::run_seeds(cfg, cfg.seeds, h::Method::kPolicyIteration);
  const auto pg = h::run_seeds(cfg, cfg.seeds, h::Method::kPolicyGradient);
  const bool ok_pi = h::write_results(cfg, pi, h::Method::kPolicyIteration, dir / "pi");
  const bool ok_pg = h::write_results(cfg, pg, h::Method::kPolicyGradient, dir / "pg");
  report_aborts(pi, "pi");
  report_aborts(pg, "pg");
  const auto rows = h::compare_rows(pi, pg);
  const auto report = h::compare_json(rows, h::kCompareThreshold);
  h::emit_json(report, dir / "compare.json");
  for (const auto& r : rows) {
    std::cout << "seed " << r.seed << ": pi "
              << (r.pi_step ? std::to_string(*r.pi_step) : std::string("never")) << ", pg "
              << (r.pg_step ? std::to_string(*r.pg_step) : std::string("never"))
              << (r.pi_faster ? "  (pi faster)" : "") << '\n';
  }
  std::cout << "wrote " << (dir / "compare.json").string() << '\n';
  return ok_pi && ok_pg ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indirect data-driven policy iteration experiments"};
  app.require_subcommand(1);

  Common run_opts, validate_opts, compare_opts;
  auto* run = app.add_subcommand("run", "run ORLS+PI on every seed and write traces");
  run->add_option("--config", run_opts.config, "experiment config (JSON)")->required();
  run->add_option("--out", run_opts.out, "output directory (overrides output_dir)");
  run->add_option("--seeds", run_opts.seeds, "comma-separated seeds (overrides seeds)");

  auto* validate = app.add_subcommand("validate", "check a config and its preset");
  validate->add_option("--config", validate_opts.config, "experiment config (JSON)")->required();

  auto* compare = app.add_subcommand("compare", "run ORLS+PI and ORLS+PG on matched seeds");
  compare->add_option("--config", compare_opts.config, "experiment config (JSON)")->required();
  compare->add_option("--out", compare_opts.out, "output directory (overrides output_dir)");
  compare->add_option("--seeds", compare_opts.seeds, "comma-separated seeds (overrides seeds)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*validate) return cmd_validate(validate_opts);
    if (*compare) return cmd_compare(compare_opts);
  } catch (const ddpi::ConfigError& e) {
    std::cerr << "ddpi: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ddpi::DivergenceError& e) {
    std::cerr << "ddpi: divergence at step " << e.step() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const h::IoError& e) {
    std::cerr << "ddpi: i/o error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "ddpi: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
