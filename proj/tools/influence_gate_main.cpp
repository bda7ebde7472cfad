#include "influence_gate/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace influence_gate;

namespace {

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const BudgetError*>(&e)) return 4;
  if (dynamic_cast<const SamplerError*>(&e)) return 5;
  return 1;
}

const char* kind(int code) {
  switch (code) {
    case 2: return "config error";
    case 3: return "data error";
    case 4: return "budget error";
    case 5: return "sampler error";
  }
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment checks for case-deletion importance weights"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--seed", seed, "overrides sampler.seed");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    return sub;
  };
  auto* gate = add("gate", "moment index and verdicts per deletion set");
  auto* scan = add("scan", "all subsets of a given size, ranked");
  auto* kfold = add("kfold", "random k-fold partition audit");
  auto* estimate = add("estimate", "influence measures with CLT gates");
  auto* verify = add("verify", "empirical tail index and variance scaling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    for (auto* sub : {gate, scan, kfold, estimate, verify}) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) cfg.sampler.seed = seed;
      if (sub->count("--out")) cfg.output_dir = out_dir;
    }
    if (gate->parsed()) {
      auto rows = cmd_gate(cfg);
      std::printf("%zu deletion sets gated; reports in %s\n", rows.size(), cfg.output_dir.c_str());
    } else if (scan->parsed()) {
      auto res = cmd_scan(cfg);
      std::printf("%zu subsets of size %d scanned; reports in %s\n", res.rows.size(), res.size,
                  cfg.output_dir.c_str());
    } else if (kfold->parsed()) {
      auto res = cmd_kfold_audit(cfg);
      std::printf("%d partitions: %d with a fold below r* = 2; reports in %s\n", res.partitions,
                  res.with_one_or_more_below_two, cfg.output_dir.c_str());
    } else if (estimate->parsed()) {
      auto rows = cmd_estimate(cfg);
      int blocked = 0;
      for (const auto& r : rows) blocked += !r.estimate.gate.passed;
      std::printf("%zu estimates (%d gate-blocked); reports in %s\n", rows.size(), blocked,
                  cfg.output_dir.c_str());
      if (blocked) std::printf("%s\n", kMixtureAdvisory);
    } else if (verify->parsed()) {
      auto res = cmd_verify(cfg);
      for (size_t i = 0; i < res.sets.size(); ++i) {
        const auto& t = res.tails[i];
        std::printf("deleted [%s]: hill %.4g, analytic %.4g, agreement %s\n",
                    format_one_based(res.sets[i]).c_str(), t.hill.estimate, t.analytic_r_star,
                    t.degenerate ? "degenerate" : !t.agreement ? "n/a" : *t.agreement ? "yes" : "no");
      }
      if (res.scaling && res.scaling->loglog_slope)
        std::printf("variance scaling slope %.4g\n", *res.scaling->loglog_slope);
    }
  } catch (const DataError& e) {
    std::fprintf(stderr, "influence-gate: data error: %s", e.what());
    if (e.row() >= 0) std::fprintf(stderr, " (row %ld)", e.row());
    if (!e.column().empty()) std::fprintf(stderr, " (column %s)", e.column().c_str());
    std::fprintf(stderr, "\n");
    return 3;
  } catch (const std::exception& e) {
    int code = exit_code(e);
    std::fprintf(stderr, "influence-gate: %s: %s\n", kind(code), e.what());
    return code;
  }
  return 0;
}
