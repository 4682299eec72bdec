#include "jkolab/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
  using namespace jkolab::cli;

  CLI::App app{"JKO process runner: forward and reverse runs, bound certification, sweeps"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opts;
  std::uint64_t seed = 0;
  std::string config, id, checks;
  std::vector<std::string> axes, run_ids;

  app.add_option("--out", opts.out_root, std::string("Output root (default: $") + kOutEnv + " or ./runs)");
  app.add_option("--workers", opts.workers, "Concurrent sweep entries")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed-override", seed, "Replace the config's seed");

  auto* forward = app.add_subcommand("forward", "Run the forward process and write its trajectory");
  forward->add_option("--config", config, "Run config")->required();

  auto* reverse = app.add_subcommand("reverse", "Run the exact and perturbed reverse processes");
  auto* rev_cfg = reverse->add_option("--config", config, "Run config");
  reverse->add_option("--run-id", id, "Existing run")->excludes(rev_cfg);

  auto* certify = app.add_subcommand("certify", "Check every bound against stored run data");
  auto* cert_cfg = certify->add_option("--config", config, "Run config");
  certify->add_option("--run-id", id, "Existing run")->excludes(cert_cfg);
  certify->add_option("--checks", checks, "Comma-separated check families");

  auto* sweep = app.add_subcommand("sweep", "Run the cross product of axes");
  sweep->add_option("--config", config, "Template config")->required();
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)");
  sweep->add_option("--checks", checks, "Comma-separated check families");

  auto* report = app.add_subcommand("report", "Aggregate report files");
  report->add_option("run_ids", run_ids, "Runs to aggregate (default: all under the output root)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }
  if (*seed_opt) opts.seed_override = seed;
  if (!checks.empty()) {
    std::string cur;
    std::istringstream is(checks);
    while (std::getline(is, cur, ',')) opts.checks.push_back(cur);
  }

  if (*forward) return cmd_forward(config, opts);
  if (*reverse) return cmd_reverse(config, id, opts);
  if (*certify) return cmd_certify(config, id, opts);
  if (*sweep) return cmd_sweep(config, axes, opts);
  return cmd_report(run_ids, opts);
}
