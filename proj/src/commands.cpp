#include "jkolab/commands.hpp"

#include "jkolab/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace jkolab::cli {

namespace fs = std::filesystem;

namespace {

std::ostream& log_stream(const Options& o) { return o.log ? *o.log : std::cout; }
std::ostream& err_stream(const Options& o) { return o.err ? *o.err : std::cerr; }

std::string root_for(const Options& opts, const std::string& config_dir) {
  if (!opts.out_root.empty()) return opts.out_root;
  if (!config_dir.empty()) return config_dir;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return "runs";
}

std::string path_in(const std::string& dir, const std::string& id, const std::string& suffix) {
  return (fs::path(dir) / (id + suffix)).string();
}

double dist(const Gaussian& a, const Gaussian& b) { return w2_bw(a, b); }
double dist(const Grid& a, const Grid& b) { return w2(a, b); }

Gaussian target(const Objective& spec, const Gaussian&) { return global_minimizer(spec); }
Grid target(const Objective& spec, const Grid& p0) { return global_minimizer_grid(spec, p0.size()); }

io::StageState<Gaussian, Affine> read_state(const std::string& path, const Gaussian*) {
  return io::read_gaussian_state(path);
}
io::StageState<Grid, Map1D> read_state(const std::string& path, const Grid*) { return io::read_grid_state(path); }

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw io::DataError("missing run data: " + path);
}

template <typename Measure>
void forward_family(const RunConfig& cfg, const std::string& dir, const Measure& p0) {
  const std::string id = run_id(cfg);
  const auto spec = build_objective(cfg);
  const double w2_0 = dist(p0, target(spec, p0));
  int n_steps = 0;
  bool clamped = false;
  if (cfg.n_steps) {
    n_steps = *cfg.n_steps;
  } else if (w2_0 > 0) {
    n_steps = steps_needed(w2_0, spec.lambda, cfg.gamma, cfg.eps[0]);
    clamped = 8 / (cfg.gamma * spec.lambda) * (std::log(w2_0) + std::log(spec.lambda / cfg.eps[0])) <= 0;
  } else {
    n_steps = 1;
    clamped = true;
  }
  const auto traj = run_forward(p0, spec, cfg.gamma, n_steps, cfg.eps, build_perturb(cfg), cfg.seed);
  io::write_forward_csv(path_in(dir, id, "_forward.csv"), traj);
  io::write_state(path_in(dir, id, "_forward_state.csv"), traj.measures, traj.transports);
  double max_xi = 0;
  for (double x : traj.xi_norms) max_xi = std::max(max_xi, x);
  io::write_summary(path_in(dir, id, "_summary.txt"),
                    {{"run_id", id},
                     {"family", std::string(to_string(cfg.family))},
                     {"dim", std::to_string(cfg.dim)},
                     {"N", std::to_string(n_steps)},
                     {"N_auto", cfg.n_steps ? "false" : "true"},
                     {"N_clamped", clamped ? "true" : "false"},
                     {"gamma", io::format_number(cfg.gamma)},
                     {"lambda", io::format_number(spec.lambda)},
                     {"w2_p0_q", io::format_number(w2_0)},
                     {"w2_pN_q", io::format_number(dist(traj.measures.back(), target(spec, p0)))},
                     {"max_xi_norm", io::format_number(max_xi)}});
}

template <typename Measure, typename Transport>
Trajectory<Measure, Transport> load_trajectory(const RunConfig& cfg, const std::string& dir) {
  const std::string id = run_id(cfg);
  const std::string state_path = path_in(dir, id, "_forward_state.csv");
  const std::string csv_path = path_in(dir, id, "_forward.csv");
  require_file(state_path);
  require_file(csv_path);
  auto state = read_state(state_path, static_cast<const Measure*>(nullptr));
  const auto rows = io::read_forward_csv(csv_path);
  if (rows.size() != state.measures.size())
    throw io::DataError(csv_path + ": row count does not match the state file");
  Trajectory<Measure, Transport> traj;
  traj.spec = build_objective(cfg);
  traj.gamma = cfg.gamma;
  traj.measures = std::move(state.measures);
  traj.transports = std::move(state.transports);
  for (std::size_t n = 1; n < rows.size(); ++n) {
    traj.xi_norms.push_back(rows[n].xi_norm);
    traj.solver_iterations.push_back(rows[n].solver_iterations);
  }
  return traj;
}

template <typename Measure, typename Transport>
ReverseRun<Measure, Transport> load_reverse(const std::string& dir, const std::string& id, const std::string& stage,
                                            double eps_inv) {
  const std::string state_path = path_in(dir, id, "_" + stage + "_state.csv");
  const std::string csv_path = path_in(dir, id, "_" + stage + ".csv");
  require_file(state_path);
  require_file(csv_path);
  auto state = read_state(state_path, static_cast<const Measure*>(nullptr));
  const auto rows = io::read_reverse_csv(csv_path);
  if (rows.size() != state.measures.size())
    throw io::DataError(csv_path + ": row count does not match the state file");
  ReverseRun<Measure, Transport> run;
  run.measures = std::move(state.measures);
  run.transports = std::move(state.transports);
  for (std::size_t n = 0; n + 1 < rows.size(); ++n) run.residuals.push_back(rows[n].residual);
  run.perturbed = stage == "reverse_perturbed";
  run.eps_inv = run.perturbed ? eps_inv : 0;
  return run;
}

template <typename Measure, typename Transport>
void reverse_family(const RunConfig& cfg, const std::string& dir) {
  const std::string id = run_id(cfg);
  const auto traj = load_trajectory<Measure, Transport>(cfg, dir);
  const auto exact = run_reverse_exact(traj);
  io::write_reverse_csv(path_in(dir, id, "_reverse.csv"), exact, exact);
  io::write_state(path_in(dir, id, "_reverse_state.csv"), exact.measures, exact.transports);
  if (cfg.eps_inv > 0) {
    const auto pert = run_reverse_perturbed(traj, cfg.eps_inv, build_perturb(cfg), cfg.seed);
    io::write_reverse_csv(path_in(dir, id, "_reverse_perturbed.csv"), pert, exact);
    io::write_state(path_in(dir, id, "_reverse_perturbed_state.csv"), pert.measures, pert.transports);
  }
}

template <typename Measure, typename Transport>
std::vector<BoundReport> certify_family(const RunConfig& cfg, const std::string& dir,
                                        const std::vector<std::string>& checks) {
  const std::string id = run_id(cfg);
  const auto traj = load_trajectory<Measure, Transport>(cfg, dir);
  const auto exact = load_reverse<Measure, Transport>(dir, id, "reverse", 0);
  std::optional<ReverseRun<Measure, Transport>> pert;
  if (cfg.eps_inv > 0) pert = load_reverse<Measure, Transport>(dir, id, "reverse_perturbed", cfg.eps_inv);
  std::optional<SmoothingInput> smoothing;
  if (auto atoms = build_atoms(cfg)) smoothing = SmoothingInput{std::move(*atoms), cfg.delta};
  return certify_run(traj, exact, pert, smoothing, checks);
}

bool forward_present(const RunConfig& cfg, const std::string& dir) {
  const std::string id = run_id(cfg);
  return fs::exists(path_in(dir, id, "_forward.csv")) && fs::exists(path_in(dir, id, "_forward_state.csv"));
}

bool reverse_present(const RunConfig& cfg, const std::string& dir) {
  const std::string id = run_id(cfg);
  const bool exact = fs::exists(path_in(dir, id, "_reverse.csv")) && fs::exists(path_in(dir, id, "_reverse_state.csv"));
  const bool pert = cfg.eps_inv <= 0 || (fs::exists(path_in(dir, id, "_reverse_perturbed.csv")) &&
                                         fs::exists(path_in(dir, id, "_reverse_perturbed_state.csv")));
  return exact && pert;
}

RunConfig apply_seed(RunConfig cfg, const Options& opts) {
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  return cfg;
}

// Resolves --config / --run-id into a config and its run directory.
std::pair<RunConfig, std::string> resolve(const std::string& config_path, const std::string& id, const Options& opts) {
  if (config_path.empty() == id.empty()) throw ConfigError("give exactly one of --config and --run-id");
  if (!config_path.empty()) {
    const RunConfig cfg = apply_seed(load_config(config_path), opts);
    return {cfg, run_directory(cfg, opts)};
  }
  const std::string dir = (fs::path(root_for(opts, "")) / id).string();
  const std::string cfg_path = (fs::path(dir) / "config.cfg").string();
  require_file(cfg_path);
  RunConfig cfg = load_config(cfg_path);
  if (run_id(cfg) != id) throw io::DataError(cfg_path + ": config does not hash to run id " + id);
  return {cfg, dir};
}

template <typename F>
int guarded(const Options& opts, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    err_stream(opts) << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

std::string report_label(const BoundReport& r) {
  std::string label = r.name;
  for (const auto& [k, v] : r.context)
    if (k == "n") label += "[n=" + v + "]";
  return label;
}

// Summary lines written by certify, replacing any from an earlier certify.
void record_certify(const RunConfig& cfg, const std::string& dir, const std::vector<std::string>& checks,
                    const std::vector<BoundReport>& reports) {
  const std::string path = path_in(dir, run_id(cfg), "_summary.txt");
  io::Summary s;
  if (fs::exists(path)) {
    std::istringstream is(io::read_text(path));
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find(" = ");
      if (eq == std::string::npos || line.rfind("certify.", 0) == 0) continue;
      s.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
  }
  std::string joined;
  for (std::size_t i = 0; i < checks.size(); ++i) joined += (i ? "," : "") + checks[i];
  const auto failed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.holds; });
  s.emplace_back("certify.checks", joined);
  s.emplace_back("certify.reports", std::to_string(reports.size()));
  s.emplace_back("certify.failed", std::to_string(failed));
  io::write_summary(path, s);
}

std::vector<std::string> certify_checks(const RunConfig& cfg, const Options& opts) {
  auto checks = opts.checks.empty() ? effective_checks(cfg) : opts.checks;
  const auto& known = check_names();
  for (const auto& c : checks)
    if (std::find(known.begin(), known.end(), c) == known.end()) throw ConfigError("unknown check '" + c + "'");
  return checks;
}

// One row per (run, check family): pass, fail, skipped (no reports) or error.
constexpr const char* kAggregateHeader = "run_id,check,status,reports,failed,min_slack";

void append_rows(std::ostringstream& os, const std::string& id, const std::vector<std::string>& checks,
                 const std::vector<BoundReport>& reports, int exit_code) {
  for (const auto& c : checks) {
    if (exit_code != kExitOk && exit_code != kExitBoundFailed) {
      os << id << ',' << c << ",error,0,0,\n";
      continue;
    }
    int count = 0, failed = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) {
      if (check_family(r.name) != c) continue;
      ++count;
      failed += !r.holds;
      min_slack = std::min(min_slack, r.slack);
    }
    const char* status = count == 0 ? "skipped" : failed ? "fail" : "pass";
    os << id << ',' << c << ',' << status << ',' << count << ',' << failed << ','
       << (count ? io::format_number(min_slack) : "") << '\n';
  }
}

int severity(int code) {
  switch (code) {
    case kExitOk: return 0;
    case kExitBoundFailed: return 1;
    case kExitSolverFailure: return 2;
    case kExitConfigError: return 3;
    case kExitMissingData: return 4;
    default: return 5;
  }
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

}  // namespace

std::string run_directory(const RunConfig& cfg, const Options& opts) {
  return (fs::path(root_for(opts, cfg.output_dir)) / run_id(cfg)).string();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfigError;
  if (dynamic_cast<const io::DataError*>(&e)) return kExitMissingData;
  if (dynamic_cast<const SolverError*>(&e)) return kExitSolverFailure;
  if (dynamic_cast<const PreconditionError*>(&e)) return kExitSolverFailure;
  return kExitInternal;
}

void run_forward_stage(const RunConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  io::write_text((fs::path(dir) / "config.cfg").string(), serialize_config(cfg));
  if (cfg.family == Family::kGaussian) forward_family(cfg, dir, build_gaussian_start(cfg));
  else forward_family(cfg, dir, build_grid_start(cfg));
}

void run_reverse_stage(const RunConfig& cfg, const std::string& dir) {
  if (cfg.family == Family::kGaussian) reverse_family<Gaussian, Affine>(cfg, dir);
  else reverse_family<Grid, Map1D>(cfg, dir);
}

bool run_certify_stage(const RunConfig& cfg, const std::string& dir, const std::vector<std::string>& checks,
                       std::vector<std::string>* failing) {
  const auto reports = cfg.family == Family::kGaussian ? certify_family<Gaussian, Affine>(cfg, dir, checks)
                                                       : certify_family<Grid, Map1D>(cfg, dir, checks);
  io::write_report(path_in(dir, run_id(cfg), "_report.csv"), reports);
  record_certify(cfg, dir, checks, reports);
  bool all = true;
  for (const auto& r : reports) {
    if (r.holds) continue;
    all = false;
    if (failing) failing->push_back(report_label(r));
  }
  return all;
}

int cmd_forward(const std::string& config_path, const Options& opts) {
  return guarded(opts, [&] {
    const RunConfig cfg = apply_seed(load_config(config_path), opts);
    const std::string dir = run_directory(cfg, opts);
    run_forward_stage(cfg, dir);
    log_stream(opts) << "forward " << run_id(cfg) << " -> " << dir << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_reverse(const std::string& config_path, const std::string& id, const Options& opts) {
  return guarded(opts, [&] {
    const auto [cfg, dir] = resolve(config_path, id, opts);
    if (!config_path.empty() && !forward_present(cfg, dir)) run_forward_stage(cfg, dir);
    run_reverse_stage(cfg, dir);
    log_stream(opts) << "reverse " << run_id(cfg) << " -> " << dir << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_certify(const std::string& config_path, const std::string& id, const Options& opts) {
  return guarded(opts, [&] {
    const auto [cfg, dir] = resolve(config_path, id, opts);
    const auto checks = certify_checks(cfg, opts);
    if (!config_path.empty() && !forward_present(cfg, dir)) run_forward_stage(cfg, dir);
    if (!reverse_present(cfg, dir)) run_reverse_stage(cfg, dir);
    std::vector<std::string> failing;
    const bool ok = run_certify_stage(cfg, dir, checks, &failing);
    for (const auto& f : failing) err_stream(opts) << "FAILED " << f << '\n';
    log_stream(opts) << "certify " << run_id(cfg) << ": " << (ok ? "all bounds hold" : "bound failure") << '\n';
    return static_cast<int>(ok ? kExitOk : kExitBoundFailed);
  });
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& axes, const Options& opts) {
  struct Entry {
    RunConfig cfg;
    std::string dir;
    std::vector<std::string> checks;
    std::vector<BoundReport> reports;
    int code = kExitOk;
    std::string message;
  };
  std::vector<Entry> entries;
  std::string root;
  const int setup = guarded(opts, [&] {
    const RunConfig base = apply_seed(load_config(config_path), opts);
    root = root_for(opts, base.output_dir);
    std::vector<std::vector<std::pair<std::string, std::string>>> combos{{}};
    for (const auto& axis : axes) {
      const auto eq = axis.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("axis must look like key=v1,v2: '" + axis + "'");
      const std::string key = axis.substr(0, eq);
      const auto values = split_values(axis.substr(eq + 1));
      if (values.empty()) throw ConfigError("axis '" + key + "' has no values");
      std::vector<std::vector<std::pair<std::string, std::string>>> next;
      for (const auto& c : combos)
        for (const auto& v : values) {
          auto e = c;
          e.emplace_back(key, v);
          next.push_back(std::move(e));
        }
      combos = std::move(next);
    }
    std::set<std::string> seen;
    for (const auto& c : combos) {
      RunConfig cfg = with_overrides(base, c);
      if (!seen.insert(run_id(cfg)).second) continue;
      Entry e;
      e.dir = run_directory(cfg, opts);
      e.checks = certify_checks(cfg, opts);
      e.cfg = std::move(cfg);
      entries.push_back(std::move(e));
    }
    return static_cast<int>(kExitOk);
  });
  if (setup != kExitOk) return setup;

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      Entry& e = entries[i];
      try {
        run_forward_stage(e.cfg, e.dir);
        run_reverse_stage(e.cfg, e.dir);
        e.code = run_certify_stage(e.cfg, e.dir, e.checks) ? kExitOk : kExitBoundFailed;
        e.reports = io::read_report(path_in(e.dir, run_id(e.cfg), "_report.csv"));
      } catch (const std::exception& ex) {
        e.code = exit_code_for(ex);
        e.message = ex.what();
      }
      std::lock_guard lock(log_mutex);
      log_stream(opts) << "sweep " << run_id(e.cfg) << ": exit " << e.code << '\n';
      if (!e.message.empty()) err_stream(opts) << "error in " << run_id(e.cfg) << ": " << e.message << '\n';
    }
  };
  const int n_workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(entries.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ostringstream os;
  os << kAggregateHeader << '\n';
  int code = kExitOk;
  for (const auto& e : entries) {
    append_rows(os, run_id(e.cfg), e.checks, e.reports, e.code);
    if (severity(e.code) > severity(code)) code = e.code;
  }
  fs::create_directories(root);
  const std::string out = (fs::path(root) / "sweep_report.csv").string();
  io::write_text(out, os.str());
  log_stream(opts) << "sweep: " << entries.size() << " runs -> " << out << '\n';
  return code;
}

int cmd_report(const std::vector<std::string>& run_ids, const Options& opts) {
  return guarded(opts, [&] {
    const std::string root = root_for(opts, "");
    std::vector<std::string> ids = run_ids;
    if (ids.empty()) {
      if (!fs::is_directory(root)) throw io::DataError("no run directory at '" + root + "'");
      for (const auto& d : fs::directory_iterator(root)) {
        const std::string id = d.path().filename().string();
        if (d.is_directory() && fs::exists(d.path() / (id + "_report.csv"))) ids.push_back(id);
      }
      std::sort(ids.begin(), ids.end());
      if (ids.empty()) throw io::DataError("no report files under '" + root + "'");
    }
    std::ostringstream os;
    os << kAggregateHeader << '\n';
    bool all = true;
    for (const auto& id : ids) {
      const fs::path dir = fs::path(root) / id;
      const std::string report = (dir / (id + "_report.csv")).string();
      require_file(report);
      const auto reports = io::read_report(report);
      std::vector<std::string> checks;
      const std::string summary = (dir / (id + "_summary.txt")).string();
      if (fs::exists(summary)) {
        const auto s = io::read_summary(summary);
        if (const auto it = s.find("certify.checks"); it != s.end()) checks = split_values(it->second);
      }
      for (const auto& r : reports)
        if (std::find(checks.begin(), checks.end(), check_family(r.name)) == checks.end())
          checks.push_back(check_family(r.name));
      append_rows(os, id, checks, reports, kExitOk);
      all = all && std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.holds; });
    }
    const std::string out = (fs::path(root) / "report_summary.csv").string();
    io::write_text(out, os.str());
    log_stream(opts) << os.str();
    return static_cast<int>(all ? kExitOk : kExitBoundFailed);
  });
}

}  // namespace jkolab::cli
