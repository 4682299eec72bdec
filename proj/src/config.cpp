#include "jkolab/config.hpp"

#include "jkolab/certify.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace jkolab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  if (s.empty()) throw ConfigError(key + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key + ": not a finite number: '" + s + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(key, part));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

template <typename E, typename F>
E to_enum(const std::string& key, const std::string& s, F&& parse) {
  try {
    return parse(s);
  } catch (const PreconditionError&) {
    throw ConfigError(key + ": unknown value '" + s + "'");
  }
}

const std::set<std::string> kGaussianStartKeys{"p0.mean", "p0.cov"};
const std::set<std::string> kMixtureKeys{"p0.mixture.weights", "p0.mixture.means", "p0.mixture.sds"};
const std::set<std::string> kAtomKeys{"p0.atoms", "p0.weights", "p0.delta"};

void assign(RunConfig& c, const std::string& key, const std::string& v) {
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&, const std::string&)>> setters{
      {"family", [](RunConfig& c, auto& k, auto& v) { c.family = to_enum<Family>(k, v, family_from_string); }},
      {"dim", [](RunConfig& c, auto& k, auto& v) { c.dim = static_cast<int>(to_int(k, v)); }},
      {"grid.M", [](RunConfig& c, auto& k, auto& v) { c.grid_m = static_cast<int>(to_int(k, v)); }},
      {"objective.variant",
       [](RunConfig& c, auto& k, auto& v) { c.variant = to_enum<Variant>(k, v, variant_from_string); }},
      {"objective.alpha", [](RunConfig& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"objective.lambda_mat", [](RunConfig& c, auto& k, auto& v) { c.lambda_mat = to_list(k, v); }},
      {"objective.center", [](RunConfig& c, auto& k, auto& v) { c.center = to_list(k, v); }},
      {"p0.mean", [](RunConfig& c, auto& k, auto& v) { c.p0_mean = to_list(k, v); }},
      {"p0.cov", [](RunConfig& c, auto& k, auto& v) { c.p0_cov = to_list(k, v); }},
      {"p0.mixture.weights", [](RunConfig& c, auto& k, auto& v) { c.mix_weights = to_list(k, v); }},
      {"p0.mixture.means", [](RunConfig& c, auto& k, auto& v) { c.mix_means = to_list(k, v); }},
      {"p0.mixture.sds", [](RunConfig& c, auto& k, auto& v) { c.mix_sds = to_list(k, v); }},
      {"p0.atoms",
       [](RunConfig& c, auto& k, auto& v) {
         c.atoms.clear();
         for (const auto& a : split(v, ';')) c.atoms.push_back(to_list(k, a));
       }},
      {"p0.weights", [](RunConfig& c, auto& k, auto& v) { c.atom_weights = to_list(k, v); }},
      {"p0.delta", [](RunConfig& c, auto& k, auto& v) { c.delta = to_double(k, v); }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.gamma = to_double(k, v); }},
      {"eps", [](RunConfig& c, auto& k, auto& v) { c.eps = to_list(k, v); }},
      {"eps_inv", [](RunConfig& c, auto& k, auto& v) { c.eps_inv = to_double(k, v); }},
      {"N",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "AUTO") c.n_steps.reset();
         else c.n_steps = static_cast<int>(to_int(k, v));
       }},
      {"seed",
       [](RunConfig& c, auto& k, auto& v) {
         errno = 0;
         char* end = nullptr;
         const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
         if (v.empty() || v[0] == '-' || end != v.c_str() + v.size() || errno == ERANGE)
           throw ConfigError(k + ": not an unsigned integer: '" + v + "'");
         c.seed = s;
       }},
      {"perturb.mode",
       [](RunConfig& c, auto& k, auto& v) { c.mode = to_enum<PerturbMode>(k, v, perturb_mode_from_string); }},
      {"perturb.direction", [](RunConfig& c, auto& k, auto& v) { c.direction = to_list(k, v); }},
      {"perturb.bump_width_sds", [](RunConfig& c, auto& k, auto& v) { c.bump_width_sds = to_double(k, v); }},
      {"checks", [](RunConfig& c, auto&, auto& v) { c.checks = split(v, ','); }},
      {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
  it->second(c, key, v);
}

bool sized(const std::vector<double>& v, int dim) {
  return v.size() == 1 || v.size() == static_cast<std::size_t>(dim);
}

bool square_sized(const std::vector<double>& v, int dim) {
  return v.size() == 1 || v.size() == static_cast<std::size_t>(dim * dim);
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.dim >= 1, "dim must be >= 1");
  need(c.grid_m >= static_cast<int>(kMinGridSize), "grid.M must be >= 8");
  need(c.family != Family::kGrid || c.dim == 1, "grid family is 1-D");
  need(c.alpha >= 0, "objective.alpha must be >= 0");
  need(square_sized(c.lambda_mat, c.dim), "objective.lambda_mat needs 1 or dim^2 entries");
  need(c.center.empty() || sized(c.center, c.dim), "objective.center needs 1 or dim entries");
  need(c.family != Family::kGrid || c.variant != Variant::kPotentialOnly,
       "grid family needs an entropy-bearing objective");
  need(c.family != Family::kGrid || c.variant != Variant::kWeighted || c.alpha > 0,
       "grid family needs objective.alpha > 0");
  switch (c.start) {
    case StartKind::kGaussian:
      need(c.p0_mean.empty() || sized(c.p0_mean, c.dim), "p0.mean needs 1 or dim entries");
      need(square_sized(c.p0_cov, c.dim), "p0.cov needs 1 or dim^2 entries");
      break;
    case StartKind::kMixture:
      need(c.family == Family::kGrid, "p0.mixture needs the grid family");
      need(c.mix_weights.size() == c.mix_means.size() && c.mix_weights.size() == c.mix_sds.size(),
           "p0.mixture lists must have equal length");
      break;
    case StartKind::kAtoms:
      need(!c.atoms.empty(), "p0.atoms is empty");
      for (const auto& a : c.atoms) need(a.size() == static_cast<std::size_t>(c.dim), "p0.atoms: atom of wrong dimension");
      need(c.atom_weights.empty() || c.atom_weights.size() == c.atoms.size(), "p0.weights must match p0.atoms");
      need(c.delta > 0, "p0.delta must be positive");
      need(c.family == Family::kGrid || c.atoms.size() == 1, "multi-atom starts need the grid family");
      break;
  }
  need(c.gamma > 0 && c.gamma < 2, "gamma must lie in (0, 2)");
  for (double e : c.eps) need(e >= 0, "eps must be nonnegative");
  need(c.eps_inv >= 0, "eps_inv must be nonnegative");
  if (c.n_steps) {
    need(*c.n_steps >= 0, "N must be >= 0");
    need(c.eps.size() == 1 || c.eps.size() == static_cast<std::size_t>(*c.n_steps),
         "eps schedule length must equal N");
  } else {
    need(c.eps.size() == 1 && c.eps[0] > 0, "N = AUTO requires a positive scalar eps");
  }
  need(c.mode != PerturbMode::kGridBump || c.family == Family::kGrid, "GRID_BUMP needs the grid family");
  need(c.direction.empty() || c.direction.size() == static_cast<std::size_t>(c.dim),
       "perturb.direction needs dim entries");
  need(c.bump_width_sds > 0, "perturb.bump_width_sds must be positive");
  const auto& known = check_names();
  for (const auto& ch : c.checks)
    need(std::find(known.begin(), known.end(), ch) != known.end(), "unknown check '" + ch + "'");
  try {
    build_objective(c);
    if (c.family == Family::kGaussian) build_gaussian_start(c);
    else build_grid_start(c);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

VectorXd broadcast(const std::vector<double>& v, int dim, double fill = 0) {
  if (v.empty()) return VectorXd::Constant(dim, fill);
  if (v.size() == 1) return VectorXd::Constant(dim, v[0]);
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd square(const std::vector<double>& v, int dim) {
  if (v.size() == 1) return v[0] * MatrixXd::Identity(dim, dim);
  MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = v[static_cast<std::size_t>(i * dim + j)];
  return m;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    try {
      assign(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  auto any_of = [&](const std::set<std::string>& keys) {
    return std::any_of(keys.begin(), keys.end(), [&](const auto& k) { return seen.count(k) > 0; });
  };
  const int kinds = any_of(kGaussianStartKeys) + any_of(kMixtureKeys) + any_of(kAtomKeys);
  if (kinds > 1) throw ConfigError("conflicting p0 specifications");
  if (any_of(kMixtureKeys)) c.start = StartKind::kMixture;
  if (any_of(kAtomKeys)) c.start = StartKind::kAtoms;
  if (seen.count("objective.alpha") && c.variant != Variant::kWeighted)
    throw ConfigError("objective.alpha applies to the WEIGHTED variant only");
  if (c.variant == Variant::kKL) c.alpha = 1;
  if (c.variant == Variant::kPotentialOnly) c.alpha = 0;
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  auto kv = [&](const std::string& k, const std::string& v) { os << k << " = " << v << "\n"; };
  kv("family", std::string(to_string(c.family)));
  kv("dim", std::to_string(c.dim));
  kv("grid.M", std::to_string(c.grid_m));
  kv("objective.variant", std::string(to_string(c.variant)));
  if (c.variant == Variant::kWeighted) kv("objective.alpha", fmt(c.alpha));
  kv("objective.lambda_mat", join(c.lambda_mat));
  if (!c.center.empty()) kv("objective.center", join(c.center));
  switch (c.start) {
    case StartKind::kGaussian:
      if (!c.p0_mean.empty()) kv("p0.mean", join(c.p0_mean));
      kv("p0.cov", join(c.p0_cov));
      break;
    case StartKind::kMixture:
      kv("p0.mixture.weights", join(c.mix_weights));
      kv("p0.mixture.means", join(c.mix_means));
      kv("p0.mixture.sds", join(c.mix_sds));
      break;
    case StartKind::kAtoms: {
      std::string atoms;
      for (std::size_t i = 0; i < c.atoms.size(); ++i) atoms += (i ? "; " : "") + join(c.atoms[i]);
      kv("p0.atoms", atoms);
      if (!c.atom_weights.empty()) kv("p0.weights", join(c.atom_weights));
      kv("p0.delta", fmt(c.delta));
      break;
    }
  }
  kv("gamma", fmt(c.gamma));
  kv("eps", join(c.eps));
  kv("eps_inv", fmt(c.eps_inv));
  kv("N", c.n_steps ? std::to_string(*c.n_steps) : "AUTO");
  kv("seed", std::to_string(c.seed));
  kv("perturb.mode", std::string(to_string(c.mode)));
  if (!c.direction.empty()) kv("perturb.direction", join(c.direction));
  kv("perturb.bump_width_sds", fmt(c.bump_width_sds));
  if (!c.checks.empty()) kv("checks", join(c.checks));
  if (!c.output_dir.empty()) kv("output_dir", c.output_dir);
  return os.str();
}

RunConfig with_overrides(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::set<std::string> keys;
  for (const auto& [k, v] : kv) keys.insert(k);
  std::istringstream is(serialize_config(cfg));
  std::string line, text;
  // Changing the start kind drops every key of the previous kind.
  const bool new_kind = std::any_of(keys.begin(), keys.end(), [](const auto& k) { return k.rfind("p0.", 0) == 0; });
  while (std::getline(is, line)) {
    const std::string key = trim(line.substr(0, line.find('=')));
    if (keys.count(key)) continue;
    if (new_kind && key.rfind("p0.", 0) == 0) {
      const bool same_kind =
          (kGaussianStartKeys.count(key) && std::any_of(keys.begin(), keys.end(), [](auto& k) { return kGaussianStartKeys.count(k) > 0; })) ||
          (kMixtureKeys.count(key) && std::any_of(keys.begin(), keys.end(), [](auto& k) { return kMixtureKeys.count(k) > 0; })) ||
          (kAtomKeys.count(key) && std::any_of(keys.begin(), keys.end(), [](auto& k) { return kAtomKeys.count(k) > 0; }));
      if (!same_kind) continue;
    }
    text += line + "\n";
  }
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return parse_config(text);
}

std::string run_id(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.output_dir.clear();
  const std::string text = serialize_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Objective build_objective(const RunConfig& c) {
  return make_objective<double>(square(c.lambda_mat, c.dim), broadcast(c.center, c.dim), c.variant, c.alpha);
}

std::optional<AtomicMeasure> build_atoms(const RunConfig& c) {
  if (c.start != StartKind::kAtoms) return std::nullopt;
  std::vector<VectorXd> atoms;
  for (const auto& a : c.atoms) atoms.push_back(broadcast(a, c.dim));
  if (c.atom_weights.empty()) return AtomicMeasure::uniform(std::move(atoms));
  return AtomicMeasure(std::move(atoms), c.atom_weights);
}

Gaussian build_gaussian_start(const RunConfig& c) {
  switch (c.start) {
    case StartKind::kGaussian: {
      Gaussian g(broadcast(c.p0_mean, c.dim), square(c.p0_cov, c.dim));
      require(g.is_nondegenerate(), "p0.cov must be positive definite");
      return g;
    }
    case StartKind::kAtoms: return ou_smooth_gaussian(*build_atoms(c), c.delta);
    case StartKind::kMixture: break;
  }
  throw PreconditionError("mixture starts need the grid family");
}

Grid build_grid_start(const RunConfig& c) {
  switch (c.start) {
    case StartKind::kGaussian:
      require(c.p0_cov[0] > 0, "p0.cov must be positive");
      return from_gaussian(broadcast(c.p0_mean, 1)(0), std::sqrt(c.p0_cov[0]), c.grid_m);
    case StartKind::kMixture:
      return from_mixture<double>(c.mix_weights, c.mix_means, c.mix_sds, c.grid_m);
    case StartKind::kAtoms: return ou_smooth_grid(*build_atoms(c), c.delta, c.grid_m);
  }
  throw PreconditionError("unknown start kind");
}

PerturbConfig build_perturb(const RunConfig& c) {
  PerturbConfig p;
  p.mode = c.mode;
  if (!c.direction.empty()) p.direction = broadcast(c.direction, c.dim);
  p.bump_width_sds = c.bump_width_sds;
  return p;
}

std::vector<std::string> effective_checks(const RunConfig& c) {
  return c.checks.empty() ? check_names() : c.checks;
}

}  // namespace jkolab
