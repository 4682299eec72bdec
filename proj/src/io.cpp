#include "jkolab/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace jkolab::io {

namespace {

double parse_number(const std::string& s, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError(where + ": malformed number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError(where + ": malformed integer '" + s + "'");
  return static_cast<int>(v);
}

std::vector<std::string> lines_of(const std::string& path) {
  std::istringstream is(read_text(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Rows after a header that must match exactly.
std::vector<std::vector<std::string>> table(const std::string& path, const std::string& header) {
  const auto lines = lines_of(path);
  if (lines.empty() || lines.front() != header) throw DataError(path + ": expected header '" + header + "'");
  const std::size_t cols = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto r = split_csv(lines[i]);
    if (r.size() != cols) throw DataError(path + ": line " + std::to_string(i + 1) + " has wrong column count");
    rows.push_back(std::move(r));
  }
  return rows;
}

template <typename F>
auto rethrow_as_data(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    throw DataError(path + ": " + e.what());
  }
}

constexpr const char* kStateHeader = "n,field,i,j,value";
constexpr const char* kForwardHeader = "n,w2_to_q,G_value,xi_norm,lipschitz_Tinv,solver_iterations";
constexpr const char* kReverseHeader = "n,residual,w2_qtilde_to_q_exact";
constexpr const char* kReportHeader = "name,holds,lhs,rhs,slack,tol,context";

void put_vector(std::ostream& os, int n, const char* field, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << n << ',' << field << ',' << i << ",0," << format_number(v(i)) << '\n';
}

void put_matrix(std::ostream& os, int n, const char* field, const MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << n << ',' << field << ',' << i << ',' << j << ',' << format_number(m(i, j)) << '\n';
}

struct Entry {
  int i, j;
  double v;
};
// fields[n][name] -> entries
using Fields = std::map<int, std::map<std::string, std::vector<Entry>>>;

Fields read_fields(const std::string& path) {
  Fields f;
  for (const auto& r : table(path, kStateHeader)) {
    const std::string where = path;
    f[parse_int(r[0], where)][r[1]].push_back({parse_int(r[2], where), parse_int(r[3], where), parse_number(r[4], where)});
  }
  return f;
}

VectorXd as_vector(const std::vector<Entry>& e, const std::string& path) {
  VectorXd v(static_cast<Eigen::Index>(e.size()));
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].i != static_cast<int>(k) || e[k].j != 0) throw DataError(path + ": vector entries out of order");
    v(e[k].i) = e[k].v;
  }
  return v;
}

MatrixXd as_matrix(const std::vector<Entry>& e, const std::string& path) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(e.size()))));
  if (d * d != static_cast<Eigen::Index>(e.size())) throw DataError(path + ": matrix is not square");
  MatrixXd m(d, d);
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].i * d + e[k].j != static_cast<Eigen::Index>(k)) throw DataError(path + ": matrix entries out of order");
    m(e[k].i, e[k].j) = e[k].v;
  }
  return m;
}

const std::vector<Entry>& field(const Fields& f, int n, const std::string& name, const std::string& path) {
  const auto it = f.find(n);
  if (it != f.end()) {
    const auto jt = it->second.find(name);
    if (jt != it->second.end()) return jt->second;
  }
  throw DataError(path + ": missing field " + name + " at n = " + std::to_string(n));
}

bool has_field(const Fields& f, int n, const std::string& name) {
  const auto it = f.find(n);
  return it != f.end() && it->second.count(name) > 0;
}

int measure_count(const Fields& f, const char* name, const std::string& path) {
  int count = 0;
  while (has_field(f, count, name)) ++count;
  if (count == 0) throw DataError(path + ": no measures");
  return count;
}

template <typename Traj>
void forward_impl(const std::string& path, const Traj& traj) {
  const auto q = target_measure(traj);
  std::ostringstream os;
  os << kForwardHeader << '\n';
  for (int n = 0; n <= traj.steps(); ++n) {
    const auto& p = traj.measures[static_cast<std::size_t>(n)];
    double w2_q;
    if constexpr (std::is_same_v<Traj, GaussianTrajectory>) w2_q = w2_bw(p, q);
    else w2_q = w2(p, q);
    os << n << ',' << format_number(w2_q) << ',' << format_number(evaluate(traj.spec, p)) << ',';
    if (n == 0) {
      os << ",,\n";
      continue;
    }
    const auto k = static_cast<std::size_t>(n - 1);
    os << format_number(traj.xi_norms[k]) << ',' << format_number(inverse_lipschitz(traj.transports[k])) << ','
       << traj.solver_iterations[k] << '\n';
  }
  write_text(path, os.str());
}

template <typename Rev>
void reverse_impl(const std::string& path, const Rev& run, const Rev& exact) {
  require(run.measures.size() == exact.measures.size(), "write_reverse_csv: run lengths differ");
  std::ostringstream os;
  os << kReverseHeader << '\n';
  const std::size_t n_last = run.measures.size() - 1;
  for (std::size_t n = 0; n <= n_last; ++n) {
    double gap;
    if constexpr (std::is_same_v<Rev, GaussianReverse>) gap = w2_bw(run.measures[n], exact.measures[n]);
    else gap = w2(run.measures[n], exact.measures[n]);
    os << n << ',' << (n < n_last ? format_number(run.residuals[n]) : "") << ',' << format_number(gap) << '\n';
  }
  write_text(path, os.str());
}

}  // namespace

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_grid_csv(const std::string& path, const Grid& g) {
  std::ostringstream os;
  os << "u,Q\n";
  const auto m = g.size();
  for (Eigen::Index k = 0; k < m; ++k)
    os << format_number((static_cast<double>(k) + 0.5) / static_cast<double>(m)) << ',' << format_number(g.values()(k))
       << '\n';
  write_text(path, os.str());
}

Grid read_grid_csv(const std::string& path) {
  const auto rows = table(path, "u,Q");
  VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) v(static_cast<Eigen::Index>(k)) = parse_number(rows[k][1], path);
  return rethrow_as_data(path, [&] { return Grid(std::move(v)); });
}

void write_map_csv(const std::string& path, const Map1D& t) {
  std::ostringstream os;
  os << "x,y\n";
  for (Eigen::Index k = 0; k < t.x().size(); ++k) os << format_number(t.x()(k)) << ',' << format_number(t.y()(k)) << '\n';
  write_text(path, os.str());
}

Map1D read_map_csv(const std::string& path) {
  const auto rows = table(path, "x,y");
  VectorXd x(static_cast<Eigen::Index>(rows.size())), y(x.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x(static_cast<Eigen::Index>(k)) = parse_number(rows[k][0], path);
    y(static_cast<Eigen::Index>(k)) = parse_number(rows[k][1], path);
  }
  return rethrow_as_data(path, [&] { return Map1D(std::move(x), std::move(y)); });
}

void write_state(const std::string& path, const std::vector<Gaussian>& measures, const std::vector<Affine>& transports) {
  std::ostringstream os;
  os << kStateHeader << '\n';
  for (std::size_t n = 0; n < measures.size(); ++n) {
    put_vector(os, static_cast<int>(n), "mean", measures[n].mean());
    put_matrix(os, static_cast<int>(n), "cov", measures[n].cov());
  }
  for (std::size_t n = 0; n < transports.size(); ++n) {
    put_matrix(os, static_cast<int>(n), "linear", transports[n].linear);
    put_vector(os, static_cast<int>(n), "offset", transports[n].offset);
  }
  write_text(path, os.str());
}

void write_state(const std::string& path, const std::vector<Grid>& measures, const std::vector<Map1D>& transports) {
  std::ostringstream os;
  os << kStateHeader << '\n';
  for (std::size_t n = 0; n < measures.size(); ++n) put_vector(os, static_cast<int>(n), "Q", measures[n].values());
  for (std::size_t n = 0; n < transports.size(); ++n) {
    put_vector(os, static_cast<int>(n), "x", transports[n].x());
    put_vector(os, static_cast<int>(n), "y", transports[n].y());
  }
  write_text(path, os.str());
}

StageState<Gaussian, Affine> read_gaussian_state(const std::string& path) {
  const auto f = read_fields(path);
  StageState<Gaussian, Affine> s;
  const int count = measure_count(f, "mean", path);
  rethrow_as_data(path, [&] {
    for (int n = 0; n < count; ++n)
      s.measures.emplace_back(as_vector(field(f, n, "mean", path), path), as_matrix(field(f, n, "cov", path), path));
    for (int n = 0; has_field(f, n, "linear"); ++n) {
      Affine t;
      t.linear = as_matrix(field(f, n, "linear", path), path);
      t.offset = as_vector(field(f, n, "offset", path), path);
      s.transports.push_back(std::move(t));
    }
    return 0;
  });
  if (s.transports.size() + 1 != s.measures.size()) throw DataError(path + ": transport count does not match");
  return s;
}

StageState<Grid, Map1D> read_grid_state(const std::string& path) {
  const auto f = read_fields(path);
  StageState<Grid, Map1D> s;
  const int count = measure_count(f, "Q", path);
  rethrow_as_data(path, [&] {
    for (int n = 0; n < count; ++n) s.measures.emplace_back(as_vector(field(f, n, "Q", path), path));
    for (int n = 0; has_field(f, n, "x"); ++n)
      s.transports.emplace_back(as_vector(field(f, n, "x", path), path), as_vector(field(f, n, "y", path), path));
    return 0;
  });
  if (s.transports.size() + 1 != s.measures.size()) throw DataError(path + ": transport count does not match");
  return s;
}

void write_forward_csv(const std::string& path, const GaussianTrajectory& traj) { forward_impl(path, traj); }
void write_forward_csv(const std::string& path, const GridTrajectory& traj) { forward_impl(path, traj); }

std::vector<ForwardRow> read_forward_csv(const std::string& path) {
  std::vector<ForwardRow> out;
  for (const auto& r : table(path, kForwardHeader)) {
    ForwardRow row;
    row.n = parse_int(r[0], path);
    if (row.n != static_cast<int>(out.size())) throw DataError(path + ": rows out of order");
    row.w2_to_q = parse_number(r[1], path);
    row.g_value = parse_number(r[2], path);
    if (row.n > 0) {
      row.xi_norm = parse_number(r[3], path);
      row.lipschitz_tinv = parse_number(r[4], path);
      row.solver_iterations = parse_int(r[5], path);
    }
    out.push_back(row);
  }
  if (out.empty()) throw DataError(path + ": no rows");
  return out;
}

void write_reverse_csv(const std::string& path, const GaussianReverse& run, const GaussianReverse& exact) {
  reverse_impl(path, run, exact);
}
void write_reverse_csv(const std::string& path, const GridReverse& run, const GridReverse& exact) {
  reverse_impl(path, run, exact);
}

std::vector<ReverseRow> read_reverse_csv(const std::string& path) {
  std::vector<ReverseRow> out;
  const auto rows = table(path, kReverseHeader);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ReverseRow row;
    row.n = parse_int(rows[k][0], path);
    if (k + 1 < rows.size()) row.residual = parse_number(rows[k][1], path);
    row.w2_qtilde_to_q_exact = parse_number(rows[k][2], path);
    out.push_back(row);
  }
  return out;
}

void write_summary(const std::string& path, const Summary& s) {
  std::ostringstream os;
  for (const auto& [k, v] : s) os << k << " = " << v << '\n';
  write_text(path, os.str());
}

std::map<std::string, std::string> read_summary(const std::string& path) {
  std::map<std::string, std::string> out;
  for (const auto& line : lines_of(path)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError(path + ": malformed summary line");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

void write_report(const std::string& path, const std::vector<BoundReport>& reports) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : reports) {
    os << r.name << ',' << (r.holds ? "true" : "false") << ',' << format_number(r.lhs) << ',' << format_number(r.rhs)
       << ',' << format_number(r.slack) << ',' << format_number(r.tol) << ',';
    for (std::size_t i = 0; i < r.context.size(); ++i)
      os << (i ? ";" : "") << r.context[i].first << '=' << r.context[i].second;
    os << '\n';
  }
  write_text(path, os.str());
}

std::vector<BoundReport> read_report(const std::string& path) {
  std::vector<BoundReport> out;
  for (const auto& r : table(path, kReportHeader)) {
    BoundReport b;
    b.name = r[0];
    if (r[1] != "true" && r[1] != "false") throw DataError(path + ": holds must be true or false");
    b.holds = r[1] == "true";
    b.lhs = parse_number(r[2], path);
    b.rhs = parse_number(r[3], path);
    b.slack = parse_number(r[4], path);
    b.tol = parse_number(r[5], path);
    std::istringstream ctx(r[6]);
    std::string kv;
    while (std::getline(ctx, kv, ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DataError(path + ": malformed context entry '" + kv + "'");
      b.context.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace jkolab::io
