#ifndef JKOLAB_IO_HPP
#define JKOLAB_IO_HPP

// CSV files for run data. All numbers are written with 17 significant digits,
// so state files reload bit-exactly.

#include "jkolab/certify.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace jkolab::io {

/// Run data that is missing, truncated or malformed.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double v);

/// Header "u,Q": quantile levels and values.
void write_grid_csv(const std::string& path, const Grid& g);
Grid read_grid_csv(const std::string& path);
/// Header "x,y": knots of a monotone map.
void write_map_csv(const std::string& path, const Map1D& t);
Map1D read_map_csv(const std::string& path);

/// Measures and transports of one stage, rows "n,field,i,j,value". Gaussian
/// fields are mean, cov, linear, offset; grid fields are Q, x, y.
template <typename Measure, typename Transport>
struct StageState {
  std::vector<Measure> measures;
  std::vector<Transport> transports;
};

void write_state(const std::string& path, const std::vector<Gaussian>& measures, const std::vector<Affine>& transports);
void write_state(const std::string& path, const std::vector<Grid>& measures, const std::vector<Map1D>& transports);
StageState<Gaussian, Affine> read_gaussian_state(const std::string& path);
StageState<Grid, Map1D> read_grid_state(const std::string& path);

/// "n,w2_to_q,G_value,xi_norm,lipschitz_Tinv,solver_iterations" for n = 0..N;
/// the step columns are empty on row 0.
void write_forward_csv(const std::string& path, const GaussianTrajectory& traj);
void write_forward_csv(const std::string& path, const GridTrajectory& traj);

struct ForwardRow {
  int n = 0;
  double w2_to_q = 0;
  double g_value = 0;
  double xi_norm = 0;
  double lipschitz_tinv = 0;
  int solver_iterations = 0;
};
std::vector<ForwardRow> read_forward_csv(const std::string& path);

/// "n,residual,w2_qtilde_to_q_exact" for n = 0..N; the residual on row n
/// belongs to the map producing q_n and is empty on row N.
void write_reverse_csv(const std::string& path, const GaussianReverse& run, const GaussianReverse& exact);
void write_reverse_csv(const std::string& path, const GridReverse& run, const GridReverse& exact);

struct ReverseRow {
  int n = 0;
  double residual = 0;
  double w2_qtilde_to_q_exact = 0;
};
std::vector<ReverseRow> read_reverse_csv(const std::string& path);

/// "key = value" lines in insertion order.
using Summary = std::vector<std::pair<std::string, std::string>>;
void write_summary(const std::string& path, const Summary& s);
std::map<std::string, std::string> read_summary(const std::string& path);

/// "name,holds,lhs,rhs,slack,tol,context" with context as ';'-separated k=v.
void write_report(const std::string& path, const std::vector<BoundReport>& reports);
std::vector<BoundReport> read_report(const std::string& path);

/// Whole-file helpers.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

/// Splits one CSV line; no quoting is used by any file here.
std::vector<std::string> split_csv(const std::string& line);

}  // namespace jkolab::io

#endif  // JKOLAB_IO_HPP
