#pragma once

#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

namespace qsize {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Le, Ge, Eq };

/// min c^T x  s.t.  rows (sense) rhs,  lo <= x <= hi. Dense storage.
struct LpProblem {
  std::vector<double> c;
  std::vector<double> lo, hi;
  std::vector<std::vector<double>> rows;
  std::vector<Sense> senses;
  std::vector<double> rhs;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_var(double cost, double lower, double upper);
  int add_row(const std::vector<std::pair<int, double>>& terms, Sense sense, double b);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> duals;  // one per row, sign convention of the original row
  double dual_objective = 0.0;
  long iterations = 0;
};

struct LpOptions {
  double tol = 1e-9;
  long max_iterations = 0;  // 0: 50 * (rows + columns)
};

/// Two-phase bounded-variable primal simplex on a dense tableau. Dantzig
/// pricing, switching to Bland's rule after a run of degenerate pivots.
/// Throws NumericalFailure when the final basis cannot be certified.
LpResult solve_lp(const LpProblem& p, const LpOptions& opts = {});

/// Plain-text tabular dump: one line per row plus objective and bounds.
void write_lp(const LpProblem& p, std::ostream& out);

/// Ordered variable group: at most two adjacent members nonzero.
struct Sos2Set {
  std::vector<int> vars;
};

bool sos2_feasible(const std::vector<double>& x, const std::vector<Sos2Set>& sets, double tol = 1e-9);

struct MilpOptions {
  double gap = 1e-9;  // absolute optimality gap
  long node_limit = 200000;
  double sos_tol = 1e-9;
  LpOptions lp;
  bool record_trace = false;
};

struct BranchTrace {
  long node;
  long parent;  // -1 at the root
  double bound;
};

struct MilpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  long nodes = 0;
  bool heuristic = false;
  std::vector<BranchTrace> trace;
};

/// Best-first branch-and-bound on SOS2 violations. Throws NodeLimit.
MilpResult solve_milp_sos2(const LpProblem& p, const std::vector<Sos2Set>& sets, const MilpOptions& opts = {});

/// Restricts each set to a single member (one knot) and improves the
/// assignment by neighbour moves. Heuristic; the result is flagged as such.
MilpResult solve_knot_restricted(const LpProblem& p, const std::vector<Sos2Set>& sets,
                                 const MilpOptions& opts = {});

}  // namespace qsize
