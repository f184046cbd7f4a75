#include "qsize/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qsize/errors.hpp"

namespace qsize {

int LpProblem::add_var(double cost, double lower, double upper) {
  c.push_back(cost);
  lo.push_back(lower);
  hi.push_back(upper);
  for (auto& r : rows) r.push_back(0.0);
  return num_vars() - 1;
}

int LpProblem::add_row(const std::vector<std::pair<int, double>>& terms, Sense sense, double b) {
  std::vector<double> row(c.size(), 0.0);
  for (const auto& [j, a] : terms) row.at(j) += a;
  rows.push_back(std::move(row));
  senses.push_back(sense);
  rhs.push_back(b);
  return num_rows() - 1;
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal:
      return "Optimal";
    case LpStatus::Infeasible:
      return "Infeasible";
    case LpStatus::Unbounded:
      return "Unbounded";
  }
  return "?";
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotFloor = 1e-11;
constexpr int kDegenerateRun = 50;
constexpr double kClampTol = 1e-12;
constexpr double kRelPivot = 1e-7;

// Original variable k maps to standard columns: x = lo + x', x = hi - x',
// or x = x+ - x-.
enum class Map { Shift, Mirror, Split };

struct StandardForm {
  int m = 0, n = 0;  // rows, columns
  Eigen::MatrixXd A;
  Eigen::VectorXd b, c, u;
  std::vector<int> sign;           // row multiplier applied to make b >= 0
  std::vector<char> artificial;    // per column
  std::vector<int> initial_basis;  // per row
  std::vector<Map> map;
  std::vector<int> col;  // first standard column of each original variable
  double offset = 0.0;   // objective constant from shifts
};

StandardForm standardize(const LpProblem& p) {
  StandardForm s;
  const int nv = p.num_vars();
  s.m = p.num_rows();
  s.map.resize(nv);
  s.col.resize(nv);

  int n = 0;
  for (int k = 0; k < nv; ++k) {
    if (p.lo[k] > p.hi[k]) throw numerical("NumericalFailure", fmt::format("variable {} has lo > hi", k));
    s.col[k] = n;
    if (std::isfinite(p.lo[k])) {
      s.map[k] = Map::Shift;
      n += 1;
    } else if (std::isfinite(p.hi[k])) {
      s.map[k] = Map::Mirror;
      n += 1;
    } else {
      s.map[k] = Map::Split;
      n += 2;
    }
  }
  const int structural = n;
  int slacks = 0;
  for (Sense sense : p.senses) slacks += sense != Sense::Eq;

  // Decide signs and which rows need artificials before sizing the matrix.
  Eigen::VectorXd b(s.m);
  for (int i = 0; i < s.m; ++i) {
    double bi = p.rhs[i];
    for (int k = 0; k < nv; ++k) {
      const double a = p.rows[i][k];
      if (a == 0.0) continue;
      if (s.map[k] == Map::Shift) bi -= a * p.lo[k];
      if (s.map[k] == Map::Mirror) bi -= a * p.hi[k];
    }
    b(i) = bi;
  }
  s.sign.assign(s.m, 1);
  int artificials = 0;
  std::vector<int> slack_coef(s.m, 0);
  for (int i = 0; i < s.m; ++i) {
    if (b(i) < 0.0) s.sign[i] = -1;
    const int coef = p.senses[i] == Sense::Le ? 1 : p.senses[i] == Sense::Ge ? -1 : 0;
    slack_coef[i] = coef * s.sign[i];
    if (slack_coef[i] != 1) ++artificials;
  }

  s.n = structural + slacks + artificials;
  s.A = Eigen::MatrixXd::Zero(s.m, s.n);
  s.c = Eigen::VectorXd::Zero(s.n);
  s.u = Eigen::VectorXd::Constant(s.n, kInf);
  s.artificial.assign(s.n, 0);
  s.initial_basis.assign(s.m, -1);

  for (int k = 0; k < nv; ++k) {
    const int j = s.col[k];
    switch (s.map[k]) {
      case Map::Shift:
        s.c(j) = p.c[k];
        s.u(j) = p.hi[k] - p.lo[k];
        s.offset += p.c[k] * p.lo[k];
        for (int i = 0; i < s.m; ++i) s.A(i, j) = s.sign[i] * p.rows[i][k];
        break;
      case Map::Mirror:
        s.c(j) = -p.c[k];
        s.offset += p.c[k] * p.hi[k];
        for (int i = 0; i < s.m; ++i) s.A(i, j) = -s.sign[i] * p.rows[i][k];
        break;
      case Map::Split:
        s.c(j) = p.c[k];
        s.c(j + 1) = -p.c[k];
        for (int i = 0; i < s.m; ++i) {
          s.A(i, j) = s.sign[i] * p.rows[i][k];
          s.A(i, j + 1) = -s.sign[i] * p.rows[i][k];
        }
        break;
    }
  }
  int next = structural;
  for (int i = 0; i < s.m; ++i) {
    if (p.senses[i] == Sense::Eq) continue;
    s.A(i, next) = slack_coef[i];
    if (slack_coef[i] == 1) s.initial_basis[i] = next;
    ++next;
  }
  for (int i = 0; i < s.m; ++i) {
    if (s.initial_basis[i] >= 0) continue;
    s.A(i, next) = 1.0;
    s.artificial[next] = 1;
    s.initial_basis[i] = next;
    ++next;
  }
  for (int i = 0; i < s.m; ++i) b(i) *= s.sign[i];
  s.b = b;
  return s;
}

class Simplex {
 public:
  Simplex(const StandardForm& sf, const LpOptions& opts) : s_(sf), tol_(opts.tol) {
    max_iter_ = opts.max_iterations > 0 ? opts.max_iterations : 50L * (s_.m + s_.n) + 1000;
    basis_ = s_.initial_basis;
    in_basis_.assign(s_.n, -1);
    for (int i = 0; i < s_.m; ++i) in_basis_[basis_[i]] = i;
    at_upper_.assign(s_.n, 0);
    T_ = s_.A;
    xB_ = s_.b;
    ub_ = s_.u;
    feas_tol_ = 1e-9 * std::max(1.0, s_.b.size() ? s_.b.cwiseAbs().maxCoeff() : 0.0);
  }

  LpStatus run(long& iterations) {
    // Phase 1: drive the artificials to zero.
    bool any_artificial = std::any_of(s_.artificial.begin(), s_.artificial.end(), [](char a) { return a; });
    if (any_artificial) {
      cost_ = Eigen::VectorXd::Zero(s_.n);
      for (int j = 0; j < s_.n; ++j)
        if (s_.artificial[j]) cost_(j) = 1.0;
      solve_phase(iterations, /*phase1=*/true);
      if (infeasible_) return LpStatus::Infeasible;
      double infeas = 0.0;
      for (int i = 0; i < s_.m; ++i)
        if (s_.artificial[basis_[i]]) infeas += xB_(i);
      if (infeas > s_.m * feas_tol_) return LpStatus::Infeasible;
    }
    // Phase 2: artificials are frozen at zero.
    for (int j = 0; j < s_.n; ++j)
      if (s_.artificial[j]) u(j) = 0.0;
    cost_ = s_.c;
    if (!solve_phase(iterations, /*phase1=*/false)) return LpStatus::Unbounded;
    if (infeasible_) return LpStatus::Infeasible;
    return LpStatus::Optimal;
  }

  // Standard-form solution and row duals.
  Eigen::VectorXd x() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s_.n);
    for (int j = 0; j < s_.n; ++j)
      if (in_basis_[j] < 0 && at_upper_[j]) x(j) = u(j);
    for (int i = 0; i < s_.m; ++i) x(basis_[i]) = xB_(i);
    return x;
  }
  const Eigen::VectorXd& y() const { return y_; }
  double dual_objective() const {
    double v = s_.b.dot(y_);
    for (int j = 0; j < s_.n; ++j)
      if (in_basis_[j] < 0 && at_upper_[j] && std::isfinite(u(j))) v += d_(j) * u(j);
    return v;
  }

 private:
  double u(int j) const { return ub_(j); }
  double& u(int j) { return ub_(j); }

  void price() {
    Eigen::VectorXd cb(s_.m);
    for (int i = 0; i < s_.m; ++i) cb(i) = cost_(basis_[i]);
    d_ = cost_ - T_.transpose() * cb;
    for (int i = 0; i < s_.m; ++i) d_(basis_[i]) = 0.0;
  }

  enum class Check { Ok, PrimalInfeasible, NotOptimal };

  // Iterates to optimality, repairing the basis whenever refactorization
  // exposes accumulated primal infeasibility. False on unboundedness.
  bool solve_phase(long& iterations, bool phase1) {
    for (int attempt = 0;; ++attempt) {
      price();
      if (!iterate(iterations, phase1)) return false;
      const Check c = refactor();
      if (c == Check::Ok) return true;
      if (attempt >= 8)
        throw numerical("NumericalFailure", "simplex could not certify the final basis after refactorization");
      if (c == Check::PrimalInfeasible) {
        repair(iterations);
        if (infeasible_) return true;
        refactor();
      }
    }
  }

  // Composite step: minimizes the total bound violation of the basic
  // variables, starting from the current basis. A positive minimum sets
  // infeasible_.
  void repair(long& iterations) {
    for (;;) {
      if (++iterations > max_iter_)
        throw numerical("NumericalFailure", fmt::format("simplex exceeded {} iterations", max_iter_));
      Eigen::VectorXd cb = Eigen::VectorXd::Zero(s_.m);
      bool any = false;
      for (int i = 0; i < s_.m; ++i) {
        if (xB_(i) < -feas_tol_) cb(i) = -1.0;
        else if (xB_(i) > u(basis_[i]) + feas_tol_) cb(i) = 1.0;
        else continue;
        any = true;
      }
      if (!any) return;
      const Eigen::VectorXd d = -(T_.transpose() * cb);

      int enter = -1;
      double best = 0.0;
      for (int j = 0; j < s_.n; ++j) {
        if (in_basis_[j] >= 0 || u(j) <= 0.0) continue;
        const bool improves = at_upper_[j] ? d(j) > tol_ : d(j) < -tol_;
        if (improves && std::abs(d(j)) > best) {
          best = std::abs(d(j));
          enter = j;
        }
      }
      if (enter < 0) {
        infeasible_ = true;
        return;
      }
      const double dir = at_upper_[enter] ? -1.0 : 1.0;

      // Infeasible basics may travel up to the bound they violate; feasible
      // ones must stay within both bounds.
      const double piv_tol = std::max(kPivotFloor, kRelPivot * T_.col(enter).cwiseAbs().maxCoeff());
      int leave = -1;
      double theta = u(enter);
      bool leave_upper = false;
      double best_piv = 0.0;
      for (int i = 0; i < s_.m; ++i) {
        const double delta = dir * T_(i, enter);
        if (std::abs(delta) <= piv_tol) continue;
        const double x = xB_(i), ub = u(basis_[i]);
        double ratio;
        bool to_upper;
        if (x < -feas_tol_) {
          if (delta > 0.0) continue;
          ratio = -x / -delta;
          to_upper = false;
        } else if (x > ub + feas_tol_) {
          if (delta < 0.0) continue;
          ratio = (x - ub) / delta;
          to_upper = true;
        } else if (delta > 0.0) {
          ratio = std::max(x, 0.0) / delta;
          to_upper = false;
        } else if (std::isfinite(ub)) {
          ratio = std::max(ub - x, 0.0) / -delta;
          to_upper = true;
        } else {
          continue;
        }
        const bool shorter = ratio < theta - 1e-12 * (1.0 + theta);
        const bool tie = !shorter && ratio <= theta + 1e-12 * (1.0 + theta);
        if (shorter || (tie && std::abs(delta) > best_piv)) {
          leave = i;
          theta = ratio;
          leave_upper = to_upper;
          best_piv = std::abs(delta);
        }
      }
      if (!std::isfinite(theta))
        throw numerical("NumericalFailure", "simplex lost primal feasibility and could not restore it");
      if (leave >= 0 && theta >= u(enter)) leave = -1;
      step(enter, leave, dir, std::max(0.0, leave >= 0 ? theta : u(enter)), leave_upper);
    }
  }

  void step(int enter, int leave, double dir, double theta, bool leave_upper) {
    xB_.noalias() -= (theta * dir) * T_.col(enter);
    if (leave < 0) {
      at_upper_[enter] = !at_upper_[enter];
      clamp_basics();
      return;
    }
    const double enter_value = dir > 0 ? theta : u(enter) - theta;
    pivot(leave, enter);
    const int out = basis_[leave];
    in_basis_[out] = -1;
    at_upper_[out] = leave_upper;
    basis_[leave] = enter;
    in_basis_[enter] = leave;
    at_upper_[enter] = 0;
    xB_(leave) = enter_value;
    clamp_basics();
  }

  // Returns false on unboundedness.
  bool iterate(long& iterations, bool phase1) {
    int degenerate = 0;
    bool bland = false;
    long since_refactor = 0;
    for (;;) {
      if (++iterations > max_iter_)
        throw numerical("NumericalFailure", fmt::format("simplex exceeded {} iterations", max_iter_));
      if (++since_refactor > 500) {
        if (refactor() == Check::PrimalInfeasible) {
          repair(iterations);
          if (infeasible_) return true;
          refactor();
        }
        price();
        since_refactor = 0;
      }

      // Pricing.
      int enter = -1;
      double best = 0.0;
      for (int j = 0; j < s_.n; ++j) {
        if (in_basis_[j] >= 0) continue;
        if (!phase1 && s_.artificial[j]) continue;
        if (u(j) <= 0.0) continue;
        const double dj = d_(j);
        const bool improves = at_upper_[j] ? dj > tol_ : dj < -tol_;
        if (!improves) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          enter = j;
        }
      }
      if (enter < 0) return true;
      const double dir = at_upper_[enter] ? -1.0 : 1.0;

      // Ratio test: minimum ratio, preferring the largest pivot among ties.
      // Entries below a relative threshold of the column are treated as zero.
      const double piv_tol = std::max(kPivotFloor, kRelPivot * T_.col(enter).cwiseAbs().maxCoeff());
      double theta_min = u(enter);
      for (int i = 0; i < s_.m; ++i) {
        const double delta = dir * T_(i, enter);
        const double ub = u(basis_[i]);
        if (delta > piv_tol)
          theta_min = std::min(theta_min, std::max(xB_(i), 0.0) / delta);
        else if (delta < -piv_tol && std::isfinite(ub))
          theta_min = std::min(theta_min, std::max(ub - xB_(i), 0.0) / -delta);
      }
      if (!std::isfinite(theta_min)) return false;
      const double tie = theta_min + 1e-12 * (1.0 + theta_min);

      int leave = -1;
      double leave_theta = u(enter);
      bool leave_upper = false;
      double best_piv = 0.0;
      for (int i = 0; i < s_.m; ++i) {
        const double delta = dir * T_(i, enter);
        const double ub = u(basis_[i]);
        double ratio;
        bool to_upper;
        if (delta > piv_tol) {
          ratio = std::max(xB_(i), 0.0) / delta;
          to_upper = false;
        } else if (delta < -piv_tol && std::isfinite(ub)) {
          ratio = std::max(ub - xB_(i), 0.0) / -delta;
          to_upper = true;
        } else {
          continue;
        }
        if (ratio > tie) continue;
        const bool take = bland ? (leave < 0 || basis_[i] < basis_[leave]) : std::abs(delta) > best_piv;
        if (take) {
          leave = i;
          leave_theta = ratio;
          leave_upper = to_upper;
          best_piv = std::abs(delta);
        }
      }
      if (leave >= 0 && leave_theta >= u(enter)) leave = -1;  // bound flip is at least as short
      const double theta = std::max(0.0, leave >= 0 ? leave_theta : u(enter));

      if (theta <= 1e-12) {
        if (++degenerate > kDegenerateRun) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }

      step(enter, leave, dir, theta, leave_upper);
    }
  }

  void pivot(int r, int j) {
    const double piv = T_(r, j);
    if (std::abs(piv) < kPivotFloor)
      throw numerical("NumericalFailure", fmt::format("pivot magnitude {:.3e} below 1e-11", std::abs(piv)));
    Eigen::RowVectorXd prow = T_.row(r) / piv;
    Eigen::VectorXd col = T_.col(j);
    col(r) = 0.0;
    T_.noalias() -= col * prow;
    T_.row(r) = prow;
    const double dj = d_(j);
    d_.noalias() -= dj * prow.transpose();
    d_(j) = 0.0;
  }

  void clamp_basics() {
    for (int i = 0; i < s_.m; ++i) {
      if (xB_(i) < 0.0 && xB_(i) > -kClampTol) xB_(i) = 0.0;
      const double ub = u(basis_[i]);
      if (xB_(i) > ub && xB_(i) < ub + kClampTol) xB_(i) = ub;
    }
  }

  // Recomputes the tableau from the original columns and checks primal
  // feasibility and dual optimality of the basis.
  Check refactor() {
    Eigen::MatrixXd B(s_.m, s_.m);
    for (int i = 0; i < s_.m; ++i) B.col(i) = s_.A.col(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    if (s_.m > 0 && !(lu.rcond() > 1e-14))
      throw numerical("NumericalFailure", "basis matrix became singular");
    Eigen::VectorXd rhs = s_.b;
    for (int j = 0; j < s_.n; ++j)
      if (in_basis_[j] < 0 && at_upper_[j]) rhs -= u(j) * s_.A.col(j);
    xB_ = lu.solve(rhs);
    T_ = lu.solve(s_.A);
    Eigen::VectorXd cb(s_.m);
    for (int i = 0; i < s_.m; ++i) cb(i) = cost_(basis_[i]);
    y_ = lu.transpose().solve(cb);
    d_ = cost_ - s_.A.transpose() * y_;
    for (int i = 0; i < s_.m; ++i) d_(basis_[i]) = 0.0;

    for (int i = 0; i < s_.m; ++i) {
      const double ub = u(basis_[i]);
      if (xB_(i) < -feas_tol_ || xB_(i) > ub + feas_tol_) return Check::PrimalInfeasible;
    }
    clamp_basics();
    for (int j = 0; j < s_.n; ++j) {
      if (in_basis_[j] >= 0 || s_.artificial[j] || u(j) <= 0.0) continue;
      if (at_upper_[j] ? d_(j) > 10 * tol_ : d_(j) < -10 * tol_) return Check::NotOptimal;
    }
    return Check::Ok;
  }

  const StandardForm& s_;
  double tol_;
  double feas_tol_;
  long max_iter_;
  RowMatrix T_;
  Eigen::VectorXd xB_, d_, cost_, y_;
  std::vector<int> basis_, in_basis_;
  std::vector<char> at_upper_;
  Eigen::VectorXd ub_;
  bool infeasible_ = false;
};

}  // namespace

LpResult solve_lp(const LpProblem& p, const LpOptions& opts) {
  if (p.num_rows() == 0) {
    // separable: each variable sits at its cheaper bound
    LpResult res;
    res.x.resize(p.num_vars());
    for (int k = 0; k < p.num_vars(); ++k) {
      if (p.lo[k] > p.hi[k]) return res;
      const double c = p.c[k];
      const double at = c > 0.0 ? p.lo[k] : c < 0.0 ? p.hi[k] : std::clamp(0.0, p.lo[k], p.hi[k]);
      if (!std::isfinite(at)) {
        res.status = LpStatus::Unbounded;
        return res;
      }
      res.x[k] = at;
      res.objective += c * at;
    }
    res.status = LpStatus::Optimal;
    res.dual_objective = res.objective;
    return res;
  }
  const StandardForm sf = standardize(p);
  Simplex simplex(sf, opts);
  LpResult res;
  res.status = simplex.run(res.iterations);
  if (res.status != LpStatus::Optimal) return res;

  const Eigen::VectorXd xs = simplex.x();
  const int nv = p.num_vars();
  res.x.resize(nv);
  for (int k = 0; k < nv; ++k) {
    const int j = sf.col[k];
    switch (sf.map[k]) {
      case Map::Shift:
        res.x[k] = p.lo[k] + xs(j);
        break;
      case Map::Mirror:
        res.x[k] = p.hi[k] - xs(j);
        break;
      case Map::Split:
        res.x[k] = xs(j) - xs(j + 1);
        break;
    }
    res.x[k] = std::clamp(res.x[k], p.lo[k], p.hi[k]);
  }
  res.objective = 0.0;
  for (int k = 0; k < nv; ++k) res.objective += p.c[k] * res.x[k];
  res.duals.resize(p.num_rows());
  for (int i = 0; i < p.num_rows(); ++i) res.duals[i] = sf.sign[i] * simplex.y()(i);
  res.dual_objective = simplex.dual_objective() + sf.offset;

  for (int i = 0; i < p.num_rows(); ++i) {
    double ax = 0.0;
    for (int k = 0; k < nv; ++k) ax += p.rows[i][k] * res.x[k];
    const double scale = 1e-7 * (1.0 + std::abs(p.rhs[i]));
    const bool ok = p.senses[i] == Sense::Le   ? ax <= p.rhs[i] + scale
                    : p.senses[i] == Sense::Ge ? ax >= p.rhs[i] - scale
                                               : std::abs(ax - p.rhs[i]) <= scale;
    if (!ok)
      throw numerical("NumericalFailure",
                      fmt::format("row {} violated by {:.3e} at the reported optimum", i, ax - p.rhs[i]));
  }
  return res;
}

void write_lp(const LpProblem& p, std::ostream& out) {
  out << fmt::format("# rows {} cols {}\n", p.num_rows(), p.num_vars());
  out << "obj";
  for (double v : p.c) out << fmt::format(" {:.17g}", v);
  out << "\nlo";
  for (double v : p.lo) out << fmt::format(" {:.17g}", v);
  out << "\nhi";
  for (double v : p.hi) out << fmt::format(" {:.17g}", v);
  out << "\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    out << "row";
    for (double v : p.rows[i]) out << fmt::format(" {:.17g}", v);
    const char* s = p.senses[i] == Sense::Le ? "<=" : p.senses[i] == Sense::Ge ? ">=" : "=";
    out << fmt::format(" {} {:.17g}\n", s, p.rhs[i]);
  }
}

// ------------------------------------------------------------------ SOS2

namespace {

// Index within the set of a violated SOS2 condition split point, or -1.
int violated_split(const std::vector<double>& x, const Sos2Set& set, double tol) {
  int first = -1, last = -1;
  double mass = 0.0, weighted = 0.0;
  const int n = static_cast<int>(set.vars.size());
  for (int i = 0; i < n; ++i) {
    const double v = x[set.vars[i]];
    if (v > tol) {
      if (first < 0) first = i;
      last = i;
    }
    mass += std::max(v, 0.0);
    weighted += i * std::max(v, 0.0);
  }
  if (first < 0 || last - first <= 1) return -1;
  const int r = static_cast<int>(std::lround(weighted / mass));
  return std::clamp(r, first + 1, last - 1);
}

struct Node {
  double bound;
  long id;
  std::vector<double> hi;
  std::vector<double> x;
  bool operator<(const Node& o) const {
    return bound != o.bound ? bound > o.bound : id > o.id;  // min-heap, FIFO on ties
  }
};

}  // namespace

bool sos2_feasible(const std::vector<double>& x, const std::vector<Sos2Set>& sets, double tol) {
  for (const Sos2Set& s : sets) {
    int first = -1, last = -1, count = 0;
    for (int i = 0; i < static_cast<int>(s.vars.size()); ++i) {
      if (std::abs(x[s.vars[i]]) > tol) {
        if (first < 0) first = i;
        last = i;
        ++count;
      }
    }
    if (count > 2 || (count == 2 && last - first != 1)) return false;
  }
  return true;
}

MilpResult solve_milp_sos2(const LpProblem& p, const std::vector<Sos2Set>& sets, const MilpOptions& opts) {
  MilpResult best;
  best.objective = kInf;
  LpProblem work = p;

  auto solve_node = [&](const std::vector<double>& hi) {
    work.hi = hi;
    return solve_lp(work, opts.lp);
  };

  std::priority_queue<Node> open;
  long next_id = 0;
  bool unbounded = false;
  auto push = [&](std::vector<double> hi, long parent) {
    const LpResult lp = solve_node(hi);
    const long id = next_id++;
    ++best.nodes;
    if (lp.status == LpStatus::Unbounded) {
      unbounded = true;
      return;
    }
    if (lp.status != LpStatus::Optimal) return;
    if (opts.record_trace) best.trace.push_back({id, parent, lp.objective});
    if (lp.objective >= best.objective - opts.gap) return;
    bool feasible = true;
    for (const Sos2Set& s : sets)
      if (violated_split(lp.x, s, opts.sos_tol) >= 0) {
        feasible = false;
        break;
      }
    if (feasible) {
      best.status = LpStatus::Optimal;
      best.objective = lp.objective;
      best.x = lp.x;
      return;
    }
    open.push({lp.objective, id, std::move(hi), lp.x});
  };

  push(p.hi, -1);
  if (unbounded) {
    best.status = LpStatus::Unbounded;
    return best;
  }
  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.bound >= best.objective - opts.gap) continue;
    if (best.nodes >= opts.node_limit)
      throw numerical("NodeLimit", fmt::format("branch-and-bound exceeded {} nodes", opts.node_limit));
    int which = -1, split = -1;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      split = violated_split(node.x, sets[k], opts.sos_tol);
      if (split >= 0) {
        which = static_cast<int>(k);
        break;
      }
    }
    if (which < 0) continue;  // cannot happen: feasible nodes are never queued
    const Sos2Set& s = sets[which];
    std::vector<double> left = node.hi, right = node.hi;
    for (int i = 0; i < static_cast<int>(s.vars.size()); ++i) {
      if (i > split) left[s.vars[i]] = 0.0;
      if (i < split) right[s.vars[i]] = 0.0;
    }
    push(std::move(left), node.id);
    push(std::move(right), node.id);
  }
  if (best.status == LpStatus::Optimal) return best;
  best.objective = 0.0;
  return best;
}

MilpResult solve_knot_restricted(const LpProblem& p, const std::vector<Sos2Set>& sets, const MilpOptions& opts) {
  MilpResult res;
  res.heuristic = true;
  const LpResult root = solve_lp(p, opts.lp);
  ++res.nodes;
  if (root.status != LpStatus::Optimal) {
    res.status = root.status;
    return res;
  }
  std::vector<int> pick(sets.size());
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto& v = sets[k].vars;
    int arg = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
      if (root.x[v[i]] > root.x[v[arg]]) arg = i;
    pick[k] = arg;
  }
  LpProblem work = p;
  auto evaluate = [&](const std::vector<int>& choice) {
    work.hi = p.hi;
    for (std::size_t k = 0; k < sets.size(); ++k)
      for (int i = 0; i < static_cast<int>(sets[k].vars.size()); ++i)
        if (i != choice[k]) work.hi[sets[k].vars[i]] = 0.0;
    ++res.nodes;
    return solve_lp(work, opts.lp);
  };
  LpResult cur = evaluate(pick);
  double cur_obj = cur.status == LpStatus::Optimal ? cur.objective : kInf;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      for (int step : {-1, 1}) {
        const int cand = pick[k] + step;
        if (cand < 0 || cand >= static_cast<int>(sets[k].vars.size())) continue;
        std::vector<int> trial = pick;
        trial[k] = cand;
        const LpResult lp = evaluate(trial);
        if (lp.status == LpStatus::Optimal && lp.objective < cur_obj - opts.gap) {
          pick = trial;
          cur = lp;
          cur_obj = lp.objective;
          improved = true;
        }
      }
      if (res.nodes >= opts.node_limit)
        throw numerical("NodeLimit", fmt::format("knot-restricted search exceeded {} LPs", opts.node_limit));
    }
  }
  if (!std::isfinite(cur_obj)) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.x = cur.x;
  res.objective = cur_obj;
  return res;
}

}  // namespace qsize
