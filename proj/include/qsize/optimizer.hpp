#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qsize/lp.hpp"
#include "qsize/pwl.hpp"

namespace qsize {

enum class Template { Generic, EquityOST, EquityAb };

std::string to_string(Template t);
Template template_from_string(const std::string& s);

struct Box {
  double lo, hi;
};

/// One capacity-sizing instance. For the equity templates the measure list
/// holds the single template measure and the cost/coupling data are unused.
struct SizingProblem {
  Template kind = Template::Generic;
  std::vector<QueueSpec> queues;
  std::vector<MeasureKind> measures;
  std::vector<Box> boxes;  // per queue, also the knot range

  // Generic model: min p^T w  s.t.  M w <= d, w indexed k * L + l.
  std::vector<double> cost;
  std::vector<std::vector<double>> coupling;
  std::vector<double> rhs;

  // Equity templates.
  double varsigma = 0.0;
  double theta_lower = 0.65, theta_upper = 0.95;
  /// Budget on the total rate; applies to every template when set.
  std::optional<double> mu_total;

  int r = 10;
  int knots = 7;
  double epsilon = 1e-3;
  long node_limit = 200000;
  bool knot_restricted = false;

  int K() const { return static_cast<int>(queues.size()); }
  int L() const { return static_cast<int>(measures.size()); }
};

/// Equity template over `queues`: boxes [theta_L lambda_k, theta_U lambda_k]
/// clipped to [mu_min, mu_max], budget mu_total (default 0.879 * sum lambda).
/// Throws InfeasibleBox when a clipped box is empty.
SizingProblem build_equity_model(const std::vector<QueueSpec>& queues, Template kind, double varsigma,
                                 std::optional<double> mu_total = std::nullopt, double theta_lower = 0.65,
                                 double theta_upper = 0.95, int knots = 7, int r = 10, double epsilon = 1e-3,
                                 double mu_min = 0.0, double mu_max = kInf);

/// Generic model with every queue boxed in [mu_min, mu_max].
SizingProblem build_generic_model(const std::vector<QueueSpec>& queues, const std::vector<MeasureKind>& measures,
                                  std::vector<double> cost, std::vector<std::vector<double>> coupling,
                                  std::vector<double> rhs, double mu_min, double mu_max, int knots = 7,
                                  int r = 10, double epsilon = 1e-3);

/// Step 1 and 2 output: pwl[k][l].
using PwlTable = std::vector<std::vector<PwlFunction>>;

PwlTable build_pwl_table(const SizingProblem& p);

/// Column positions in the assembled LP.
struct ModelLayout {
  std::vector<int> mu;                   // per queue
  std::vector<int> w;                    // k * L + l
  int w_bar = -1, Z = -1;                // equity templates
  std::vector<int> z;                    // equity templates
  std::vector<std::vector<int>> weight;  // per queue, one per knot
  int budget_row = -1;
  int varsigma_row = -1;
  std::vector<int> coupling_rows;
};

struct AssembledModel {
  LpProblem lp;
  std::vector<Sos2Set> sos;
  ModelLayout layout;
};

/// Piecewise-linear program with one SOS2 set per queue. The generic model
/// uses phi <= w + eps/2; the equity templates use the band |phi - w| <= eps/2.
AssembledModel assemble(const SizingProblem& p, const PwlTable& pwl);

struct Solution {
  std::vector<double> mu;
  std::vector<double> w;  // k * L + l
  double objective = 0.0;
  double w_bar = 0.0, Z = 0.0;
  std::vector<double> z;
  std::vector<double> row_slack;  // one per LP row, >= 0 for satisfied rows
  double budget_slack = kInf;
  long nodes = 0;
  bool heuristic = false;
  PwlTable pwl;
};

/// Steps 1 to 3. Throws Infeasible when the piecewise-linear program has no
/// feasible point.
Solution run_algorithm1(const SizingProblem& p);

/// Solves an already assembled model.
Solution solve_assembled(const SizingProblem& p, const AssembledModel& m, PwlTable pwl);

struct VerificationReport {
  int r_check = 0;
  std::vector<double> exact;      // E at r_check, k * L + l
  std::vector<double> violation;  // exact - w
  double max_violation = 0.0;
  double max_abs_gap = 0.0;        // max |exact - w|
  double max_coupling_excess = 0.0;  // > 0 when a coupling row is violated
  bool passed = false;
};

/// Re-evaluates every measure at r_check > p.r and checks the relaxed
/// constraints (tolerance eps + 1e-6) and the coupling rows (1e-9).
VerificationReport verify_epsilon_optimality(const Solution& sol, const SizingProblem& p, int r_check);

nlohmann::json to_json(const Solution& s, const SizingProblem& p);
nlohmann::json to_json(const VerificationReport& v);
void write_solution_csv(const Solution& s, const SizingProblem& p, const std::string& path);

}  // namespace qsize
