#include "qsize/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/os.h>

#include "qsize/errors.hpp"
#include "qsize/parallel.hpp"

namespace qsize {

std::string to_string(Template t) {
  switch (t) {
    case Template::Generic:
      return "generic";
    case Template::EquityOST:
      return "equity_sojourn";
    case Template::EquityAb:
      return "equity_abandonment";
  }
  return "?";
}

Template template_from_string(const std::string& s) {
  if (s == "generic") return Template::Generic;
  if (s == "equity_sojourn") return Template::EquityOST;
  if (s == "equity_abandonment") return Template::EquityAb;
  throw SchemaError(0, "template", "expected generic, equity_sojourn or equity_abandonment, got '" + s + "'");
}

namespace {

bool is_equity(Template t) { return t != Template::Generic; }

void check_common(const SizingProblem& p) {
  if (!(p.epsilon > 0.0)) throw domain_error("OutOfDomain", "epsilon must be positive");
  if (p.knots < 2) throw domain_error("OutOfDomain", "need at least two knots");
  if (p.boxes.size() != p.queues.size()) throw domain_error("OutOfDomain", "one box per queue is required");
  for (std::size_t k = 0; k < p.boxes.size(); ++k)
    if (!(p.boxes[k].hi > p.boxes[k].lo) || !(p.boxes[k].lo > 0.0))
      throw infeasible("InfeasibleBox", fmt::format("queue '{}' has an empty rate box [{}, {}]", p.queues[k].id,
                                                    p.boxes[k].lo, p.boxes[k].hi));
}

}  // namespace

SizingProblem build_equity_model(const std::vector<QueueSpec>& queues, Template kind, double varsigma,
                                 std::optional<double> mu_total, double theta_lower, double theta_upper, int knots,
                                 int r, double epsilon, double mu_min, double mu_max) {
  if (!is_equity(kind)) throw domain_error("OutOfDomain", "build_equity_model needs an equity template");
  if (!(varsigma > 0.0)) throw domain_error("OutOfDomain", "varsigma must be positive");
  if (!(theta_upper > theta_lower && theta_lower > 0.0))
    throw domain_error("OutOfDomain", "need 0 < theta_lower < theta_upper");
  SizingProblem p;
  p.kind = kind;
  p.queues = queues;
  p.measures = {kind == Template::EquityOST ? MeasureKind::sojourn() : MeasureKind::abandonment()};
  p.varsigma = varsigma;
  p.theta_lower = theta_lower;
  p.theta_upper = theta_upper;
  double total_lambda = 0.0;
  for (const QueueSpec& q : queues) {
    const double lam = q.lambda();
    total_lambda += lam;
    if (theta_lower * lam > mu_max)
      throw infeasible("InfeasibleBox", fmt::format("queue '{}': theta_lower * lambda = {} exceeds mu_max = {}", q.id,
                                                    theta_lower * lam, mu_max));
    p.boxes.push_back({std::max(theta_lower * lam, mu_min), std::min(theta_upper * lam, mu_max)});
  }
  p.mu_total = mu_total.value_or(0.879 * total_lambda);
  if (!(*p.mu_total > 0.0)) throw domain_error("OutOfDomain", "mu_total must be positive");
  p.knots = knots;
  p.r = r;
  p.epsilon = epsilon;
  check_common(p);
  return p;
}

SizingProblem build_generic_model(const std::vector<QueueSpec>& queues, const std::vector<MeasureKind>& measures,
                                  std::vector<double> cost, std::vector<std::vector<double>> coupling,
                                  std::vector<double> rhs, double mu_min, double mu_max, int knots, int r,
                                  double epsilon) {
  SizingProblem p;
  p.kind = Template::Generic;
  p.queues = queues;
  p.measures = measures;
  const std::size_t dim = queues.size() * measures.size();
  if (cost.size() != dim)
    throw SchemaError(0, "cost", fmt::format("expected {} entries (queues x measures), got {}", dim, cost.size()));
  if (coupling.size() != rhs.size()) throw SchemaError(0, "coupling", "one rhs entry per coupling row is required");
  for (const auto& row : coupling)
    if (row.size() != dim) throw SchemaError(0, "coupling", fmt::format("each row needs {} entries", dim));
  p.cost = std::move(cost);
  p.coupling = std::move(coupling);
  p.rhs = std::move(rhs);
  p.boxes.assign(queues.size(), {mu_min, mu_max});
  p.knots = knots;
  p.r = r;
  p.epsilon = epsilon;
  check_common(p);
  return p;
}

PwlTable build_pwl_table(const SizingProblem& p) {
  check_common(p);
  const int K = p.K(), N = p.knots;
  // One work item per (queue, knot); chains are independent.
  std::vector<std::vector<double>> at(static_cast<std::size_t>(K) * N);
  std::vector<std::vector<double>> knots(K);
  for (int k = 0; k < K; ++k) knots[k] = equally_spaced_knots(p.boxes[k].lo, p.boxes[k].hi, N);
  parallel_for(at.size(), [&](std::size_t idx) {
    const int k = static_cast<int>(idx) / N, i = static_cast<int>(idx) % N;
    at[idx] = finite_measures(p.queues[k], p.measures, knots[k][i], p.r);
  });
  PwlTable table(K, std::vector<PwlFunction>(p.L()));
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < p.L(); ++l) {
      table[k][l].knots = knots[k];
      for (int i = 0; i < N; ++i) table[k][l].values.push_back(at[k * N + i][l]);
    }
  return table;
}

AssembledModel assemble(const SizingProblem& p, const PwlTable& pwl) {
  const int K = p.K(), L = p.L();
  const double half = 0.5 * p.epsilon;
  const bool equity = is_equity(p.kind);
  AssembledModel m;
  LpProblem& lp = m.lp;
  ModelLayout& lay = m.layout;

  for (int k = 0; k < K; ++k) lay.mu.push_back(lp.add_var(0.0, p.boxes[k].lo, p.boxes[k].hi));
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double c = equity ? 0.0 : p.cost[k * L + l];
      lay.w.push_back(lp.add_var(c, equity ? 0.0 : -kInf, kInf));
    }
  if (equity) {
    lay.w_bar = lp.add_var(0.0, 0.0, kInf);
    for (int k = 0; k < K; ++k) lay.z.push_back(lp.add_var(0.0, 0.0, kInf));
    lay.Z = lp.add_var(1.0, 0.0, kInf);
  }
  lay.weight.resize(K);
  for (int k = 0; k < K; ++k) {
    const int N = static_cast<int>(pwl[k][0].knots.size());
    for (int i = 0; i < N; ++i) lay.weight[k].push_back(lp.add_var(0.0, 0.0, 1.0));
    m.sos.push_back({lay.weight[k]});
  }

  for (int k = 0; k < K; ++k) {
    std::vector<std::pair<int, double>> convex, rate{{lay.mu[k], 1.0}};
    for (std::size_t i = 0; i < lay.weight[k].size(); ++i) {
      convex.emplace_back(lay.weight[k][i], 1.0);
      rate.emplace_back(lay.weight[k][i], -pwl[k][0].knots[i]);
    }
    lp.add_row(convex, Sense::Eq, 1.0);
    lp.add_row(rate, Sense::Eq, 0.0);
  }
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      std::vector<std::pair<int, double>> band;
      for (std::size_t i = 0; i < lay.weight[k].size(); ++i) band.emplace_back(lay.weight[k][i], pwl[k][l].values[i]);
      band.emplace_back(lay.w[k * L + l], -1.0);
      lp.add_row(band, Sense::Le, half);  // phi - w <= eps/2
      if (equity) lp.add_row(band, Sense::Ge, -half);
    }

  if (equity) {
    std::vector<std::pair<int, double>> mean;
    double total_lambda = 0.0;
    for (int k = 0; k < K; ++k) {
      const double lam = p.queues[k].lambda();
      total_lambda += lam;
      mean.emplace_back(lay.w[k], -lam);
    }
    mean.emplace_back(lay.w_bar, total_lambda);
    lp.add_row(mean, Sense::Eq, 0.0);
    for (int k = 0; k < K; ++k) {
      lp.add_row({{lay.w[k], 1.0}, {lay.w_bar, -1.0}, {lay.z[k], -1.0}}, Sense::Le, 0.0);
      lp.add_row({{lay.w[k], -1.0}, {lay.w_bar, 1.0}, {lay.z[k], -1.0}}, Sense::Le, 0.0);
    }
    std::vector<std::pair<int, double>> mad{{lay.Z, static_cast<double>(K)}};
    for (int k = 0; k < K; ++k) mad.emplace_back(lay.z[k], -1.0);
    lp.add_row(mad, Sense::Eq, 0.0);
    lay.varsigma_row = lp.add_row({{lay.w_bar, 1.0}}, Sense::Le, p.varsigma);
  } else {
    for (std::size_t r = 0; r < p.coupling.size(); ++r) {
      std::vector<std::pair<int, double>> row;
      for (int j = 0; j < K * L; ++j)
        if (p.coupling[r][j] != 0.0) row.emplace_back(lay.w[j], p.coupling[r][j]);
      lay.coupling_rows.push_back(lp.add_row(row, Sense::Le, p.rhs[r]));
    }
  }
  if (p.mu_total) {
    std::vector<std::pair<int, double>> budget;
    for (int k = 0; k < K; ++k) budget.emplace_back(lay.mu[k], 1.0);
    lay.budget_row = lp.add_row(budget, Sense::Le, *p.mu_total);
  }
  return m;
}

Solution solve_assembled(const SizingProblem& p, const AssembledModel& m, PwlTable pwl) {
  MilpOptions opts;
  opts.node_limit = p.node_limit;
  const MilpResult res =
      p.knot_restricted ? solve_knot_restricted(m.lp, m.sos, opts) : solve_milp_sos2(m.lp, m.sos, opts);
  if (res.status == LpStatus::Infeasible)
    throw infeasible("Infeasible", "the piecewise-linear program has no feasible point");
  if (res.status == LpStatus::Unbounded)
    throw infeasible("Unbounded", "the piecewise-linear program is unbounded; check the cost vector");

  const ModelLayout& lay = m.layout;
  Solution s;
  s.objective = res.objective;
  s.nodes = res.nodes;
  s.heuristic = res.heuristic;
  for (int j : lay.mu) s.mu.push_back(res.x[j]);
  for (int j : lay.w) s.w.push_back(res.x[j]);
  if (is_equity(p.kind)) {
    s.w_bar = res.x[lay.w_bar];
    s.Z = res.x[lay.Z];
    for (int j : lay.z) s.z.push_back(res.x[j]);
  }
  for (int i = 0; i < m.lp.num_rows(); ++i) {
    double ax = 0.0;
    for (int j = 0; j < m.lp.num_vars(); ++j) ax += m.lp.rows[i][j] * res.x[j];
    const double b = m.lp.rhs[i];
    s.row_slack.push_back(m.lp.senses[i] == Sense::Le   ? b - ax
                          : m.lp.senses[i] == Sense::Ge ? ax - b
                                                        : -std::abs(ax - b));
  }
  if (lay.budget_row >= 0) s.budget_slack = s.row_slack[lay.budget_row];
  s.pwl = std::move(pwl);
  return s;
}

Solution run_algorithm1(const SizingProblem& p) {
  PwlTable pwl = build_pwl_table(p);
  const AssembledModel m = assemble(p, pwl);
  return solve_assembled(p, m, std::move(pwl));
}

VerificationReport verify_epsilon_optimality(const Solution& sol, const SizingProblem& p, int r_check) {
  if (r_check <= p.r) throw domain_error("OutOfDomain", "r_check must exceed the solve order");
  const int K = p.K(), L = p.L();
  VerificationReport v;
  v.r_check = r_check;
  std::vector<std::vector<double>> exact(K);
  parallel_for(K, [&](std::size_t k) { exact[k] = finite_measures(p.queues[k], p.measures, sol.mu[k], r_check); });
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double e = exact[k][l], w = sol.w[k * L + l];
      v.exact.push_back(e);
      v.violation.push_back(e - w);
      v.max_abs_gap = std::max(v.max_abs_gap, std::abs(e - w));
    }
  v.max_violation = *std::max_element(v.violation.begin(), v.violation.end());

  double excess = 0.0;
  if (is_equity(p.kind)) {
    excess = std::max(excess, sol.w_bar - p.varsigma);
  } else {
    for (std::size_t r = 0; r < p.coupling.size(); ++r) {
      double mw = 0.0;
      for (int j = 0; j < K * L; ++j) mw += p.coupling[r][j] * sol.w[j];
      excess = std::max(excess, mw - p.rhs[r]);
    }
  }
  if (p.mu_total) excess = std::max(excess, std::accumulate(sol.mu.begin(), sol.mu.end(), 0.0) - *p.mu_total);
  v.max_coupling_excess = excess;
  v.passed = v.max_violation <= p.epsilon + 1e-6 && excess <= 1e-9;
  return v;
}

nlohmann::json to_json(const Solution& s, const SizingProblem& p) {
  const int L = p.L();
  nlohmann::json queues = nlohmann::json::array();
  for (int k = 0; k < p.K(); ++k) {
    nlohmann::json w = nlohmann::json::object();
    for (int l = 0; l < L; ++l) w[p.measures[l].name()] = s.w[k * L + l];
    nlohmann::json q{{"id", p.queues[k].id},
                     {"lambda", p.queues[k].lambda()},
                     {"mu", s.mu[k]},
                     {"mu_over_lambda", s.mu[k] / p.queues[k].lambda()},
                     {"box", {p.boxes[k].lo, p.boxes[k].hi}},
                     {"w", w}};
    if (!p.queues[k].labels.empty()) q["labels"] = p.queues[k].labels;
    if (!s.z.empty()) q["z"] = s.z[k];
    queues.push_back(q);
  }
  nlohmann::json j{{"template", to_string(p.kind)},
                   {"objective", s.objective},
                   {"epsilon", p.epsilon},
                   {"r", p.r},
                   {"knots", p.knots},
                   {"nodes", s.nodes},
                   {"heuristic", s.heuristic},
                   {"queues", queues},
                   {"row_slack", s.row_slack}};
  if (is_equity(p.kind)) {
    j["Z"] = s.Z;
    j["w_bar"] = s.w_bar;
    j["varsigma"] = p.varsigma;
    j["measure_link"] = "two-sided band |phi - w| <= epsilon/2 in place of equality";
  }
  if (p.mu_total) {
    j["mu_total"] = *p.mu_total;
    j["budget_slack"] = s.budget_slack;
  }
  return j;
}

nlohmann::json to_json(const VerificationReport& v) {
  return {{"r_check", v.r_check},     {"exact", v.exact},
          {"violation", v.violation}, {"max_violation", v.max_violation},
          {"max_abs_gap", v.max_abs_gap}, {"max_coupling_excess", v.max_coupling_excess},
          {"passed", v.passed}};
}

void write_solution_csv(const Solution& s, const SizingProblem& p, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("queue_id,lambda,mu,mu_over_lambda,measure,w,labels\n");
  const int L = p.L();
  for (int k = 0; k < p.K(); ++k) {
    std::string labels;
    for (const auto& [key, val] : p.queues[k].labels) labels += (labels.empty() ? "" : ";") + key + "=" + val;
    const double lam = p.queues[k].lambda();
    for (int l = 0; l < L; ++l)
      out.print("{},{:.12g},{:.12g},{:.12g},{},{:.12g},{}\n", p.queues[k].id, lam, s.mu[k], s.mu[k] / lam,
                p.measures[l].name(), s.w[k * L + l], labels);
  }
}

}  // namespace qsize
