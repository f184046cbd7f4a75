#include <cmath>
#include <filesystem>
#include <fstream>

#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qsize/errors.hpp"
#include "qsize/optimizer.hpp"

using namespace qsize;
using Catch::Approx;

namespace {

QueueSpec scaled(const QueueSpec& q, double factor, std::string id) {
  const auto& m = std::get<MixtureExponential>(q.arrival.variant());
  std::vector<double> rates = m.rates;
  for (double& r : rates) r *= factor;
  return QueueSpec{std::move(id), ArrivalDist(MixtureExponential{m.weights, rates}), q.patience, {}};
}

// Minimum over every segment assignment of the assembled model with the other weights pinned to zero.
double enumerate_segments(const SizingProblem& p, const AssembledModel& m) {
  const int K = p.K();
  const int N = p.knots;
  std::vector<int> seg(K, 0);
  double best = kInf;
  while (true) {
    LpProblem lp = m.lp;
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < N; ++i)
        if (i != seg[k] && i != seg[k] + 1) lp.hi[m.layout.weight[k][i]] = 0.0;
    const LpResult r = solve_lp(lp);
    if (r.status == LpStatus::Optimal) best = std::min(best, r.objective);
    int k = 0;
    while (k < K && ++seg[k] == N - 1) seg[k++] = 0;
    if (k == K) break;
  }
  return best;
}

std::vector<QueueSpec> three_queues() {
  return {qtest::small_queue(3.0, 2.0, 1), qtest::small_queue(5.0, 2.0, 2), qtest::small_queue(8.0, 2.0, 3)};
}

}  // namespace

TEST_CASE("equity template structure and defaults") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 1);
  const std::vector<QueueSpec> qs{q, q};
  const SizingProblem p = build_equity_model(qs, Template::EquityOST, 10.0, std::nullopt, 0.65, 0.95, 5, 5);
  CHECK(p.theta_lower == 0.65);
  CHECK(p.theta_upper == 0.95);
  REQUIRE(p.mu_total.has_value());
  CHECK(*p.mu_total == Approx(0.879 * 2 * q.lambda()).epsilon(1e-14));
  CHECK(p.boxes[0].lo == Approx(0.65 * q.lambda()));
  CHECK(p.boxes[0].hi == Approx(0.95 * q.lambda()));
  REQUIRE(p.L() == 1);
  CHECK(p.measures[0].type == MeasureType::OfferedSojourn);

  const AssembledModel m = assemble(p, build_pwl_table(p));
  CHECK(m.lp.num_vars() == 2 + 2 + 1 + 2 + 1 + 2 * 5);
  CHECK(m.lp.num_rows() == 6 * 2 + 4);
  CHECK(m.sos.size() == 2);

  const SizingProblem d = build_equity_model(qs, Template::EquityAb, 1.0);
  CHECK(d.knots == 7);
  CHECK(d.epsilon == 1e-3);
  CHECK(d.measures[0].type == MeasureType::AbandonmentProb);
}

TEST_CASE("empty clipped box is reported") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 1);
  try {
    build_equity_model({q}, Template::EquityOST, 1.0, std::nullopt, 0.65, 0.95, 7, 5, 1e-3, 0.0, 0.5 * q.lambda());
    FAIL("empty box accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "InfeasibleBox");
  }
}

TEST_CASE("identical queues get equal rates and zero deviation") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 1);
  const std::vector<QueueSpec> qs{q, q};
  for (Template t : {Template::EquityOST, Template::EquityAb}) {
    const SizingProblem p = build_equity_model(qs, t, 100.0, 100.0, 0.65, 0.95, 5, 5);
    const Solution s = run_algorithm1(p);
    CHECK(s.Z == Approx(0.0).margin(1e-9));
    CHECK(s.mu[0] == Approx(s.mu[1]).margin(1e-7));
  }
}

TEST_CASE("branch and bound matches segment enumeration") {
  const auto qs = three_queues();
  for (int trial = 0; trial < 3; ++trial) {
    const std::vector<QueueSpec> two{qs[trial % 3], qs[(trial + 1) % 3]};
    const Template t = trial % 2 ? Template::EquityAb : Template::EquityOST;
    SizingProblem p = build_equity_model(two, t, 100.0, std::nullopt, 0.65, 0.95, 5, 5);
    const PwlTable pwl = build_pwl_table(p);
    const AssembledModel m = assemble(p, pwl);
    const Solution s = solve_assembled(p, m, pwl);
    CHECK(s.objective == Approx(enumerate_segments(p, m)).margin(1e-8));
  }
}

TEST_CASE("budget below the box floors is infeasible") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 1);
  const SizingProblem p =
      build_equity_model({q, q}, Template::EquityOST, 100.0, 0.9 * 2 * 0.65 * q.lambda(), 0.65, 0.95, 5, 5);
  try {
    run_algorithm1(p);
    FAIL("infeasible budget solved");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }
}

TEST_CASE("solution invariants") {
  const auto qs = three_queues();
  for (Template t : {Template::EquityOST, Template::EquityAb}) {
    SizingProblem p = build_equity_model(qs, t, 100.0, std::nullopt, 0.65, 0.95, 5, 5);
    const Solution s = run_algorithm1(p);
    double mad = 0.0;
    for (int k = 0; k < p.K(); ++k) mad += std::abs(s.w[k] - s.w_bar);
    CHECK(s.Z == Approx(mad / p.K()).margin(1e-9));
    CHECK(s.budget_slack >= -1e-9);
    for (int k = 0; k < p.K(); ++k) {
      CHECK(s.mu[k] >= p.boxes[k].lo - 1e-9);
      CHECK(s.mu[k] <= p.boxes[k].hi + 1e-9);
      CHECK(std::abs(s.w[k] - eval_pwl(s.pwl[k][0], s.mu[k])) <= p.epsilon / 2 + 1e-9);
    }
    double wl = 0.0, lam = 0.0;
    for (int k = 0; k < p.K(); ++k) wl += qs[k].lambda() * s.w[k], lam += qs[k].lambda();
    CHECK(s.w_bar == Approx(wl / lam).margin(1e-9));
    CHECK(s.w_bar <= p.varsigma + 1e-9);
  }
}

TEST_CASE("common scaling of intensities keeps proportional allocations equal") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 5);
  for (double f : {1.0, 2.5}) {
    const QueueSpec a = scaled(q, f, "a"), b = scaled(q, f, "b");
    const SizingProblem p = build_equity_model({a, b}, Template::EquityOST, 100.0, std::nullopt, 0.65, 0.95, 5, 5);
    const Solution s = run_algorithm1(p);
    CHECK(s.mu[0] / a.lambda() == Approx(s.mu[1] / b.lambda()).margin(1e-7));
  }
}

TEST_CASE("verification at a finer order passes on a small instance") {
  const auto qs = three_queues();
  SizingProblem p = build_equity_model(qs, Template::EquityAb, 100.0, std::nullopt, 0.65, 0.95, 5, 6);
  const Solution s = run_algorithm1(p);
  const VerificationReport v = verify_epsilon_optimality(s, p, 9);
  INFO("max violation " << v.max_violation);
  CHECK(v.r_check == 9);
  CHECK(v.exact.size() == qs.size());
  CHECK(v.max_violation <= p.epsilon + 1e-6);
  CHECK(v.passed);
  const auto j = to_json(v);
  CHECK(j["passed"] == true);
}

TEST_CASE("generic model honors coupling rows") {
  const auto qs = three_queues();
  // min total abandonment subject to a sojourn cap on the first queue and a rate budget
  const std::vector<MeasureKind> ms{MeasureKind::abandonment(), MeasureKind::sojourn()};
  std::vector<double> cost(qs.size() * 2, 0.0);
  for (std::size_t k = 0; k < qs.size(); ++k) cost[k * 2] = qs[k].lambda();
  std::vector<std::vector<double>> M{std::vector<double>(qs.size() * 2, 0.0)};
  M[0][1] = 1.0;
  SizingProblem p = build_generic_model(qs, ms, cost, M, {1.2}, 1.0, 10.0, 5, 5);
  p.mu_total = 14.0;
  const Solution s = run_algorithm1(p);
  CHECK(s.w[1] <= 1.2 + 1e-9);
  double total = 0.0;
  for (double m : s.mu) total += m;
  CHECK(total <= 14.0 + 1e-9);
  for (std::size_t k = 0; k < qs.size(); ++k)
    for (std::size_t l = 0; l < ms.size(); ++l)
      CHECK(eval_pwl(s.pwl[k][l], s.mu[k]) <= s.w[k * 2 + l] + p.epsilon / 2 + 1e-9);
  const AssembledModel m = assemble(p, s.pwl);
  CHECK(s.objective == Approx(enumerate_segments(p, m)).margin(1e-8));
}

TEST_CASE("knot-restricted mode is flagged") {
  const auto qs = three_queues();
  SizingProblem p = build_equity_model(qs, Template::EquityOST, 100.0, std::nullopt, 0.65, 0.95, 5, 5);
  p.knot_restricted = true;
  const Solution s = run_algorithm1(p);
  CHECK(s.heuristic);
}

TEST_CASE("solution reports") {
  const auto qs = three_queues();
  SizingProblem p = build_equity_model(qs, Template::EquityOST, 100.0, std::nullopt, 0.65, 0.95, 5, 5);
  const Solution s = run_algorithm1(p);
  const auto j = to_json(s, p);
  CHECK(j.contains("measure_link"));
  CHECK(j["queues"].size() == qs.size());
  const auto path = std::filesystem::temp_directory_path() / "qsize_solution.csv";
  write_solution_csv(s, p, path.string());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "queue_id,lambda,mu,mu_over_lambda,measure,w,labels");
  std::filesystem::remove(path);
}

TEST_CASE("template names round trip") {
  for (Template t : {Template::Generic, Template::EquityOST, Template::EquityAb})
    CHECK(template_from_string(to_string(t)) == t);
}
