#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qsize/studies.hpp"

using namespace qsize;
using Catch::Approx;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("generator respects its ranges and is deterministic") {
  GeneratorSpec g;
  g.count = 30;
  g.seed = 8;
  const auto a = generate_queues(g), b = generate_queues(g);
  REQUIRE(a.size() == 30);
  std::set<std::string> ids;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(to_json(a[k]) == to_json(b[k]));
    ids.insert(a[k].id);
    CHECK(a[k].lambda() >= 5.0 - 1e-9);
    CHECK(a[k].lambda() <= 50.0 + 1e-9);
    const double m = a[k].arrival.mean();
    const double scv = (a[k].arrival.second_moment() - m * m) / (m * m);
    CHECK(scv >= 1.2 - 1e-9);
    CHECK(scv <= 3.0 + 1e-9);
    CHECK(a[k].patience.mean() >= 0.4 - 1e-6);
    CHECK(a[k].patience.mean() <= 1.2 + 1e-6);
    CHECK(a[k].y_bar() == 25.0);
  }
  CHECK(ids.size() == 30);
  g.seed = 9;
  CHECK(to_json(generate_queues(g)[0]) != to_json(a[0]));
}

TEST_CASE("patience with a target mean") {
  const PatienceDist p = patience_with_mean({0.5, 0.3, 0.2}, {0.3, 1.0, 2.0}, 0.7, 25.0);
  CHECK(p.mean() == Approx(0.7).epsilon(1e-9));
  CHECK(p.bound() == 25.0);
}

TEST_CASE("seed derivation separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(1, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(3, 4) == derive_seed(3, 4));
}

TEST_CASE("error bands") {
  CHECK(error_band(0.0) == 0);
  CHECK(error_band(0.0099) == 0);
  CHECK(error_band(0.01) == 1);
  CHECK(error_band(0.049) == 1);
  CHECK(error_band(0.07) == 2);
  CHECK(error_band(0.2) == 3);
  CHECK(error_band(0.25) == 3);
  CHECK(error_band(0.26) == 4);
}

TEST_CASE("zero queues give an empty table") {
  EvalErrorSpec spec;
  spec.gen.count = 0;
  const EvalErrorResult r = run_eval_error_study(spec);
  CHECK(r.rows.empty());
  CHECK(r.queues.empty());
  for (const BandCount& b : band_table(r)) CHECK(b.total == 0);
}

TEST_CASE("eval study rows and rerun stability") {
  EvalErrorSpec spec;
  spec.gen.count = 2;
  spec.gen.seed = 5;
  spec.r = 7;
  spec.sim_samples = 20000;
  spec.burn_in = 1000;
  const EvalErrorResult a = run_eval_error_study(spec);
  REQUIRE(a.rows.size() == 2 * 2 * 4);
  for (const EvalRow& row : a.rows) {
    if (row.method == "diffusion") CHECK_FALSE(row.value.has_value());
    if (row.method == "sim") CHECK(row.std_error.has_value());
    if (row.method == "finite" || row.method == "fluid") REQUIRE(row.rel_error.has_value());
  }
  // relative error definition
  for (std::size_t i = 0; i + 3 < a.rows.size(); i += 4) {
    const double sim = *a.rows[i].value;
    const double fin = *a.rows[i + 1].value;
    CHECK(*a.rows[i + 1].rel_error == Approx(std::abs(fin - sim) / std::abs(sim)).epsilon(1e-12));
  }
  const EvalErrorResult b = run_eval_error_study(spec);
  write_eval_csv(a.rows, temp("qs_a.csv").string());
  write_eval_csv(b.rows, temp("qs_b.csv").string());
  CHECK(slurp(temp("qs_a.csv")) == slurp(temp("qs_b.csv")));
  CHECK(slurp(temp("qs_a.csv")).rfind("queue_id,measure,method,value,stderr,rel_error", 0) == 0);
}

TEST_CASE("tertile labels cut at the 33 and 67 percent quantiles") {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(i);
  const auto l = tertile_labels(v, {"a", "b", "c"});
  CHECK(l[33] == "a");
  CHECK(l[34] == "b");
  CHECK(l[67] == "b");
  CHECK(l[68] == "c");
}

TEST_CASE("markovian study properties") {
  MarkovianSpec spec;
  spec.r = 8;
  const auto rows = run_markovian_simplification_study(spec);
  REQUIRE(rows.size() == 5);
  for (const MarkovianRow& r : rows) {
    CHECK((r.wait_gap > 0.0 || r.abandon_gap > 0.0));
    CHECK(r.lambda == Approx(1.0 / (r.p / 10.0 + (1 - r.p) / 40.0)).epsilon(1e-12));
  }
  const auto again = run_markovian_simplification_study(spec);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].wait_gap == again[i].wait_gap);

  // degenerate arrival mixture with exponential patience leaves nothing to simplify
  MarkovianSpec degenerate;
  degenerate.r = 8;
  degenerate.p_weights = {1.0};
  degenerate.patience = PatienceDist(TruncatedMixtureExponential{{1.0}, {1.0 / 0.7}, 25.0});
  const auto d = run_markovian_simplification_study(degenerate);
  CHECK(d[0].wait_gap == Approx(0.0).margin(1e-6));
  CHECK(d[0].abandon_gap == Approx(0.0).margin(1e-6));

  // with the default patience only the patience simplification remains
  degenerate.patience.reset();
  const auto e = run_markovian_simplification_study(degenerate);
  CHECK(e[0].wait_gap > 0.0);
}

TEST_CASE("equity frontier on identical and mixed instances") {
  const QueueSpec q = qtest::small_queue(4.0, 2.0, 1);
  FrontierSpec spec;
  spec.r = 5;
  spec.knots = 5;
  spec.fractions = {0.2, 0.6, 1.0};
  const FrontierResult same = run_equity_frontier({QueueSpec{"a", q.arrival, q.patience, {}},
                                                   QueueSpec{"b", q.arrival, q.patience, {}},
                                                   QueueSpec{"c", q.arrival, q.patience, {}}},
                                                  spec);
  for (const FrontierPoint& p : same.points) {
    if (!p.feasible) continue;
    CHECK(p.Z == Approx(0.0).margin(1e-9));
    CHECK(p.w[0] == Approx(p.w[1]).margin(1e-9));
    CHECK(p.w[1] == Approx(p.w[2]).margin(1e-9));
  }

  const std::vector<QueueSpec> mixed{qtest::small_queue(3.0, 2.0, 2), qtest::small_queue(6.0, 2.0, 3),
                                     qtest::small_queue(9.0, 2.0, 4), qtest::small_queue(4.0, 2.0, 5)};
  const FrontierResult f = run_equity_frontier(mixed, spec);
  double prev = kInf, prev_s = -kInf;
  for (const FrontierPoint& p : f.points) {
    CHECK(p.varsigma > prev_s);
    prev_s = p.varsigma;
    if (!p.feasible) continue;
    CHECK(p.Z <= prev + 1e-8);
    prev = p.Z;
  }
  CHECK(f.size_cluster.size() == mixed.size());
  write_frontier_csv(f, temp("qs_frontier.csv").string());
  write_allocation_csv(f, temp("qs_alloc.csv").string());
  write_cluster_csv(f, temp("qs_cluster.csv").string());
  CHECK(slurp(temp("qs_frontier.csv")).rfind("varsigma,status,Z,w_bar", 0) == 0);
}
