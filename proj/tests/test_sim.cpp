#include <cmath>

#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qsize/errors.hpp"
#include "qsize/pwl.hpp"
#include "qsize/sim.hpp"

using namespace qsize;
using Catch::Approx;

namespace {

SimConfig small(long n, std::uint64_t seed, Estimator e = Estimator::RaoBlackwell) {
  SimConfig c;
  c.samples = n;
  c.burn_in = 1000;
  c.seed = seed;
  c.estimator = e;
  return c;
}

double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= x.size();
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (x.size() - 1);
}

}  // namespace

TEST_CASE("long deterministic gaps empty the queue") {
  const QueueSpec q = qtest::make_queue(ArrivalDist(Deterministic{3.0}), PatienceDist(UniformPatience{2.0}));
  const auto xs = simulate_chain(q, 1.0, small(5000, 1));
  REQUIRE(xs.size() == 5000);
  for (double x : xs) CHECK(x == 0.0);
}

TEST_CASE("paths are reproducible and bounded") {
  const QueueSpec q = qtest::small_queue(5.0, 2.0, 3);
  const auto a = simulate_chain(q, 4.0, small(20000, 9));
  const auto b = simulate_chain(q, 4.0, small(20000, 9));
  const auto c = simulate_chain(q, 4.0, small(20000, 10));
  CHECK(a == b);
  CHECK(a != c);
  for (double x : a) {
    CHECK(x >= 0.0);
    CHECK(x <= q.y_bar());
  }
}

TEST_CASE("constant measure is estimated exactly") {
  const QueueSpec q = qtest::small_queue(5.0, 2.0, 4);
  const MeasureKind flat = MeasureKind::custom(CustomTable{{0.0, 2.0}, {0.25, 0.25}, ""});
  for (Estimator e : {Estimator::RaoBlackwell, Estimator::DirectEvent}) {
    const auto est = simulate_measures(q, 4.0, {flat}, small(10000, 2, e));
    CHECK(est[0].estimate == Approx(0.25).epsilon(1e-14));
    CHECK(est[0].std_error == Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("too few samples are rejected") {
  const QueueSpec q = qtest::small_queue(5.0, 2.0, 4);
  CHECK_THROWS_AS(simulate_measures(q, 4.0, {MeasureKind::sojourn()}, small(999, 1)), Error);
}

TEST_CASE("batch means layout") {
  std::vector<double> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 7);
  const SimEstimate e = batch_means(v, "x");
  CHECK(e.batches == 100);
  CHECK(e.samples == 10000);
  double m = 0.0;
  for (double x : v) m += x;
  CHECK(e.estimate == Approx(m / v.size()).epsilon(1e-14));
  CHECK(e.ci95_lo <= e.estimate);
  CHECK(e.ci95_hi >= e.estimate);
  CHECK(e.ci99_hi - e.ci99_lo >= e.ci95_hi - e.ci95_lo);
}

TEST_CASE("streaming and stored estimates agree") {
  const QueueSpec q = qtest::small_queue(5.0, 2.0, 5);
  const MeasureKind ab = MeasureKind::abandonment();
  const SimConfig cfg = small(30000, 3);
  std::vector<double> values;
  simulate_chain(q, 4.0, cfg, [&](const SimStep& s) {
    values.push_back(sample_value(ab, q, 4.0, Estimator::RaoBlackwell, s));
  });
  const SimEstimate stored = batch_means(values, ab.name());
  const SimEstimate streamed = simulate_measures(q, 4.0, {ab}, cfg)[0];
  CHECK(streamed.estimate == Approx(stored.estimate).epsilon(1e-12));
  CHECK(streamed.std_error == Approx(stored.std_error).epsilon(1e-9));
}

TEST_CASE("estimators agree within joint 4 sigma") {
  const QueueSpec q = qtest::small_queue(6.0, 2.0, 6);
  const MeasureKind ab = MeasureKind::abandonment();
  const auto rb = simulate_measures(q, 5.0, {ab}, small(1000000, 11, Estimator::RaoBlackwell))[0];
  const auto de = simulate_measures(q, 5.0, {ab}, small(1000000, 12, Estimator::DirectEvent))[0];
  CHECK(std::abs(rb.estimate - de.estimate) <= 4 * std::hypot(rb.std_error, de.std_error));
}

TEST_CASE("Rao-Blackwell has smaller per-sample variance on identical paths") {
  const QueueSpec q = qtest::small_queue(6.0, 2.0, 7);
  const MeasureKind ab = MeasureKind::abandonment();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<double> rb, de;
    simulate_chain(q, 5.0, small(50000, seed), [&](const SimStep& s) {
      rb.push_back(sample_value(ab, q, 5.0, Estimator::RaoBlackwell, s));
      de.push_back(sample_value(ab, q, 5.0, Estimator::DirectEvent, s));
    });
    CHECK(variance(rb) <= variance(de));
  }
}

TEST_CASE("direct-event outcomes follow their definitions") {
  const QueueSpec q = qtest::small_queue(6.0, 2.0, 8);
  const SimStep s{0.4, 0.3, 0.5};
  CHECK(sample_value(MeasureKind::sojourn(), q, 5.0, Estimator::DirectEvent, s) == Approx(0.7));
  CHECK(sample_value(MeasureKind::abandonment(), q, 5.0, Estimator::DirectEvent, s) == 1.0);
  CHECK(sample_value(MeasureKind::tail_wait(0.8), q, 5.0, Estimator::DirectEvent, s) == 0.0);
  CHECK(sample_value(MeasureKind::queue_length(), q, 5.0, Estimator::DirectEvent, s) ==
        Approx(q.lambda() * 0.5));
}

TEST_CASE("estimator names round trip") {
  for (Estimator e : {Estimator::RaoBlackwell, Estimator::DirectEvent})
    CHECK(estimator_from_string(to_string(e)) == e);
  CHECK_THROWS(estimator_from_string("bogus"));
}

namespace {

struct LightCase {
  QueueSpec queue;
  double mu;
  SimEstimate sim;
};

// Generator patience with intensity 1 so that the grid step is small against the mean gap.
const LightCase& light_case() {
  static const LightCase c = [] {
    const QueueSpec q = qtest::synthetic(1, 4).front();
    QueueSpec light{"light", moment_match_hyperexp2(1.0, 2.0), q.patience, {}};
    const double mu = 0.879 * light.lambda();
    SimConfig cfg;
    cfg.seed = 5;
    SimEstimate sim = simulate_measures(light, mu, {MeasureKind::abandonment()}, cfg)[0];
    return LightCase{light, mu, sim};
  }();
  return c;
}

}  // namespace

TEST_CASE("order-12 value lies inside the simulation CI99", "[order12]") {
  const LightCase& c = light_case();
  const double fin = finite_measures(c.queue, {MeasureKind::abandonment()}, c.mu, 12)[0];
  INFO("finite " << fin << " sim " << c.sim.estimate << " +- " << c.sim.std_error);
  CHECK(fin >= c.sim.ci99_lo);
  CHECK(fin <= c.sim.ci99_hi);
}

TEST_CASE("first-order extrapolation of orders 11 and 12 lies inside the simulation CI99") {
  const LightCase& c = light_case();
  const double e11 = finite_measures(c.queue, {MeasureKind::abandonment()}, c.mu, 11)[0];
  const double e12 = finite_measures(c.queue, {MeasureKind::abandonment()}, c.mu, 12)[0];
  const double limit = 2.0 * e12 - e11;
  INFO("E11 " << e11 << " E12 " << e12 << " extrapolated " << limit << " sim " << c.sim.estimate);
  CHECK(e11 > e12);
  CHECK(limit >= c.sim.ci99_lo);
  CHECK(limit <= c.sim.ci99_hi);
}
