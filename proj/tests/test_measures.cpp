#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qsize/errors.hpp"
#include "qsize/measures.hpp"

using namespace qsize;
using Catch::Approx;

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

// int_0^inf mu e^{-mu s} f(min(xi + s, ybar)) ds, split at the bound.
template <class F>
double service_average(double xi, double mu, double y_bar, F f) {
  const double span = y_bar - xi;
  double v = std::exp(-mu * span) * f(y_bar);
  if (span > 0) v += GK::integrate([&](double s) { return mu * std::exp(-mu * s) * f(xi + s); }, 0.0, span, 20, 1e-14);
  return v;
}

std::vector<QueueSpec> queues() {
  return {qtest::small_queue(3.0, 2.0, 1),
          qtest::make_queue(ArrivalDist(Exponential{2.0}), PatienceDist(UniformPatience{1.5})),
          qtest::make_queue(ArrivalDist(Exponential{2.0}), PatienceDist(PointMass{1.0}))};
}

}  // namespace

TEST_CASE("measure examples") {
  const QueueSpec pm = qtest::exp_point_mass(1.0, 1.0);
  CHECK(g_eval(MeasureKind::abandonment(), pm, 0.0, 1.0) == Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(g_eval(MeasureKind::tail_wait(0.4), pm, 0.4, 3.0) == 1.0);
  const QueueSpec q = qtest::exp_point_mass(3.0, 2.0);
  CHECK(g_eval(MeasureKind::queue_length(), q, 2.0, 1.7) == Approx(3.0 * 2.0).epsilon(1e-12));
  CHECK(g_eval(MeasureKind::sojourn(), q, 0.5, 4.0) == Approx(0.75));
}

TEST_CASE("measures agree with quadrature oracles") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const QueueSpec& q : queues()) {
    const double yb = q.y_bar();
    for (int k = 0; k < 25; ++k) {
      const double xi = yb * U(rng), mu = 0.3 + 5.0 * U(rng);
      INFO(q.patience.type_name() << " xi=" << xi << " mu=" << mu);
      const double ab = service_average(xi, mu, yb, [&](double z) { return q.patience.cdf(z); });
      CHECK(g_eval(MeasureKind::abandonment(), q, xi, mu) == Approx(ab).margin(1e-9));

      // E[min(y, z)] = int_0^z (1 - G(v)) dv
      auto emin = [&](double z) {
        return z <= 0 ? 0.0 : GK::integrate([&](double v) { return q.patience.survival(v); }, 0.0, z, 20, 1e-14);
      };
      const double len = q.lambda() * service_average(xi, mu, yb, emin);
      CHECK(g_eval(MeasureKind::queue_length(), q, xi, mu) == Approx(len).margin(1e-8));

      const double th = yb * U(rng);
      CHECK(g_eval(MeasureKind::tail_wait(th), q, xi, mu) == Approx(std::exp(-mu * std::max(th - xi, 0.0))).epsilon(1e-14));

      CustomTable t{{0.0, 0.5 * yb, yb}, {1.0, 3.0, 2.0}, ""};
      const double cu = service_average(xi, mu, yb, [&](double z) { return t.eval(z); });
      CHECK(g_eval(MeasureKind::custom(t), q, xi, mu) == Approx(cu).margin(1e-8));
    }
  }
}

TEST_CASE("measure ranges and monotonicity on a grid") {
  for (const QueueSpec& q : queues()) {
    const double yb = q.y_bar();
    for (double mu : {0.5, 2.0, 8.0}) {
      double pa = -1, pt = -1, ps = -1;
      for (int i = 0; i <= 200; ++i) {
        const double xi = yb * i / 200;
        const double a = g_eval(MeasureKind::abandonment(), q, xi, mu);
        const double t = g_eval(MeasureKind::tail_wait(0.5 * yb), q, xi, mu);
        const double s = g_eval(MeasureKind::sojourn(), q, xi, mu);
        const double l = g_eval(MeasureKind::queue_length(), q, xi, mu);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0 + 1e-12);
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
        CHECK(s >= 1.0 / mu);
        CHECK(l >= 0.0);
        CHECK(a >= pa - 1e-12);
        CHECK(t >= pt);
        CHECK(s >= ps);
        pa = a, pt = t, ps = s;
      }
      CHECK(g_eval(MeasureKind::abandonment(), q, yb, mu) == Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("expected measure examples") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const FiniteChain c = chain_from_matrix(Q, {0.0, 1.0}, 2.0);
  StationaryVector v;
  v.v = Eigen::Vector2d(0.5, 0.5);
  const QueueSpec q = qtest::exp_point_mass(1.0, 1.0);
  CHECK(expected_measure(MeasureKind::sojourn(), q, c, v) == Approx(1.0));
  const MeasureKind one = MeasureKind::custom(CustomTable{{0.0, 1.0}, {1.0, 1.0}, ""});
  v.v = Eigen::Vector2d(0.2, 0.8);
  CHECK(expected_measure(one, q, c, v) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("variation and Lipschitz estimates") {
  const QueueSpec q = qtest::small_queue(2.0, 3.0, 7);
  CHECK(validate_assumption23(MeasureKind::sojourn(), q, 1.0, 2.0).tv == Approx(3.0).epsilon(1e-9));
  const double mu = 1.7, th = 1.2;
  CHECK(validate_assumption23(MeasureKind::tail_wait(th), q, mu, mu).tv == Approx(1 - std::exp(-mu * th)).epsilon(1e-6));
  const MeasureKind flat = MeasureKind::custom(CustomTable{{0.0, 3.0}, {2.0, 2.0}, ""});
  CHECK(validate_assumption23(flat, q, 1.0, 2.0).tv == 0.0);
  const auto r = validate_assumption23(MeasureKind::abandonment(), q, 1.0, 2.0);
  CHECK(std::isfinite(r.lipschitz_mu));
  CHECK(r.tv <= 1.0 + 1e-9);

  const MeasureKind bad = MeasureKind::custom(CustomTable{{0.0, 3.0}, {1.0, INFINITY}, ""});
  try {
    validate_assumption23(bad, q, 1.0, 2.0);
    FAIL("non-finite table accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "UnboundedVariation");
  }
}

TEST_CASE("measure json round trip") {
  for (const MeasureKind& m : {MeasureKind::sojourn(), MeasureKind::abandonment(), MeasureKind::tail_wait(0.3),
                               MeasureKind::queue_length(),
                               MeasureKind::custom(CustomTable{{0.0, 1.0}, {0.0, 2.0}, ""})})
    CHECK(to_json(measure_from_json(to_json(m))) == to_json(m));
}
