#include <algorithm>
#include <cmath>
#include <random>

#include <catch_amalgamated.hpp>

#include "qsize/distributions.hpp"
#include "qsize/errors.hpp"

using namespace qsize;
using Catch::Approx;

namespace {

double mixture_mean(const ArrivalDist& a) {
  const auto& m = std::get<MixtureExponential>(a.variant());
  double s = 0.0;
  for (std::size_t i = 0; i < m.weights.size(); ++i) s += m.weights[i] / m.rates[i];
  return s;
}

double mixture_second(const ArrivalDist& a) {
  const auto& m = std::get<MixtureExponential>(a.variant());
  double s = 0.0;
  for (std::size_t i = 0; i < m.weights.size(); ++i) s += 2.0 * m.weights[i] / (m.rates[i] * m.rates[i]);
  return s;
}

std::vector<ArrivalDist> continuous_arrivals() {
  return {ArrivalDist(Exponential{2.0}), ArrivalDist(MixtureExponential{{0.3, 0.7}, {1.0, 5.0}}),
          ArrivalDist(GammaArrival{2.5, 0.4}), ArrivalDist(UniformArrival{0.5, 2.0}), ArrivalDist(Erlang{3, 4.0})};
}

std::vector<PatienceDist> patiences() {
  return {PatienceDist(TruncatedMixtureExponential{{0.5, 0.5}, {1.0, 0.2}, 3.0}), PatienceDist(UniformPatience{2.0}),
          PatienceDist(PointMass{1.5})};
}

}  // namespace

TEST_CASE("cdf examples") {
  CHECK(ArrivalDist(Exponential{1.0}).cdf(0.0) == 0.0);
  CHECK(PatienceDist(PointMass{1.0}).cdf(1.0) == 1.0);
  const double expect = 0.5 * (1 - std::exp(-1.0)) + 0.5 * (1 - std::exp(-2.0));
  CHECK(ArrivalDist(MixtureExponential{{0.5, 0.5}, {1.0, 2.0}}).cdf(1.0) == Approx(expect).epsilon(1e-14));
}

TEST_CASE("survival_left examples") {
  const ArrivalDist e(Exponential{3.0});
  CHECK(e.survival_left(0.0) == 1.0);
  CHECK(e.survival_left(-2.0) == 1.0);
  CHECK(ArrivalDist(Exponential{1.0}).survival_left(1.0) == Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(ArrivalDist(UniformArrival{0.0, 2.0}).survival_left(1.0) == Approx(0.5));
}

TEST_CASE("cdf grids are monotone and complementary to survival_left") {
  for (const ArrivalDist& a : continuous_arrivals()) {
    double prev = -1.0;
    for (int i = -10; i < 1000; ++i) {
      const double x = i * 0.005;
      const double f = a.cdf(x);
      CHECK(f >= prev);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      CHECK(a.survival_left(x) + f == Approx(1.0).margin(1e-12));
      prev = f;
    }
  }
  for (const PatienceDist& g : patiences()) {
    double prev = -1.0;
    for (int i = -10; i < 1000; ++i) {
      const double x = i * g.bound() / 900.0;
      const double f = g.cdf(x);
      CHECK(f >= prev);
      if (x < 0.0) CHECK(f == 0.0);
      if (x >= g.bound()) CHECK(f == 1.0);
      prev = f;
    }
  }
}

TEST_CASE("truncated patience keeps the hazard and puts an atom at the bound") {
  const PatienceDist g(TruncatedMixtureExponential{{1.0}, {0.5}, 2.0});
  CHECK(g.cdf(1.0) == Approx(1 - std::exp(-0.5)).epsilon(1e-14));
  CHECK(g.cdf(2.0 - 1e-12) == Approx(1 - std::exp(-1.0)).epsilon(1e-9));
  CHECK(g.cdf(2.0) == 1.0);
  CHECK(g.survival(2.0) == 0.0);
}

TEST_CASE("validate_assumption1") {
  const PatienceDist g(PointMass{1.0});
  const auto e = validate_assumption1(ArrivalDist(Exponential{2.0}), g);
  CHECK(e.a_prime == Approx(2.0));
  CHECK(e.a_dprime == Approx(4.0));
  CHECK(e.y_bar == 1.0);

  try {
    validate_assumption1(ArrivalDist(GammaArrival{1.5, 1.0}), g);
    FAIL("gamma shape 1.5 accepted");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Inadmissible);
    CHECK(std::string(err.what()).find("shape") != std::string::npos);
  }
  CHECK_THROWS_AS(validate_assumption1(ArrivalDist(Deterministic{1.0}), g), Error);

  // Grid oracle for the mixture: max |sum w l e^{-l x}| and max |sum w l^2 e^{-l x}|.
  const auto m = validate_assumption1(ArrivalDist(MixtureExponential{{0.5, 0.5}, {1.0, 3.0}}), g);
  double d1 = 0.0, d2 = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = i * 1e-3;
    d1 = std::max(d1, 0.5 * std::exp(-x) + 1.5 * std::exp(-3 * x));
    d2 = std::max(d2, 0.5 * std::exp(-x) + 4.5 * std::exp(-3 * x));
  }
  CHECK(m.a_prime == Approx(d1).epsilon(1e-12));
  CHECK(m.a_dprime == Approx(d2).epsilon(1e-12));
}

TEST_CASE("assumption1 bounds dominate sampled derivatives") {
  const PatienceDist g(PointMass{1.0});
  for (const ArrivalDist& a : continuous_arrivals()) {
    const auto b = validate_assumption1(a, g);
    const auto cuts = a.breakpoints();
    const double h = 1e-5;
    for (int i = 0; i < 10000; ++i) {
      const double x = 1e-4 + i * 1e-3;
      // derivative bounds hold almost everywhere; skip the density jumps
      if (std::any_of(cuts.begin(), cuts.end(), [&](double c) { return std::abs(x - c) < 2 * h; })) continue;
      CHECK(a.pdf(x) <= b.a_prime * (1 + 1e-9));
      const double slope = (a.pdf(x + h) - a.pdf(x - std::min(h, x))) / (h + std::min(h, x));
      CHECK(std::abs(slope) <= b.a_dprime * (1 + 1e-4) + 1e-6);
    }
  }
}

TEST_CASE("sampling") {
  Rng rng(5);
  CHECK(PatienceDist(PointMass{1.0}).sample(rng) == 1.0);

  const ArrivalDist e(Exponential{1.0});
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(e.sample(a) == e.sample(b));

  Rng r(7);
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += e.sample(r);
  CHECK(std::abs(s / n - 1.0) < 0.01);
}

TEST_CASE("moment matching") {
  const ArrivalDist one = moment_match_hyperexp2(1.0, 1.0);
  REQUIRE(std::holds_alternative<Exponential>(one.variant()));
  CHECK(std::get<Exponential>(one.variant()).rate == Approx(1.0));

  const ArrivalDist h = moment_match_hyperexp2(1.0, 2.0);
  const auto& m = std::get<MixtureExponential>(h.variant());
  const double p = 0.5 * (1 + std::sqrt(1.0 / 3.0));
  const double hi_weight = std::max(m.weights[0], m.weights[1]);
  CHECK(hi_weight == Approx(p).epsilon(1e-12));
  const int hi = m.weights[0] > m.weights[1] ? 0 : 1;
  CHECK(m.rates[hi] == Approx(2 * p).epsilon(1e-12));
  CHECK(m.rates[1 - hi] == Approx(2 * (1 - p)).epsilon(1e-12));

  try {
    moment_match_hyperexp2(2.0, 0.5);
    FAIL("scv below one accepted");
  } catch (const Error& err) {
    CHECK(err.code() == "ScvBelowOne");
  }

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(0.01, 5.0), scv(1.01, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double mu = mean(rng), c = scv(rng);
    const ArrivalDist d = moment_match_hyperexp2(mu, c);
    const double m1 = mixture_mean(d), m2 = mixture_second(d);
    CHECK(std::abs(m1 - mu) <= 1e-10 * mu);
    CHECK(std::abs((m2 - m1 * m1) / (m1 * m1) - c) <= 1e-10 * c);
  }
}

TEST_CASE("fitting") {
  Rng rng(3);
  const ArrivalDist truth = moment_match_hyperexp2(0.1, 2.5);
  std::vector<double> xs(200000);
  for (double& x : xs) x = truth.sample(rng);
  const SampleMoments sm = sample_moments(xs);
  CHECK(sm.mean == Approx(0.1).epsilon(0.02));
  CHECK(sm.scv == Approx(2.5).epsilon(0.05));
  CHECK(fit_exponential(xs).mean() == Approx(sm.mean).epsilon(1e-12));
  const ArrivalDist h2 = fit_hyperexp2(xs);
  CHECK(h2.mean() == Approx(sm.mean).epsilon(1e-10));

  std::vector<double> flat{1.0, 1.1, 0.9, 1.05, 0.95};
  CHECK_THROWS_AS(fit_hyperexp2(flat), Error);
}

TEST_CASE("ks statistic") {
  const std::vector<double> one{0.5};
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  CHECK(ks_statistic(one, uniform).d == Approx(0.5));

  CHECK(kolmogorov_survival(1.358) == Approx(0.05).margin(5e-4));

  // D below the 0.999 quantile for samples from the hypothesized law.
  const ArrivalDist e(Exponential{2.0});
  int below = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<double> xs(10000);
    for (double& x : xs) x = e.sample(rng);
    std::sort(xs.begin(), xs.end());
    if (ks_statistic(xs, e).d <= 1.95 / std::sqrt(10000.0)) ++below;
  }
  CHECK(below >= 19);
}

TEST_CASE("json round trip of distributions") {
  for (const ArrivalDist& a : continuous_arrivals()) CHECK(to_json(arrival_from_json(to_json(a))) == to_json(a));
  for (const PatienceDist& g : patiences()) CHECK(to_json(patience_from_json(to_json(g))) == to_json(g));
  CHECK_THROWS_AS(arrival_from_json(nlohmann::json{{"type", "mix_exp"}, {"weights", {0.5, 0.6}}, {"rates", {1, 2}}}),
                  SchemaError);
}
