#include "qsize/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <boost/math/special_functions/gamma.hpp>

#include "qsize/errors.hpp"

namespace qsize {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_mixture(const std::vector<double>& w, const std::vector<double>& rates,
                   const std::string& where) {
  if (w.empty() || w.size() != rates.size())
    throw SchemaError(0, "weights", where + ": weights and rates must be non-empty and equal length");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw SchemaError(0, "weights", where + ": weights must be >= 0");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw SchemaError(0, "weights", where + ": weights must sum to 1 (got " + std::to_string(sum) + ")");
  for (double r : rates)
    if (!(r > 0.0) || !std::isfinite(r)) throw SchemaError(0, "rates", where + ": rates must be > 0");
}

void check_positive(double v, const char* field, const std::string& where) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw SchemaError(0, field, where + ": " + field + " must be finite and > 0");
}

double gamma_pdf(double x, double k, double theta) {
  if (x < 0.0) return 0.0;
  if (x == 0.0) {
    if (k == 1.0) return 1.0 / theta;
    return k > 1.0 ? 0.0 : INFINITY;
  }
  return std::exp((k - 1.0) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta));
}

// Derivative of the gamma density, shape >= 2.
double gamma_pdf_derivative(double x, double k, double theta) {
  if (x <= 0.0) return k == 2.0 ? 1.0 / (theta * theta) : 0.0;
  return gamma_pdf(x, k, theta) * ((k - 1.0) / x - 1.0 / theta);
}

Assumption1Bounds gamma_bounds(double k, double theta, double y_bar) {
  const double mode = (k - 1.0) * theta;
  const double a1 = gamma_pdf(mode, k, theta);
  const double r = std::sqrt(k - 1.0);
  double a2 = std::abs(gamma_pdf_derivative(0.0, k, theta));
  for (double x : {theta * (k - 1.0 - r), theta * (k - 1.0 + r)})
    if (x >= 0.0) a2 = std::max(a2, std::abs(gamma_pdf_derivative(x, k, theta)));
  return {a1, a2, y_bar};
}

double sample_mixture(const std::vector<double>& w, const std::vector<double>& rates, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::size_t i = 0;
  double acc = w[0];
  while (u >= acc && i + 1 < w.size()) acc += w[++i];
  return std::exponential_distribution<double>(rates[i])(rng);
}

}  // namespace

// ---------------------------------------------------------------- arrivals

ArrivalDist::ArrivalDist(Variant v) : v_(std::move(v)) {
  const std::string where = "arrival " + type_name();
  std::visit(overloaded{
                 [&](const Exponential& d) { check_positive(d.rate, "rate", where); },
                 [&](const MixtureExponential& d) { check_mixture(d.weights, d.rates, where); },
                 [&](const GammaArrival& d) {
                   check_positive(d.shape, "shape", where);
                   check_positive(d.scale, "scale", where);
                 },
                 [&](const UniformArrival& d) {
                   if (!(d.lo >= 0.0) || !(d.hi > d.lo) || !std::isfinite(d.hi))
                     throw SchemaError(0, "hi", where + ": need 0 <= lo < hi");
                 },
                 [&](const Erlang& d) {
                   if (d.stages < 1) throw SchemaError(0, "stages", where + ": stages must be >= 1");
                   check_positive(d.rate, "rate", where);
                 },
                 [&](const Deterministic& d) { check_positive(d.value, "value", where); },
             },
             v_);
}

std::string ArrivalDist::type_name() const {
  return std::visit(overloaded{
                        [](const Exponential&) { return std::string("exp"); },
                        [](const MixtureExponential&) { return std::string("mix_exp"); },
                        [](const GammaArrival&) { return std::string("gamma"); },
                        [](const UniformArrival&) { return std::string("uniform"); },
                        [](const Erlang&) { return std::string("erlang"); },
                        [](const Deterministic&) { return std::string("deterministic"); },
                    },
                    v_);
}

double ArrivalDist::cdf(double x) const {
  if (x < 0.0) return 0.0;
  return std::visit(overloaded{
                        [&](const Exponential& d) { return -std::expm1(-d.rate * x); },
                        [&](const MixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += d.weights[i] * -std::expm1(-d.rates[i] * x);
                          return s;
                        },
                        [&](const GammaArrival& d) { return boost::math::gamma_p(d.shape, x / d.scale); },
                        [&](const UniformArrival& d) {
                          return std::clamp((x - d.lo) / (d.hi - d.lo), 0.0, 1.0);
                        },
                        [&](const Erlang& d) {
                          return boost::math::gamma_p(static_cast<double>(d.stages), x * d.rate);
                        },
                        [&](const Deterministic& d) { return x >= d.value ? 1.0 : 0.0; },
                    },
                    v_);
}

double ArrivalDist::survival_left(double x) const {
  if (x <= 0.0) {
    if (const auto* d = std::get_if<Deterministic>(&v_)) return x <= d->value ? 1.0 : 0.0;
    return 1.0;
  }
  return std::visit(overloaded{
                        [&](const Exponential& d) { return std::exp(-d.rate * x); },
                        [&](const MixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += d.weights[i] * std::exp(-d.rates[i] * x);
                          return s;
                        },
                        [&](const GammaArrival& d) { return boost::math::gamma_q(d.shape, x / d.scale); },
                        [&](const UniformArrival& d) {
                          return std::clamp((d.hi - x) / (d.hi - d.lo), 0.0, 1.0);
                        },
                        [&](const Erlang& d) {
                          return boost::math::gamma_q(static_cast<double>(d.stages), x * d.rate);
                        },
                        [&](const Deterministic& d) { return x <= d.value ? 1.0 : 0.0; },
                    },
                    v_);
}

double ArrivalDist::pdf(double x) const {
  if (x < 0.0) return 0.0;
  return std::visit(overloaded{
                        [&](const Exponential& d) { return d.rate * std::exp(-d.rate * x); },
                        [&](const MixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += d.weights[i] * d.rates[i] * std::exp(-d.rates[i] * x);
                          return s;
                        },
                        [&](const GammaArrival& d) { return gamma_pdf(x, d.shape, d.scale); },
                        [&](const UniformArrival& d) {
                          return (x >= d.lo && x <= d.hi) ? 1.0 / (d.hi - d.lo) : 0.0;
                        },
                        [&](const Erlang& d) {
                          return gamma_pdf(x, static_cast<double>(d.stages), 1.0 / d.rate);
                        },
                        [&](const Deterministic&) { return 0.0; },
                    },
                    v_);
}

double ArrivalDist::mean() const {
  return std::visit(overloaded{
                        [](const Exponential& d) { return 1.0 / d.rate; },
                        [](const MixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i) s += d.weights[i] / d.rates[i];
                          return s;
                        },
                        [](const GammaArrival& d) { return d.shape * d.scale; },
                        [](const UniformArrival& d) { return 0.5 * (d.lo + d.hi); },
                        [](const Erlang& d) { return d.stages / d.rate; },
                        [](const Deterministic& d) { return d.value; },
                    },
                    v_);
}

double ArrivalDist::second_moment() const {
  return std::visit(overloaded{
                        [](const Exponential& d) { return 2.0 / (d.rate * d.rate); },
                        [](const MixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += 2.0 * d.weights[i] / (d.rates[i] * d.rates[i]);
                          return s;
                        },
                        [](const GammaArrival& d) { return d.shape * (d.shape + 1.0) * d.scale * d.scale; },
                        [](const UniformArrival& d) {
                          return (d.hi * d.hi + d.hi * d.lo + d.lo * d.lo) / 3.0;
                        },
                        [](const Erlang& d) { return d.stages * (d.stages + 1.0) / (d.rate * d.rate); },
                        [](const Deterministic& d) { return d.value * d.value; },
                    },
                    v_);
}

double ArrivalDist::sample(Rng& rng) const {
  return std::visit(overloaded{
                        [&](const Exponential& d) { return std::exponential_distribution<double>(d.rate)(rng); },
                        [&](const MixtureExponential& d) { return sample_mixture(d.weights, d.rates, rng); },
                        [&](const GammaArrival& d) {
                          return std::gamma_distribution<double>(d.shape, d.scale)(rng);
                        },
                        [&](const UniformArrival& d) {
                          return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
                        },
                        [&](const Erlang& d) {
                          return std::gamma_distribution<double>(d.stages, 1.0 / d.rate)(rng);
                        },
                        [&](const Deterministic& d) { return d.value; },
                    },
                    v_);
}

std::vector<ExpTerm> ArrivalDist::exp_terms() const {
  if (const auto* d = std::get_if<Exponential>(&v_)) return {{1.0, d->rate}};
  if (const auto* d = std::get_if<MixtureExponential>(&v_)) {
    std::vector<ExpTerm> out;
    for (std::size_t i = 0; i < d->weights.size(); ++i)
      if (d->weights[i] > 0.0) out.push_back({d->weights[i], d->rates[i]});
    return out;
  }
  if (const auto* d = std::get_if<GammaArrival>(&v_); d && d->shape == 1.0) return {{1.0, 1.0 / d->scale}};
  if (const auto* d = std::get_if<Erlang>(&v_); d && d->stages == 1) return {{1.0, d->rate}};
  return {};
}

std::vector<ErlangTerm> ArrivalDist::erlang_terms() const {
  std::vector<ErlangTerm> out;
  for (const ExpTerm& t : exp_terms()) out.push_back({t.weight, t.rate, 1});
  if (!out.empty()) return out;
  if (const auto* d = std::get_if<Erlang>(&v_)) return {{1.0, d->rate, d->stages}};
  if (const auto* d = std::get_if<GammaArrival>(&v_); d && d->shape == std::floor(d->shape) && d->shape <= 64.0)
    return {{1.0, 1.0 / d->scale, static_cast<int>(d->shape)}};
  return {};
}

std::vector<double> ArrivalDist::breakpoints() const {
  if (const auto* d = std::get_if<UniformArrival>(&v_)) return {d->lo, d->hi};
  if (const auto* d = std::get_if<Deterministic>(&v_)) return {d->value};
  return {};
}

bool ArrivalDist::has_density() const { return !std::holds_alternative<Deterministic>(v_); }

// ---------------------------------------------------------------- patience

PatienceDist::PatienceDist(Variant v) : v_(std::move(v)) {
  const std::string where = "patience " + type_name();
  std::visit(overloaded{
                 [&](const TruncatedMixtureExponential& d) {
                   check_mixture(d.weights, d.rates, where);
                   check_positive(d.bound, "bound", where);
                 },
                 [&](const UniformPatience& d) { check_positive(d.bound, "bound", where); },
                 [&](const PointMass& d) { check_positive(d.bound, "bound", where); },
             },
             v_);
}

std::string PatienceDist::type_name() const {
  return std::visit(overloaded{
                        [](const TruncatedMixtureExponential&) { return std::string("trunc_mix_exp"); },
                        [](const UniformPatience&) { return std::string("uniform"); },
                        [](const PointMass&) { return std::string("point_mass"); },
                    },
                    v_);
}

double PatienceDist::bound() const {
  return std::visit([](const auto& d) { return d.bound; }, v_);
}

double PatienceDist::cdf(double x) const {
  if (x < 0.0) return 0.0;
  if (x >= bound()) return 1.0;
  return 1.0 - survival(x);
}

double PatienceDist::survival(double x) const {
  if (x < 0.0) return 1.0;
  if (x >= bound()) return 0.0;
  return std::visit(overloaded{
                        [&](const TruncatedMixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += d.weights[i] * std::exp(-d.rates[i] * x);
                          return s;
                        },
                        [&](const UniformPatience& d) { return 1.0 - x / d.bound; },
                        [&](const PointMass&) { return 1.0; },
                    },
                    v_);
}

double PatienceDist::mean() const {
  return std::visit(overloaded{
                        [](const TruncatedMixtureExponential& d) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < d.weights.size(); ++i)
                            s += d.weights[i] * -std::expm1(-d.rates[i] * d.bound) / d.rates[i];
                          return s;
                        },
                        [](const UniformPatience& d) { return 0.5 * d.bound; },
                        [](const PointMass& d) { return d.bound; },
                    },
                    v_);
}

double PatienceDist::sample(Rng& rng) const {
  return std::visit(overloaded{
                        [&](const TruncatedMixtureExponential& d) {
                          return std::min(sample_mixture(d.weights, d.rates, rng), d.bound);
                        },
                        [&](const UniformPatience& d) {
                          return std::uniform_real_distribution<double>(0.0, d.bound)(rng);
                        },
                        [&](const PointMass& d) { return d.bound; },
                    },
                    v_);
}

std::vector<ExpTerm> PatienceDist::survival_terms() const {
  if (const auto* d = std::get_if<TruncatedMixtureExponential>(&v_)) {
    std::vector<ExpTerm> out;
    for (std::size_t i = 0; i < d->weights.size(); ++i)
      if (d->weights[i] > 0.0) out.push_back({d->weights[i], d->rates[i]});
    return out;
  }
  if (std::holds_alternative<PointMass>(v_)) return {{1.0, 0.0}};
  return {};
}

double ServiceDist::cdf(double x) const { return x <= 0.0 ? 0.0 : -std::expm1(-mu * x); }

double ServiceDist::sample(Rng& rng) const { return std::exponential_distribution<double>(mu)(rng); }

// ---------------------------------------------------------------- admissibility

Assumption1Bounds validate_assumption1(const ArrivalDist& a, const PatienceDist& g) {
  const double y_bar = g.bound();
  return std::visit(
      overloaded{
          [&](const Exponential& d) { return Assumption1Bounds{d.rate, d.rate * d.rate, y_bar}; },
          [&](const MixtureExponential& d) {
            double a1 = 0.0, a2 = 0.0;
            for (std::size_t i = 0; i < d.weights.size(); ++i) {
              a1 += d.weights[i] * d.rates[i];
              a2 += d.weights[i] * d.rates[i] * d.rates[i];
            }
            return Assumption1Bounds{a1, a2, y_bar};
          },
          [&](const GammaArrival& d) {
            if (d.shape == 1.0) return Assumption1Bounds{1.0 / d.scale, 1.0 / (d.scale * d.scale), y_bar};
            if (d.shape < 2.0)
              throw inadmissible("inter-arrival gamma shape " + std::to_string(d.shape) +
                                 " is not admissible: the shape must equal 1 or be at least 2 "
                                 "so that the density and its derivative stay bounded");
            return gamma_bounds(d.shape, d.scale, y_bar);
          },
          [&](const UniformArrival& d) { return Assumption1Bounds{1.0 / (d.hi - d.lo), 0.0, y_bar}; },
          [&](const Erlang& d) {
            if (d.stages == 1) return Assumption1Bounds{d.rate, d.rate * d.rate, y_bar};
            return gamma_bounds(d.stages, 1.0 / d.rate, y_bar);
          },
          [&](const Deterministic&) -> Assumption1Bounds {
            throw inadmissible("deterministic inter-arrival times have no density; "
                               "they are accepted by the simulator only");
          },
      },
      a.variant());
}

// ---------------------------------------------------------------- calibration

ArrivalDist moment_match_hyperexp2(double mean, double scv) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw domain_error("OutOfDomain", "mean must be > 0");
  if (std::abs(scv - 1.0) <= 1e-9) return ArrivalDist(Exponential{1.0 / mean});
  if (!(scv > 1.0))
    throw domain_error("ScvBelowOne", "a two-phase hyperexponential cannot match scv " +
                                          std::to_string(scv) + " < 1");
  const double p = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
  return ArrivalDist(MixtureExponential{{p, 1.0 - p}, {2.0 * p / mean, 2.0 * (1.0 - p) / mean}});
}

SampleMoments sample_moments(const std::vector<double>& samples) {
  if (samples.size() < 2) throw domain_error("OutOfDomain", "need at least two samples");
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  for (double x : samples) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw domain_error("OutOfDomain", "samples must be finite and >= 0");
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  const double var = m2 / (n - 1);
  return {mean, var / (mean * mean)};
}

ArrivalDist fit_exponential(const std::vector<double>& samples) {
  return ArrivalDist(Exponential{1.0 / sample_moments(samples).mean});
}

ArrivalDist fit_hyperexp2(const std::vector<double>& samples) {
  const SampleMoments m = sample_moments(samples);
  return moment_match_hyperexp2(m.mean, m.scv);
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.0) {
    // P[K <= x] = sqrt(2 pi)/x * sum exp(-(2k-1)^2 pi^2 / (8 x^2))
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = (2.0 * k - 1.0) * std::numbers::pi / x;
      const double term = std::exp(-t * t / 8.0);
      s += term;
      if (term < 1e-300) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_statistic(const std::vector<double>& sorted_samples,
                      const std::function<double(double)>& cdf) {
  const std::size_t n = sorted_samples.size();
  if (n == 0) throw domain_error("OutOfDomain", "ks_statistic needs at least one sample");
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted_samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_survival(std::sqrt(static_cast<double>(n)) * d)};
}

KsResult ks_statistic(const std::vector<double>& sorted_samples, const ArrivalDist& dist) {
  return ks_statistic(sorted_samples, [&](double x) { return dist.cdf(x); });
}

// ---------------------------------------------------------------- json

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(0, "type", "distribution must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw SchemaError(0, it.key(), "unknown key");
}

double number(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(0, key, "missing required field");
  if (!j.at(key).is_number()) throw SchemaError(0, key, "expected a number");
  return j.at(key).get<double>();
}

std::vector<double> numbers(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(0, key, "missing required field");
  const json& a = j.at(key);
  if (!a.is_array()) throw SchemaError(0, key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : a) {
    if (!x.is_number()) throw SchemaError(0, key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string type_of(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw SchemaError(0, "type", "distribution needs a string 'type'");
  return j.at("type").get<std::string>();
}

}  // namespace

nlohmann::json to_json(const ArrivalDist& d) {
  return std::visit(overloaded{
                        [](const Exponential& v) { return json{{"type", "exp"}, {"rate", v.rate}}; },
                        [](const MixtureExponential& v) {
                          return json{{"type", "mix_exp"}, {"weights", v.weights}, {"rates", v.rates}};
                        },
                        [](const GammaArrival& v) {
                          return json{{"type", "gamma"}, {"shape", v.shape}, {"scale", v.scale}};
                        },
                        [](const UniformArrival& v) { return json{{"type", "uniform"}, {"lo", v.lo}, {"hi", v.hi}}; },
                        [](const Erlang& v) { return json{{"type", "erlang"}, {"stages", v.stages}, {"rate", v.rate}}; },
                        [](const Deterministic& v) { return json{{"type", "deterministic"}, {"value", v.value}}; },
                    },
                    d.variant());
}

nlohmann::json to_json(const PatienceDist& d) {
  return std::visit(overloaded{
                        [](const TruncatedMixtureExponential& v) {
                          return json{{"type", "trunc_mix_exp"},
                                      {"weights", v.weights},
                                      {"rates", v.rates},
                                      {"bound", v.bound}};
                        },
                        [](const UniformPatience& v) { return json{{"type", "uniform"}, {"bound", v.bound}}; },
                        [](const PointMass& v) { return json{{"type", "point_mass"}, {"bound", v.bound}}; },
                    },
                    d.variant());
}

ArrivalDist arrival_from_json(const nlohmann::json& j) {
  const std::string t = type_of(j);
  if (t == "exp") {
    reject_unknown(j, {"type", "rate"});
    return ArrivalDist(Exponential{number(j, "rate")});
  }
  if (t == "mix_exp") {
    reject_unknown(j, {"type", "weights", "rates"});
    return ArrivalDist(MixtureExponential{numbers(j, "weights"), numbers(j, "rates")});
  }
  if (t == "gamma") {
    reject_unknown(j, {"type", "shape", "scale"});
    return ArrivalDist(GammaArrival{number(j, "shape"), number(j, "scale")});
  }
  if (t == "uniform") {
    reject_unknown(j, {"type", "lo", "hi"});
    return ArrivalDist(UniformArrival{number(j, "lo"), number(j, "hi")});
  }
  if (t == "erlang") {
    reject_unknown(j, {"type", "stages", "rate"});
    const double k = number(j, "stages");
    if (k != std::floor(k)) throw SchemaError(0, "stages", "stages must be an integer");
    return ArrivalDist(Erlang{static_cast<int>(k), number(j, "rate")});
  }
  if (t == "deterministic") {
    reject_unknown(j, {"type", "value"});
    return ArrivalDist(Deterministic{number(j, "value")});
  }
  throw SchemaError(0, "type", "unknown arrival type '" + t + "'");
}

PatienceDist patience_from_json(const nlohmann::json& j) {
  const std::string t = type_of(j);
  if (t == "trunc_mix_exp") {
    reject_unknown(j, {"type", "weights", "rates", "bound"});
    return PatienceDist(TruncatedMixtureExponential{numbers(j, "weights"), numbers(j, "rates"), number(j, "bound")});
  }
  if (t == "uniform") {
    reject_unknown(j, {"type", "bound"});
    return PatienceDist(UniformPatience{number(j, "bound")});
  }
  if (t == "point_mass") {
    reject_unknown(j, {"type", "bound"});
    return PatienceDist(PointMass{number(j, "bound")});
  }
  throw SchemaError(0, "type", "unknown patience type '" + t + "'");
}

}  // namespace qsize
