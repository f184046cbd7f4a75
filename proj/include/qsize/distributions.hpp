#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace qsize {

using Rng = std::mt19937_64;

/// One term w * rate * exp(-rate * t) of an exponential-family density.
struct ExpTerm {
  double weight;
  double rate;
};

/// One term w * rate^k t^(k-1) exp(-rate * t) / (k-1)! of an Erlang-mixture density.
struct ErlangTerm {
  double weight;
  double rate;
  int stages;
};

struct Exponential {
  double rate;
};
struct MixtureExponential {
  std::vector<double> weights;
  std::vector<double> rates;
};
struct GammaArrival {
  double shape;
  double scale;
};
struct UniformArrival {
  double lo;
  double hi;
};
struct Erlang {
  int stages;
  double rate;
};
/// Fixed inter-arrival time. Simulation only; it has no density.
struct Deterministic {
  double value;
};

/// Inter-arrival time distribution on [0, inf).
class ArrivalDist {
 public:
  using Variant =
      std::variant<Exponential, MixtureExponential, GammaArrival, UniformArrival, Erlang, Deterministic>;

  ArrivalDist(Variant v);  // validates parameters, throws SchemaError

  const Variant& variant() const { return v_; }
  std::string type_name() const;

  double cdf(double x) const;
  /// 1 - A(x-).
  double survival_left(double x) const;
  double pdf(double x) const;
  double mean() const;
  double intensity() const { return 1.0 / mean(); }
  double second_moment() const;
  double sample(Rng& rng) const;

  /// Density as a positive mixture of exponentials, empty if not of that form.
  std::vector<ExpTerm> exp_terms() const;
  /// Density as a positive mixture of Erlang laws (exponentials included), empty otherwise.
  std::vector<ErlangTerm> erlang_terms() const;
  /// Points where the density is not smooth.
  std::vector<double> breakpoints() const;
  bool has_density() const;

 private:
  Variant v_;
};

struct TruncatedMixtureExponential {
  std::vector<double> weights;
  std::vector<double> rates;
  double bound;
};
struct UniformPatience {
  double bound;
};
struct PointMass {
  double bound;
};

/// Patience distribution with G(bound) = 1. Truncated mixtures keep the raw
/// hazard below the bound and put the remaining mass on an atom at the bound.
class PatienceDist {
 public:
  using Variant = std::variant<TruncatedMixtureExponential, UniformPatience, PointMass>;

  PatienceDist(Variant v);

  const Variant& variant() const { return v_; }
  std::string type_name() const;

  double bound() const;
  double cdf(double x) const;
  /// P[y > x].
  double survival(double x) const;
  double mean() const;
  double sample(Rng& rng) const;

  /// Survival below the bound as sum w * exp(-rate * x); a point mass is the
  /// single term (1, 0). Empty for the uniform variant.
  std::vector<ExpTerm> survival_terms() const;

 private:
  Variant v_;
};

/// Exponential service time with rate mu.
struct ServiceDist {
  double mu;
  double cdf(double x) const;
  double sample(Rng& rng) const;
};

struct Assumption1Bounds {
  double a_prime;   // sup |dA/dx|
  double a_dprime;  // sup |d2A/dx2|
  double y_bar;
};

/// Density bounds required by the finite approximation error analysis.
/// Throws Inadmissible for variants without a bounded, Lipschitz density.
Assumption1Bounds validate_assumption1(const ArrivalDist& a, const PatienceDist& g);

/// Balanced-means two-phase hyperexponential with the given mean and squared
/// coefficient of variation. Exponential when scv is 1 within 1e-9.
ArrivalDist moment_match_hyperexp2(double mean, double scv);

struct SampleMoments {
  double mean;
  double scv;  // unbiased variance / mean^2
};

SampleMoments sample_moments(const std::vector<double>& samples);
/// Rate 1 / sample mean.
ArrivalDist fit_exponential(const std::vector<double>& samples);
/// Moment match to the sample mean and scv. Throws ScvBelowOne.
ArrivalDist fit_hyperexp2(const std::vector<double>& samples);

struct KsResult {
  double d;
  double p_asymptotic;
};

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
KsResult ks_statistic(const std::vector<double>& sorted_samples,
                      const std::function<double(double)>& cdf);
KsResult ks_statistic(const std::vector<double>& sorted_samples, const ArrivalDist& dist);
/// Asymptotic Kolmogorov survival function P[K > x].
double kolmogorov_survival(double x);

nlohmann::json to_json(const ArrivalDist& d);
nlohmann::json to_json(const PatienceDist& d);
ArrivalDist arrival_from_json(const nlohmann::json& j);
PatienceDist patience_from_json(const nlohmann::json& j);

}  // namespace qsize
