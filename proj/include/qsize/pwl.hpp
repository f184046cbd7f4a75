#pragma once

#include <string>
#include <vector>

#include "qsize/measures.hpp"

namespace qsize {

/// Piecewise-linear function of the service rate on equally spaced knots.
struct PwlFunction {
  std::vector<double> knots;
  std::vector<double> values;

  double mu_min() const { return knots.front(); }
  double mu_max() const { return knots.back(); }
};

/// N equally spaced knots on [mu_min, mu_max], N >= 2.
std::vector<double> equally_spaced_knots(double mu_min, double mu_max, int count);
/// The dyadic family: 2^m + 1 knots.
inline int dyadic_knot_count(int m) { return (1 << m) + 1; }

/// Linear interpolation; throws OutOfDomain outside [mu_min, mu_max].
double eval_pwl(const PwlFunction& f, double mu);

/// Finite-approximation measures at each knot, one chain per knot, for every
/// kind in `kinds`. Knots are evaluated in parallel.
std::vector<PwlFunction> build_pwl(const QueueSpec& queue, const std::vector<MeasureKind>& kinds, int r,
                                   const std::vector<double>& knots);

inline PwlFunction build_pwl(const QueueSpec& queue, const MeasureKind& kind, int r, int m, double mu_min,
                             double mu_max) {
  return build_pwl(queue, std::vector<MeasureKind>{kind}, r,
                   equally_spaced_knots(mu_min, mu_max, dyadic_knot_count(m)))[0];
}

/// Finite-approximation measures at one rate.
std::vector<double> finite_measures(const QueueSpec& queue, const std::vector<MeasureKind>& kinds, double mu,
                                    int r);

void write_pwl_csv(const PwlFunction& f, const std::string& path);

}  // namespace qsize
