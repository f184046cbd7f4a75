#include "qsize/pwl.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/os.h>

#include "qsize/errors.hpp"
#include "qsize/parallel.hpp"

namespace qsize {

std::vector<double> equally_spaced_knots(double mu_min, double mu_max, int count) {
  if (count < 2) throw domain_error("OutOfDomain", "a PWL function needs at least two knots");
  if (!(mu_max > mu_min) || !(mu_min > 0.0))
    throw domain_error("OutOfDomain", "knot range must satisfy 0 < mu_min < mu_max");
  std::vector<double> k(count);
  for (int i = 0; i < count; ++i) k[i] = mu_min + (mu_max - mu_min) * i / (count - 1);
  k.back() = mu_max;
  return k;
}

double eval_pwl(const PwlFunction& f, double mu) {
  const double lo = f.knots.front(), hi = f.knots.back();
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (!(mu >= lo - slack && mu <= hi + slack))
    throw domain_error("OutOfDomain", fmt::format("rate {} outside [{}, {}]", mu, lo, hi));
  mu = std::clamp(mu, lo, hi);
  auto it = std::upper_bound(f.knots.begin(), f.knots.end(), mu);
  if (it == f.knots.end()) return f.values.back();
  const std::size_t k = static_cast<std::size_t>(it - f.knots.begin());
  if (k == 0) return f.values.front();
  const double t = (mu - f.knots[k - 1]) / (f.knots[k] - f.knots[k - 1]);
  if (t == 0.0) return f.values[k - 1];
  return f.values[k - 1] + t * (f.values[k] - f.values[k - 1]);
}

std::vector<double> finite_measures(const QueueSpec& queue, const std::vector<MeasureKind>& kinds, double mu,
                                    int r) {
  const FiniteChain chain = build_chain(queue, mu, r);
  const StationaryVector v = stationary_vector(chain);
  std::vector<double> out;
  out.reserve(kinds.size());
  for (const MeasureKind& k : kinds) out.push_back(expected_measure(k, queue, chain, v));
  return out;
}

std::vector<PwlFunction> build_pwl(const QueueSpec& queue, const std::vector<MeasureKind>& kinds, int r,
                                   const std::vector<double>& knots) {
  std::vector<std::vector<double>> at(knots.size());
  parallel_for(knots.size(), [&](std::size_t i) { at[i] = finite_measures(queue, kinds, knots[i], r); });
  std::vector<PwlFunction> out(kinds.size());
  for (std::size_t l = 0; l < kinds.size(); ++l) {
    out[l].knots = knots;
    for (std::size_t i = 0; i < knots.size(); ++i) out[l].values.push_back(at[i][l]);
  }
  return out;
}

void write_pwl_csv(const PwlFunction& f, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("mu,phi\n");
  for (std::size_t i = 0; i < f.knots.size(); ++i) out.print("{:.17g},{:.17g}\n", f.knots[i], f.values[i]);
}

}  // namespace qsize
