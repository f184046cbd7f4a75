#include "qsize/fluid.hpp"

#include <algorithm>

#include "qsize/errors.hpp"

namespace qsize {

FluidResult fluid_offered_wait(const QueueSpec& queue, double mu) {
  if (!(mu > 0.0)) throw domain_error("OutOfDomain", "service rate must be positive");
  const double lambda = queue.lambda();
  if (mu >= lambda) return {0.0, FluidRegime::Underloaded};
  const double target = 1.0 - mu / lambda;
  const PatienceDist& g = queue.patience;
  if (g.cdf(0.0) >= target) return {0.0, FluidRegime::Overloaded};
  // Invariant: G(lo) < target <= G(hi).
  double lo = 0.0, hi = queue.y_bar();
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g.cdf(mid) >= target ? hi : lo) = mid;
  }
  return {hi, FluidRegime::Overloaded};
}

std::vector<double> fluid_measures(const QueueSpec& queue, double mu, const std::vector<MeasureKind>& kinds) {
  const double w = fluid_offered_wait(queue, mu).w_fluid;
  std::vector<double> out;
  for (const MeasureKind& k : kinds) out.push_back(g_eval(k, queue, w, mu));
  return out;
}

}  // namespace qsize
