#include "qsize/kernel.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "qsize/errors.hpp"

namespace qsize {

// Given the current offered wait u, the next one is at most x unless the
// arrival gap t is shorter than u - x, or both the service s and the patience
// y outlast x + t. Hence
//   tau(x, u) = P[t >= t0] - int_{t0}^{ybar - x} exp(-mu (x+t-u)) P[y > x+t] dA(t)
// with t0 = max(0, u - x); beyond ybar - x the patience is surely spent.

KernelContext::KernelContext(const QueueSpec& queue, double mu, QuadOptions quad)
    : queue_(&queue), mu_(mu), y_bar_(queue.y_bar()), quad_(quad) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw domain_error("OutOfDomain", "service rate must be > 0");
  if (!queue.arrival.has_density())
    throw inadmissible("the transition kernel needs an inter-arrival density; " +
                       queue.arrival.type_name() + " is simulation-only");
  a_terms_ = queue.arrival.erlang_terms();
  g_terms_ = queue.patience.survival_terms();
  closed_ = !a_terms_.empty() && !g_terms_.empty();
}

// With t = t0 + s and an Erlang-k arrival term,
//   int_{t0}^{t1} t^(k-1) e^{-c t} dt = e^{-c t0} sum_m C(k-1, m) t0^(k-1-m) m! / c^(m+1) P(m+1, c span)
// where P is the regularized lower incomplete gamma function. Every summand is nonnegative.
double KernelContext::integral_closed(double x, double u, double t0, double t1) const {
  double sum = 0.0;
  const double span = t1 - t0;
  for (const ErlangTerm& a : a_terms_) {
    for (const ExpTerm& g : g_terms_) {
      const double c = g.rate + mu_ + a.rate;
      const double e0 = -g.rate * (x + t0) - mu_ * (x + t0 - u) - a.rate * t0;
      double poly;
      if (a.stages == 1) {
        poly = a.rate * (-std::expm1(-c * span)) / c;
      } else {
        // density prefactor rate^k / (k-1)! folded into each summand
        const int n = a.stages - 1;
        poly = 0.0;
        double binom = 1.0;  // C(n, m)
        for (int m = 0; m <= n; ++m) {
          if (m > 0) binom *= static_cast<double>(n - m + 1) / m;
          const double lead = (t0 > 0.0 || m == n) ? std::pow(t0, n - m) : 0.0;
          if (lead == 0.0) continue;
          const double log_coef = std::log(binom) + std::lgamma(m + 1.0) - std::lgamma(n + 1.0) +
                                  a.stages * std::log(a.rate) - (m + 1) * std::log(c);
          poly += lead * std::exp(log_coef) * boost::math::gamma_p(m + 1.0, c * span);
        }
      }
      sum += a.weight * g.weight * std::exp(e0) * poly;
    }
  }
  return sum;
}

double KernelContext::integral_quadrature(double x, double u, double t0, double t1) const {
  const ArrivalDist& a = queue_->arrival;
  const PatienceDist& g = queue_->patience;
  auto f = [&](double t) { return a.pdf(t) * std::exp(-mu_ * (x + t - u)) * g.survival(x + t); };
  return integrate(f, t0, t1, quad_, a.breakpoints());
}

double KernelContext::eval(double x, double u) const {
  if (x >= y_bar_) return 1.0;
  if (x < 0.0) return 0.0;
  u = std::clamp(u, 0.0, y_bar_);
  const double t0 = std::max(0.0, u - x);
  const double t1 = y_bar_ - x;
  double tau = queue_->arrival.survival_left(t0);
  if (t1 > t0) tau -= closed_ ? integral_closed(x, u, t0, t1) : integral_quadrature(x, u, t0, t1);
  return std::clamp(tau, 0.0, 1.0);
}

}  // namespace qsize
