#include "qsize/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "qsize/errors.hpp"

namespace qsize {

namespace {

constexpr int kOrder = 15;
constexpr int kInitialPanels = 8;  // per breakpoint interval; guards against lucky agreement on peaked integrands

struct Rule {
  std::array<double, kOrder> x{};
  std::array<double, kOrder> w{};
};

// Legendre roots by Newton iteration from the Chebyshev initial guess.
Rule make_rule() {
  Rule rule;
  const int n = kOrder;
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    rule.x[i] = z;
    rule.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return rule;
}

const Rule& rule() {
  static const Rule r = make_rule();
  return r;
}

double panel(const std::function<double(double)>& f, double a, double b) {
  const Rule& r = rule();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < kOrder; ++i) sum += r.w[i] * f(mid + half * r.x[i]);
  return sum * half;
}

struct Panel {
  double a, b, estimate;
};

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opts, const std::vector<double>& breakpoints) {
  if (!(b > a)) return 0.0;

  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::vector<Panel> stack;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    const double step = (cuts[i + 1] - cuts[i]) / kInitialPanels;
    for (int k = 0; k < kInitialPanels; ++k) {
      const double lo = cuts[i] + k * step;
      const double hi = (k + 1 == kInitialPanels) ? cuts[i + 1] : lo + step;
      stack.push_back({lo, hi, panel(f, lo, hi)});
    }
  }

  const double length = b - a;
  double total = 0.0;
  int subdivisions = 0;
  while (!stack.empty()) {
    Panel p = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    const double left = panel(f, p.a, mid);
    const double right = panel(f, mid, p.b);
    const double refined = left + right;
    const double err = std::abs(refined - p.estimate);
    const double share = (p.b - p.a) / length;
    const double allowed =
        std::max(opts.abs_tol, opts.rel_tol * std::abs(refined)) * std::max(share, 1e-3);
    if (err <= allowed || mid <= p.a || mid >= p.b) {
      total += refined;
      continue;
    }
    if (++subdivisions > opts.max_subdivisions)
      throw numerical("QuadratureFailure",
                      "adaptive quadrature exceeded " + std::to_string(opts.max_subdivisions) +
                          " subdivisions on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    stack.push_back({p.a, mid, left});
    stack.push_back({mid, p.b, right});
  }
  return total;
}

double integrate_to_infinity(const std::function<double(double)>& f, double a,
                             const QuadOptions& opts) {
  auto g = [&](double s) {
    if (s >= 1.0) return 0.0;
    const double one_minus = 1.0 - s;
    const double t = a + s / one_minus;
    const double v = f(t);
    return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
  };
  return integrate(g, 0.0, 1.0, opts);
}

}  // namespace qsize
