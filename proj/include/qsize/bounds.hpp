#pragma once

#include <string>
#include <vector>

#include "qsize/measures.hpp"

namespace qsize {

struct ErrorBoundReport {
  int r = 0;
  double mu = 0.0;
  double kernel_factor = 0.0;     // ybar * a' / 2^(r-2)
  double variation_factor = 0.0;  // V_xi(g)
  double sensitivity = 0.0;       // e = max_s 1 / z*_s
  double bound = 0.0;
  std::vector<double> z_star;  // one per s = 0..J
  int r_star = 0;
  double probe_delta = 0.0;
  std::string diagnostic;  // non-empty when the bound is infinite
};

struct BoundOptions {
  bool allow_large_r = false;  // r > 8 needs explicit opt-in
};

/// Deterministic bound on |E_pi g - E_pi^(r) g| at rate mu.
/// Requires r above the probed ergodicity order.
ErrorBoundReport error_bound(const QueueSpec& queue, const MeasureKind& kind, double mu, int r,
                             const BoundOptions& opts = {});

/// min z s.t. |E_j(a)| <= z for the sensitivity program of state s.
double sensitivity_lp(const FiniteChain& chain, int s);

nlohmann::json to_json(const ErrorBoundReport& r);

}  // namespace qsize
