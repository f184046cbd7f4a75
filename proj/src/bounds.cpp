#include "qsize/bounds.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "qsize/errors.hpp"
#include "qsize/lp.hpp"
#include "qsize/parallel.hpp"

namespace qsize {

namespace {

// Row j (0..J) holds the coefficients of a_1..a_J in
//   E_j(a) = a_j - sum_i (1 + S_ij)(a_i - a_{i-1}),  S_ij = sum_{t<=j} q_it.
Eigen::MatrixXd sensitivity_rows(const FiniteChain& chain) {
  const int J = chain.size();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(J, J + 1);  // S(i, j), j = 0..J
  for (int i = 0; i < J; ++i)
    for (int j = 1; j <= J; ++j) S(i, j) = S(i, j - 1) + chain.Q(i, j - 1);
  Eigen::MatrixXd E(J + 1, J);
  for (int j = 0; j <= J; ++j) {
    for (int k = 1; k <= J; ++k) {
      double coef = (k == j ? 1.0 : 0.0) - (1.0 + S(k - 1, j));
      if (k < J) coef += 1.0 + S(k, j);
      E(j, k - 1) = coef;
    }
  }
  return E;
}

double solve_sensitivity(const Eigen::MatrixXd& E, int s) {
  const int J = static_cast<int>(E.cols());
  LpProblem lp;
  for (int k = 0; k < J; ++k) lp.add_var(0.0, -1.0, 1.0);
  const int z = lp.add_var(1.0, 0.0, kInf);

  auto add_pair = [&](int j, bool eta) {
    std::vector<std::pair<int, double>> plus, minus;
    for (int k = 0; k < J; ++k) {
      double coef = E(j, k);
      if (eta && k == j - 1) coef -= 1.0;  // + (1 - a_s)
      if (coef == 0.0) continue;
      plus.emplace_back(k, coef);
      minus.emplace_back(k, -coef);
    }
    plus.emplace_back(z, -1.0);
    minus.emplace_back(z, -1.0);
    const double constant = eta ? 1.0 : 0.0;
    lp.add_row(plus, Sense::Le, -constant);
    lp.add_row(minus, Sense::Le, constant);
  };
  for (int j = 0; j <= J; ++j) add_pair(j, false);
  add_pair(s, true);

  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::Optimal)
    throw numerical("NumericalFailure", fmt::format("sensitivity LP for s = {} ended {}", s, to_string(res.status)));
  return res.objective;
}

}  // namespace

double sensitivity_lp(const FiniteChain& chain, int s) { return solve_sensitivity(sensitivity_rows(chain), s); }

ErrorBoundReport error_bound(const QueueSpec& queue, const MeasureKind& kind, double mu, int r,
                             const BoundOptions& opts) {
  if (r > 8 && !opts.allow_large_r)
    throw domain_error("OutOfDomain", fmt::format("error bound at r = {} > 8 needs the large-order flag", r));
  const Assumption1Bounds a1 = validate_assumption1(queue.arrival, queue.patience);
  const ErgodicityProbe probe = probe_ergodicity(queue, mu);
  if (r <= probe.r_star)
    throw domain_error("BelowErgodicOrder",
                       fmt::format("r = {} must exceed the probed ergodicity order {}", r, probe.r_star));

  ErrorBoundReport rep;
  rep.r = r;
  rep.mu = mu;
  rep.r_star = probe.r_star;
  rep.probe_delta = probe.delta;
  rep.kernel_factor = a1.y_bar * a1.a_prime / std::ldexp(1.0, r - 2);
  rep.variation_factor = validate_assumption23(kind, queue, mu, mu).tv;
  if (rep.variation_factor == 0.0) {
    rep.bound = 0.0;
    return rep;
  }

  const FiniteChain chain = build_chain(queue, mu, r);
  const Eigen::MatrixXd E = sensitivity_rows(chain);
  const int J = chain.size();
  rep.z_star.assign(J + 1, 0.0);
  parallel_for(J + 1, [&](std::size_t s) { rep.z_star[s] = solve_sensitivity(E, static_cast<int>(s)); });

  const double z_min = *std::min_element(rep.z_star.begin(), rep.z_star.end());
  if (z_min <= 1e-12) {
    rep.sensitivity = kInf;
    rep.bound = kInf;
    rep.diagnostic = fmt::format("DegenerateLp: min z*_s = {:.3e}", z_min);
    return rep;
  }
  rep.sensitivity = 1.0 / z_min;
  rep.bound = rep.kernel_factor * rep.variation_factor * rep.sensitivity;
  return rep;
}

nlohmann::json to_json(const ErrorBoundReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return "inf";
  };
  nlohmann::json j{{"r", r.r},
                   {"mu", r.mu},
                   {"kernel_factor", r.kernel_factor},
                   {"variation_factor", r.variation_factor},
                   {"sensitivity", num(r.sensitivity)},
                   {"bound", num(r.bound)},
                   {"r_star", r.r_star},
                   {"probe_delta", r.probe_delta},
                   {"z_star", r.z_star}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

}  // namespace qsize
