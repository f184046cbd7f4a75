#include "qsize/studies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include <boost/math/tools/roots.hpp>
#include <fmt/os.h>

#include "qsize/errors.hpp"
#include "qsize/fluid.hpp"
#include "qsize/parallel.hpp"

namespace qsize {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PatienceDist patience_with_mean(const std::array<double, 3>& weights, const std::array<double, 3>& shape, double mean,
                                double y_bar) {
  if (!(mean > 0.0 && mean < y_bar)) throw domain_error("OutOfDomain", "patience mean must lie in (0, y_bar)");
  auto build = [&](double scale) {
    TruncatedMixtureExponential t{{weights.begin(), weights.end()}, {}, y_bar};
    for (double s : shape) t.rates.push_back(1.0 / (scale * s));
    return PatienceDist(t);
  };
  // The truncated mean increases with the scale of the component means.
  auto gap = [&](double scale) { return build(scale).mean() - mean; };
  double lo = 1e-6, hi = 1.0;
  while (gap(hi) < 0.0) hi *= 2.0;
  const auto [a, b] =
      boost::math::tools::bisect(gap, lo, hi, [](double x, double y) { return std::abs(y - x) <= 1e-15 * y; });
  return build(0.5 * (a + b));
}

std::vector<QueueSpec> generate_queues(const GeneratorSpec& spec) {
  if (spec.count < 0) throw domain_error("OutOfDomain", "queue count must be >= 0");
  std::vector<QueueSpec> out;
  for (int k = 0; k < spec.count; ++k) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(k)));
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const double lambda = std::exp(uniform(std::log(spec.lambda_lo), std::log(spec.lambda_hi)));
    const double scv = uniform(spec.scv_lo, spec.scv_hi);
    const double pmean = uniform(spec.patience_mean_lo, spec.patience_mean_hi);
    std::array<double, 3> w{uniform(0.2, 1.0), uniform(0.2, 1.0), uniform(0.2, 1.0)};
    const double ws = w[0] + w[1] + w[2];
    for (double& x : w) x /= ws;
    const std::array<double, 3> shape{uniform(0.1, 0.5), uniform(0.7, 1.5), uniform(2.0, 4.0)};
    out.push_back({fmt::format("q{:02d}", k), moment_match_hyperexp2(1.0 / lambda, scv),
                   patience_with_mean(w, shape, pmean, spec.y_bar), {}});
  }
  return out;
}

// ------------------------------------------------------------ eval error

int error_band(double rel) {
  if (rel < 0.01) return 0;
  if (rel < 0.05) return 1;
  if (rel < 0.10) return 2;
  if (rel <= 0.25) return 3;
  return 4;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double scv_of(const ArrivalDist& a) {
  const double m = a.mean();
  return a.second_moment() / (m * m) - 1.0;
}

}  // namespace

EvalErrorResult run_eval_error_study(const EvalErrorSpec& spec) {
  return run_eval_error_study(generate_queues(spec.gen), spec);
}

EvalErrorResult run_eval_error_study(const std::vector<QueueSpec>& queues, const EvalErrorSpec& spec) {
  const std::vector<MeasureKind> kinds{MeasureKind::sojourn(), MeasureKind::abandonment()};
  const std::size_t K = queues.size();
  EvalErrorResult res;
  res.finite_seconds.assign(K, 0.0);
  res.sim_seconds.assign(K, 0.0);
  std::vector<std::vector<double>> finite(K), fluid(K);
  std::vector<std::vector<SimEstimate>> sim(K);

  parallel_for(K, [&](std::size_t k) {
    const QueueSpec& q = queues[k];
    const double mu = spec.service_ratio * q.lambda();
    auto t0 = std::chrono::steady_clock::now();
    finite[k] = finite_measures(q, kinds, mu, spec.r);
    res.finite_seconds[k] = seconds_since(t0);
    fluid[k] = fluid_measures(q, mu, kinds);
    SimConfig cfg;
    cfg.samples = spec.sim_samples;
    cfg.burn_in = spec.burn_in;
    cfg.seed = derive_seed(spec.gen.seed ^ 0x51a7e5eedULL, k);
    t0 = std::chrono::steady_clock::now();
    sim[k] = simulate_measures(q, mu, kinds, cfg);
    res.sim_seconds[k] = seconds_since(t0);
  });

  for (std::size_t k = 0; k < K; ++k) {
    const QueueSpec& q = queues[k];
    res.queues.push_back({q.id, q.lambda(), scv_of(q.arrival), q.patience.mean(), spec.service_ratio * q.lambda()});
    for (std::size_t l = 0; l < kinds.size(); ++l) {
      const std::string m = kinds[l].name();
      const double ref = sim[k][l].estimate;
      auto rel = [&](double v, EvalRow& row) {
        row.absolute = std::abs(ref) < 1e-12;
        row.rel_error = row.absolute ? std::abs(v - ref) : std::abs(v - ref) / std::abs(ref);
      };
      EvalRow srow{q.id, m, "sim", ref, sim[k][l].std_error, std::nullopt, false};
      EvalRow frow{q.id, m, "finite", finite[k][l], std::nullopt, std::nullopt, false};
      rel(finite[k][l], frow);
      EvalRow flrow{q.id, m, "fluid", fluid[k][l], std::nullopt, std::nullopt, false};
      rel(fluid[k][l], flrow);
      EvalRow drow{q.id, m, "diffusion", std::nullopt, std::nullopt, std::nullopt, false};
      res.rows.insert(res.rows.end(), {srow, frow, flrow, drow});
    }
  }
  return res;
}

std::vector<BandCount> band_table(const EvalErrorResult& r) {
  std::vector<BandCount> out;
  for (const char* measure : {"sojourn", "abandonment"})
    for (const char* method : {"finite", "fluid"}) {
      BandCount b{measure, method, {}, 0};
      for (const EvalRow& row : r.rows)
        if (row.measure == measure && row.method == method && row.rel_error) {
          ++b.count[error_band(*row.rel_error)];
          ++b.total;
        }
      out.push_back(b);
    }
  return out;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.12g}", *v) : std::string(); }

}  // namespace

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("queue_id,measure,method,value,stderr,rel_error,error_basis\n");
  for (const EvalRow& r : rows)
    out.print("{},{},{},{},{},{},{}\n", r.queue_id, r.measure, r.method, cell(r.value), cell(r.std_error),
              cell(r.rel_error), r.rel_error ? (r.absolute ? "absolute" : "relative") : "");
}

void write_band_csv(const std::vector<BandCount>& bands, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("measure,method,band,count,percent\n");
  for (const BandCount& b : bands)
    for (std::size_t i = 0; i < kErrorBands.size(); ++i)
      out.print("{},{},{},{},{:.2f}\n", b.measure, b.method, kErrorBands[i], b.count[i],
                b.total ? 100.0 * b.count[i] / b.total : 0.0);
}

void write_queue_summary_csv(const std::vector<QueueSummary>& q, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("queue_id,lambda,scv,patience_mean,mu\n");
  for (const QueueSummary& s : q)
    out.print("{},{:.12g},{:.12g},{:.12g},{:.12g}\n", s.id, s.lambda, s.scv, s.patience_mean, s.mu);
}

// -------------------------------------------------- Markovian simplification

PatienceDist default_markovian_patience() {
  return PatienceDist(TruncatedMixtureExponential{{0.6, 0.4}, {1.0 / 0.25, 1.0 / 1.375}, 25.0});
}

namespace {

struct WaitStats {
  double wait, abandon;
};

WaitStats wait_stats(const QueueSpec& q, double mu, int r) {
  const FiniteChain chain = build_chain(q, mu, r);
  const StationaryVector v = stationary_vector(chain);
  WaitStats s{0.0, 0.0};
  for (int i = 0; i < chain.size(); ++i) {
    const double c = chain.states[i];
    s.wait += v.v(i) * c;
    // P[y < c]: the left limit of G at c.
    s.abandon += v.v(i) * (c > 0.0 ? q.patience.cdf(std::nextafter(c, 0.0)) : 0.0);
  }
  return s;
}

}  // namespace

std::vector<MarkovianRow> run_markovian_simplification_study(const MarkovianSpec& spec) {
  const PatienceDist patience = spec.patience.value_or(default_markovian_patience());
  const PatienceDist simple(TruncatedMixtureExponential{{1.0}, {1.0 / patience.mean()}, patience.bound()});
  std::vector<MarkovianRow> rows(spec.p_weights.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const double p = spec.p_weights[i];
    if (!(p >= 0.0 && p <= 1.0)) throw domain_error("OutOfDomain", "mixture weight p must lie in [0, 1]");
    const ArrivalDist gi = (p == 0.0 || p == 1.0) ? ArrivalDist(Exponential{p == 1.0 ? 10.0 : 40.0})
                                                  : ArrivalDist(MixtureExponential{{p, 1.0 - p}, {10.0, 40.0}});
    const double lambda = gi.intensity();
    const double mu = spec.service_ratio * lambda;
    const WaitStats a = wait_stats({"gi", gi, patience, {}}, mu, spec.r);
    const WaitStats b = wait_stats({"mm", ArrivalDist(Exponential{lambda}), simple, {}}, mu, spec.r);
    rows[i] = {p,        lambda,   a.wait,
               b.wait,   std::abs(b.wait - a.wait) / a.wait,
               a.abandon, b.abandon, std::abs(b.abandon - a.abandon) / a.abandon};
  });
  return rows;
}

void write_markovian_csv(const std::vector<MarkovianRow>& rows, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("p,lambda,gi_wait,mm_wait,wait_gap,gi_abandon,mm_abandon,abandon_gap\n");
  for (const MarkovianRow& r : rows)
    out.print("{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n", r.p, r.lambda, r.gi_wait,
              r.mm_wait, r.wait_gap, r.gi_abandon, r.mm_abandon, r.abandon_gap);
}

// ---------------------------------------------------------- equity frontier

std::vector<std::string> tertile_labels(const std::vector<double>& values, const std::array<const char*, 3>& names) {
  std::vector<double> s = values;
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    if (s.empty()) return 0.0;
    const double h = q * (s.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(h));
    if (i + 1 >= s.size()) return s.back();
    return s[i] + (h - i) * (s[i + 1] - s[i]);
  };
  const double q1 = quantile(0.33), q2 = quantile(0.67);
  std::vector<std::string> out;
  for (double v : values) out.emplace_back(v <= q1 ? names[0] : v <= q2 ? names[1] : names[2]);
  return out;
}

FrontierResult run_equity_frontier(const FrontierSpec& spec) {
  return run_equity_frontier(generate_queues(spec.gen), spec);
}

FrontierResult run_equity_frontier(const std::vector<QueueSpec>& queues, const FrontierSpec& spec) {
  FrontierResult res;
  res.queues = queues;
  if (queues.empty()) return res;
  SizingProblem p = build_equity_model(queues, spec.kind, 1.0, spec.mu_total, spec.theta_lower, spec.theta_upper,
                                       spec.knots, spec.r, spec.epsilon);
  p.node_limit = spec.node_limit;
  const PwlTable pwl = build_pwl_table(p);

  std::vector<double> grid = spec.varsigma;
  if (grid.empty()) {
    // Smallest attainable weighted mean, then the weighted mean at the box lows.
    p.varsigma = 1e6;
    AssembledModel m = assemble(p, pwl);
    std::fill(m.lp.c.begin(), m.lp.c.end(), 0.0);
    m.lp.c[m.layout.w_bar] = 1.0;
    MilpOptions opts;
    opts.node_limit = spec.node_limit;
    const MilpResult lo = solve_milp_sos2(m.lp, m.sos, opts);
    if (lo.status != LpStatus::Optimal) throw infeasible("Infeasible", "equity model has no feasible allocation");
    const double w_min = lo.objective;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < queues.size(); ++k) {
      num += queues[k].lambda() * pwl[k][0].values.front();
      den += queues[k].lambda();
    }
    const double w_max = num / den;
    for (double f : spec.fractions) grid.push_back(w_min + f * (w_max - w_min));
  }

  for (double vs : grid) {
    FrontierPoint pt;
    pt.varsigma = vs;
    p.varsigma = vs;
    try {
      const Solution s = solve_assembled(p, assemble(p, pwl), pwl);
      pt.feasible = true;
      pt.Z = s.Z;
      pt.w_bar = s.w_bar;
      pt.budget_slack = s.budget_slack;
      pt.nodes = s.nodes;
      pt.mu = s.mu;
      pt.w = s.w;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
    }
    res.points.push_back(std::move(pt));
  }

  std::vector<double> lambdas, risk;
  for (const QueueSpec& q : queues) {
    lambdas.push_back(q.lambda());
    risk.push_back(1.0 / q.patience.mean());
  }
  res.size_cluster = tertile_labels(lambdas, {"small", "medium", "large"});
  res.risk_cluster = tertile_labels(risk, {"low", "medium", "high"});
  return res;
}

void write_frontier_csv(const FrontierResult& r, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("varsigma,status,Z,w_bar,budget_slack,nodes\n");
  for (const FrontierPoint& p : r.points) {
    if (p.feasible)
      out.print("{:.12g},optimal,{:.12g},{:.12g},{:.12g},{}\n", p.varsigma, p.Z, p.w_bar, p.budget_slack, p.nodes);
    else
      out.print("{:.12g},infeasible,,,,\n", p.varsigma);
  }
}

void write_allocation_csv(const FrontierResult& r, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("varsigma,queue_id,lambda,mu,mu_over_lambda,w,size_cluster,risk_cluster\n");
  for (const FrontierPoint& p : r.points) {
    if (!p.feasible) continue;
    for (std::size_t k = 0; k < r.queues.size(); ++k) {
      const double lam = r.queues[k].lambda();
      out.print("{:.12g},{},{:.12g},{:.12g},{:.12g},{:.12g},{},{}\n", p.varsigma, r.queues[k].id, lam, p.mu[k],
                p.mu[k] / lam, p.w[k], r.size_cluster[k], r.risk_cluster[k]);
    }
  }
}

void write_cluster_csv(const FrontierResult& r, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("varsigma,size_cluster,risk_cluster,count,mean_mu_over_lambda\n");
  for (const FrontierPoint& p : r.points) {
    if (!p.feasible) continue;
    for (const char* size : {"small", "medium", "large"})
      for (const char* risk : {"low", "medium", "high"}) {
        int n = 0;
        double sum = 0.0;
        for (std::size_t k = 0; k < r.queues.size(); ++k)
          if (r.size_cluster[k] == size && r.risk_cluster[k] == risk) {
            ++n;
            sum += p.mu[k] / r.queues[k].lambda();
          }
        if (n == 0)
          out.print("{:.12g},{},{},0,\n", p.varsigma, size, risk);
        else
          out.print("{:.12g},{},{},{},{:.12g}\n", p.varsigma, size, risk, n, sum / n);
      }
  }
}

}  // namespace qsize
