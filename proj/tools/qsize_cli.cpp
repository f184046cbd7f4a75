// qsize: capacity sizing for parallel GI/MI/1+GI_S queues.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <fmt/os.h>

#include "CLI11.hpp"
#include "qsize/bounds.hpp"
#include "qsize/config.hpp"
#include "qsize/errors.hpp"
#include "qsize/fluid.hpp"
#include "qsize/parallel.hpp"

namespace fs = std::filesystem;
using namespace qsize;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<int> r;
  std::optional<int> knots;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool dump_chain = false;
  bool allow_large_r = false;
  std::string samples;
};

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorKind::Usage, "Io", "cannot create output directory '" + o.out + "'");
  const fs::path probe = dir / ".qsize_write_probe";
  {
    std::ofstream t(probe);
    if (!t) throw Error(ErrorKind::Usage, "Io", "output directory '" + o.out + "' is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

Config load(const Options& o, bool require_admissible = true) {
  if (o.config.empty()) throw Error(ErrorKind::Usage, "Usage", "--config is required");
  Config c = load_config(o.config, require_admissible);
  if (o.r) c.r = *o.r;
  if (o.seed) c.simulation.seed = *o.seed;
  return c;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::Usage, "Io", "cannot write '" + path.string() + "'");
}

std::string num(double v) { return fmt::format("{:.12g}", v); }

// --------------------------------------------------------------- evaluate

int cmd_evaluate(const Options& o) {
  const Config c = load(o);
  const fs::path dir = prepare_out(o);
  const std::size_t K = c.queues.size();
  std::vector<std::vector<double>> values(K);
  // Queues in parallel; the chain build inside runs inline.
  parallel_for(K, [&](std::size_t k) {
    const FiniteChain chain = build_chain(c.queues[k], c.mu(k), c.r);
    const StationaryVector v = stationary_vector(chain);
    for (const MeasureKind& m : c.measures) values[k].push_back(expected_measure(m, c.queues[k], chain, v));
    if (o.dump_chain) dump_chain_csv(chain, v, (dir / ("chain_" + c.queues[k].id + ".csv")).string());
  });
  auto out = fmt::output_file((dir / "evaluate.csv").string());
  out.print("queue_id,measure,method,value,stderr,rel_error\n");
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < c.measures.size(); ++l)
      out.print("{},{},finite,{},,\n", c.queues[k].id, c.measures[l].name(), num(values[k][l]));
  return 0;
}

// --------------------------------------------------------------- simulate

std::vector<std::vector<SimEstimate>> simulate_all(const Config& c) {
  std::vector<std::vector<SimEstimate>> est(c.queues.size());
  parallel_for(c.queues.size(), [&](std::size_t k) {
    SimConfig cfg;
    cfg.samples = c.simulation.samples;
    cfg.burn_in = c.simulation.burn_in;
    cfg.estimator = c.simulation.estimator;
    cfg.seed = derive_seed(c.simulation.seed, k);
    est[k] = simulate_measures(c.queues[k], c.mu(k), c.measures, cfg);
  });
  return est;
}

int cmd_simulate(const Options& o) {
  const Config c = load(o, /*require_admissible=*/false);
  const fs::path dir = prepare_out(o);
  const auto est = simulate_all(c);
  auto out = fmt::output_file((dir / "simulate.csv").string());
  out.print("queue_id,measure,method,value,stderr,rel_error,ci95_lo,ci95_hi,ci99_lo,ci99_hi\n");
  for (std::size_t k = 0; k < c.queues.size(); ++k)
    for (const SimEstimate& e : est[k])
      out.print("{},{},sim_{},{},{},,{},{},{},{}\n", c.queues[k].id, e.measure, to_string(c.simulation.estimator),
                num(e.estimate), num(e.std_error), num(e.ci95_lo), num(e.ci95_hi), num(e.ci99_lo), num(e.ci99_hi));
  return 0;
}

// --------------------------------------------------------------- optimize

int cmd_optimize(const Options& o) {
  const Config c = load(o);
  if (!c.optimization) throw SchemaError(0, "optimization", "the optimize command needs an optimization section");
  const OptimizationSection& s = *c.optimization;
  const fs::path dir = prepare_out(o);
  const int knots = o.knots.value_or(s.knots);
  const double eps = o.epsilon.value_or(s.epsilon);
  SizingProblem p = s.kind == Template::Generic
                        ? build_generic_model(c.queues, c.measures, s.cost, s.coupling, s.rhs, s.mu_min, s.mu_max,
                                              knots, c.r, eps)
                        : build_equity_model(c.queues, s.kind, *s.varsigma, s.mu_total, s.theta_lower,
                                             s.theta_upper, knots, c.r, eps, s.mu_min, s.mu_max);
  if (s.kind == Template::Generic) p.mu_total = s.mu_total;
  p.node_limit = s.node_limit;
  p.knot_restricted = s.knot_restricted;
  const Solution sol = run_algorithm1(p);
  nlohmann::json j = to_json(sol, p);
  if (s.r_check) j["verification"] = to_json(verify_epsilon_optimality(sol, p, *s.r_check));
  write_json(dir / "solution.json", j);
  write_solution_csv(sol, p, (dir / "solution.csv").string());
  return 0;
}

// ------------------------------------------------------------------ bound

int cmd_bound(const Options& o) {
  const Config c = load(o);
  const fs::path dir = prepare_out(o);
  const int r = o.r.value_or(c.bound.r);
  BoundOptions opts;
  opts.allow_large_r = o.allow_large_r || c.bound.allow_large_r;
  nlohmann::json reports = nlohmann::json::array();
  for (std::size_t k = 0; k < c.queues.size(); ++k)
    for (const MeasureKind& m : c.measures) {
      nlohmann::json j = to_json(error_bound(c.queues[k], m, c.mu(k), r, opts));
      j["queue_id"] = c.queues[k].id;
      j["measure"] = m.name();
      reports.push_back(j);
    }
  write_json(dir / "bound.json", reports);
  return 0;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const Options& o) {
  const Config c = load(o);
  const fs::path dir = prepare_out(o);
  const std::size_t K = c.queues.size();
  std::vector<std::vector<double>> finite(K), fluid(K);
  parallel_for(K, [&](std::size_t k) {
    finite[k] = finite_measures(c.queues[k], c.measures, c.mu(k), c.r);
    fluid[k] = fluid_measures(c.queues[k], c.mu(k), c.measures);
  });
  const auto sim = simulate_all(c);
  auto out = fmt::output_file((dir / "compare.csv").string());
  out.print("queue_id,measure,method,value,stderr,rel_error\n");
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < c.measures.size(); ++l) {
      const std::string& id = c.queues[k].id;
      const std::string m = c.measures[l].name();
      const double ref = sim[k][l].estimate;
      auto rel = [&](double v) {
        return std::abs(ref) < 1e-12 ? num(std::abs(v - ref)) + " (absolute)" : num(std::abs(v - ref) / std::abs(ref));
      };
      out.print("{},{},sim,{},{},\n", id, m, num(ref), num(sim[k][l].std_error));
      out.print("{},{},finite,{},,{}\n", id, m, num(finite[k][l]), rel(finite[k][l]));
      out.print("{},{},fluid,{},,{}\n", id, m, num(fluid[k][l]), rel(fluid[k][l]));
      out.print("{},{},diffusion,,,\n", id, m);
    }
  return 0;
}

// -------------------------------------------------------------------- fit

int cmd_fit(const Options& o) {
  std::vector<double> samples;
  if (!o.samples.empty()) {
    samples = load_samples_csv(o.samples);
  } else {
    const Config c = load(o, false);
    if (!c.fit) throw SchemaError(0, "fit", "the fit command needs --samples or a fit section");
    samples = c.fit->samples_csv.empty() ? c.fit->samples : load_samples_csv(c.fit->samples_csv);
  }
  const fs::path dir = prepare_out(o);
  std::sort(samples.begin(), samples.end());
  const SampleMoments m = sample_moments(samples);
  nlohmann::json j{{"n", samples.size()}, {"mean", m.mean}, {"scv", m.scv}};
  const ArrivalDist ex = fit_exponential(samples);
  const KsResult kex = ks_statistic(samples, ex);
  j["exponential"] = {{"dist", to_json(ex)}, {"ks_d", kex.d}, {"ks_p", kex.p_asymptotic}};
  try {
    const ArrivalDist h2 = fit_hyperexp2(samples);
    const KsResult kh = ks_statistic(samples, h2);
    j["hyperexp2"] = {{"dist", to_json(h2)}, {"ks_d", kh.d}, {"ks_p", kh.p_asymptotic}};
  } catch (const Error& e) {
    if (e.code() != "ScvBelowOne") throw;
    j["hyperexp2"] = {{"error", e.code()}, {"message", e.what()}};
  }
  write_json(dir / "fit.json", j);
  return 0;
}

// ------------------------------------------------------------------ study

int cmd_study(const Options& o) {
  Config c = load(o);
  if (!c.study) throw SchemaError(0, "study", "the study command needs a study section");
  StudySection s = *c.study;
  if (o.seed) s.gen.seed = *o.seed;
  if (o.r) s.r = *o.r;
  if (o.knots) s.knots = *o.knots;
  if (o.epsilon) s.epsilon = *o.epsilon;
  const fs::path dir = prepare_out(o);

  switch (s.kind) {
    case StudyKind::EvalError: {
      EvalErrorSpec spec;
      spec.gen = s.gen;
      spec.r = s.r.value_or(12);
      spec.sim_samples = s.sim_samples;
      spec.burn_in = s.burn_in;
      spec.service_ratio = c.service_ratio;
      const EvalErrorResult r =
          c.queues.empty() ? run_eval_error_study(spec) : run_eval_error_study(c.queues, spec);
      write_eval_csv(r.rows, (dir / "eval_error.csv").string());
      write_band_csv(band_table(r), (dir / "eval_bands.csv").string());
      write_queue_summary_csv(r.queues, (dir / "eval_queues.csv").string());
      write_json(dir / "eval_timing.json", {{"finite_seconds", r.finite_seconds}, {"sim_seconds", r.sim_seconds}});
      return 0;
    }
    case StudyKind::EquityFrontier:
    case StudyKind::ClusterAnalysis: {
      FrontierSpec spec;
      spec.gen = s.gen;
      spec.kind = s.objective;
      spec.varsigma = s.varsigma;
      spec.fractions = s.fractions;
      spec.r = s.r.value_or(8);
      spec.knots = s.knots;
      spec.epsilon = s.epsilon;
      if (s.kind == StudyKind::ClusterAnalysis && spec.varsigma.empty()) spec.fractions = {spec.fractions.back()};
      const FrontierResult r = c.queues.empty() ? run_equity_frontier(spec) : run_equity_frontier(c.queues, spec);
      if (s.kind == StudyKind::EquityFrontier) write_frontier_csv(r, (dir / "frontier.csv").string());
      write_allocation_csv(r, (dir / "allocation.csv").string());
      write_cluster_csv(r, (dir / "clusters.csv").string());
      return 0;
    }
    case StudyKind::MarkovianSimplification: {
      MarkovianSpec spec;
      spec.p_weights = s.p_weights;
      spec.r = s.r.value_or(10);
      spec.service_ratio = c.service_ratio;
      write_markovian_csv(run_markovian_simplification_study(spec), (dir / "markovian.csv").string());
      return 0;
    }
  }
  return 0;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
      return "usage";
    case ErrorKind::Schema:
      return "schema";
    case ErrorKind::Inadmissible:
      return "inadmissible";
    case ErrorKind::Infeasible:
      return "infeasible";
    case ErrorKind::Numerical:
      return "numerical";
    case ErrorKind::Domain:
      return "domain";
  }
  return "?";
}

void diagnose(const char* kind, const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"kind", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity sizing for parallel single-server queues with abandonment"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "Random seed override");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Cmd cmds[] = {
      {"evaluate", "Finite-approximation measures per queue", cmd_evaluate},
      {"simulate", "Monte Carlo estimates with batch-means intervals", cmd_simulate},
      {"optimize", "Solve a capacity-sizing model", cmd_optimize},
      {"bound", "Deterministic error bound per queue and measure", cmd_bound},
      {"compare", "Finite approximation, fluid and simulation side by side", cmd_compare},
      {"fit", "Fit exponential and H2 laws to samples with KS distances", cmd_fit},
      {"study", "Run a configured experiment pipeline", cmd_study},
  };
  int (*selected)(const Options&) = nullptr;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    const std::string name = c.name;
    if (name != "simulate" && name != "fit") sub->add_option("--r", o.r, "Approximation order")->check(CLI::Range(1, 14));
    if (name == "optimize" || name == "study") {
      sub->add_option("--knots", o.knots, "PWL knot count")->check(CLI::Range(2, 1000));
      sub->add_option("--epsilon", o.epsilon, "Constraint relaxation")->check(CLI::PositiveNumber);
    }
    if (name == "evaluate") sub->add_flag("--dump-chain", o.dump_chain, "Write each transition matrix to CSV");
    if (name == "bound") sub->add_flag("--allow-large-r", o.allow_large_r, "Permit r > 8");
    if (name == "fit") sub->add_option("--samples", o.samples, "CSV of samples, first column");
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnose("usage", "Usage", e.what());
    return 1;
  }

  try {
    set_thread_count(o.threads);
    return selected(o);
  } catch (const Error& e) {
    diagnose(kind_name(e.kind()), e.code(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    diagnose("numerical", "InternalError", e.what());
    return 3;
  }
}
