#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsize/optimizer.hpp"
#include "qsize/sim.hpp"

namespace qsize {

/// Synthetic queues: log-uniform intensity, balanced H2 arrivals with uniform
/// scv, three-component truncated exponential patience with uniform mean.
struct GeneratorSpec {
  int count = 20;
  std::uint64_t seed = 1;
  double lambda_lo = 5.0, lambda_hi = 50.0;
  double scv_lo = 1.2, scv_hi = 3.0;
  double patience_mean_lo = 0.4, patience_mean_hi = 1.2;
  double y_bar = 25.0;
};

std::vector<QueueSpec> generate_queues(const GeneratorSpec& spec);

/// SplitMix64 of (base, index); independent streams per work item.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Three-component truncated exponential mixture with the given mean.
PatienceDist patience_with_mean(const std::array<double, 3>& weights, const std::array<double, 3>& shape,
                                double mean, double y_bar);

// ------------------------------------------------------------ eval error

inline constexpr std::array<const char*, 5> kErrorBands{"<1%", "1-5%", "5-10%", "10-25%", ">25%"};

/// Band index of a relative error.
int error_band(double rel);

struct EvalErrorSpec {
  GeneratorSpec gen;
  int r = 12;
  long sim_samples = 10000000;
  long burn_in = 100000;
  double service_ratio = 0.879;
};

/// One (queue, measure, method) value. `rel_error` is |value - sim| / |sim|,
/// or the absolute error when |sim| < 1e-12 (then `absolute` is set).
struct EvalRow {
  std::string queue_id;
  std::string measure;
  std::string method;  // finite, fluid, sim, diffusion
  std::optional<double> value;
  std::optional<double> std_error;
  std::optional<double> rel_error;
  bool absolute = false;
};

struct QueueSummary {
  std::string id;
  double lambda, scv, patience_mean, mu;
};

struct EvalErrorResult {
  std::vector<QueueSummary> queues;
  std::vector<EvalRow> rows;
  std::vector<double> finite_seconds;  // per queue, wall time of the finite evaluation
  std::vector<double> sim_seconds;
};

/// Finite approximation at order r, fluid and simulation reference for the
/// sojourn and abandonment measures at mu = service_ratio * lambda.
EvalErrorResult run_eval_error_study(const EvalErrorSpec& spec);
EvalErrorResult run_eval_error_study(const std::vector<QueueSpec>& queues, const EvalErrorSpec& spec);

/// Counts per (measure, method, band) for the finite and fluid methods.
struct BandCount {
  std::string measure, method;
  std::array<int, 5> count{};
  int total = 0;
};
std::vector<BandCount> band_table(const EvalErrorResult& r);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);
void write_band_csv(const std::vector<BandCount>& bands, const std::string& path);
void write_queue_summary_csv(const std::vector<QueueSummary>& q, const std::string& path);

// -------------------------------------------------- Markovian simplification

struct MarkovianSpec {
  std::vector<double> p_weights{0.1, 0.3, 0.5, 0.7, 0.9};
  std::optional<PatienceDist> patience;  // default_markovian_patience()
  int r = 10;
  double service_ratio = 0.879;
};

/// Mixture (0.6, 0.4) with means (0.25, 1.375): mean 0.7, truncated at 25.
PatienceDist default_markovian_patience();

struct MarkovianRow {
  double p, lambda;
  double gi_wait, mm_wait, wait_gap;        // mean offered wait
  double gi_abandon, mm_abandon, abandon_gap;  // P[patience < offered wait]
};

/// Inter-arrival MixExp((p, 1-p), (10, 40)) against Exp at the same
/// intensity with Exp(1/mean) patience truncated at the same bound.
std::vector<MarkovianRow> run_markovian_simplification_study(const MarkovianSpec& spec);

void write_markovian_csv(const std::vector<MarkovianRow>& rows, const std::string& path);

// ---------------------------------------------------------- equity frontier

struct FrontierSpec {
  GeneratorSpec gen{10, 1, 5.0, 50.0, 1.2, 3.0, 0.4, 1.2, 25.0};
  Template kind = Template::EquityOST;
  std::vector<double> varsigma;                  // explicit values, or
  std::vector<double> fractions{0.1, 0.4, 0.7, 1.0};  // positions in [min w_bar, w_bar at box lows]
  std::optional<double> mu_total;
  double theta_lower = 0.65, theta_upper = 0.95;
  int r = 8;
  int knots = 7;
  double epsilon = 1e-3;
  long node_limit = 200000;
};

struct FrontierPoint {
  double varsigma = 0.0;
  bool feasible = false;
  double Z = 0.0, w_bar = 0.0, budget_slack = 0.0;
  long nodes = 0;
  std::vector<double> mu, w;
};

struct FrontierResult {
  std::vector<QueueSpec> queues;
  std::vector<FrontierPoint> points;
  std::vector<std::string> size_cluster, risk_cluster;  // per queue
};

FrontierResult run_equity_frontier(const FrontierSpec& spec);
FrontierResult run_equity_frontier(const std::vector<QueueSpec>& queues, const FrontierSpec& spec);

/// Labels by 33% / 67% quantiles (linear interpolation) of `values`.
std::vector<std::string> tertile_labels(const std::vector<double>& values, const std::array<const char*, 3>& names);

void write_frontier_csv(const FrontierResult& r, const std::string& path);
void write_allocation_csv(const FrontierResult& r, const std::string& path);
/// Mean mu / lambda per (size, risk) cluster for every feasible point.
void write_cluster_csv(const FrontierResult& r, const std::string& path);

}  // namespace qsize
