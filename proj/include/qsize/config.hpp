#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsize/optimizer.hpp"
#include "qsize/sim.hpp"
#include "qsize/studies.hpp"

namespace qsize {

struct SimulationSection {
  long samples = 1000000;
  long burn_in = 100000;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::RaoBlackwell;
};

struct OptimizationSection {
  Template kind = Template::EquityOST;
  std::optional<double> varsigma;
  std::optional<double> mu_total;
  double theta_lower = 0.65, theta_upper = 0.95;
  int knots = 7;
  double epsilon = 1e-3;
  double mu_min = 0.0, mu_max = kInf;
  std::vector<double> cost;
  std::vector<std::vector<double>> coupling;
  std::vector<double> rhs;
  long node_limit = 200000;
  bool knot_restricted = false;
  std::optional<int> r_check;
};

enum class StudyKind { EvalError, EquityFrontier, ClusterAnalysis, MarkovianSimplification };

std::string to_string(StudyKind k);

struct StudySection {
  StudyKind kind = StudyKind::EvalError;
  GeneratorSpec gen;
  std::optional<int> r;
  long sim_samples = 10000000;
  long burn_in = 100000;
  Template objective = Template::EquityOST;
  std::vector<double> varsigma;
  std::vector<double> fractions{0.1, 0.4, 0.7, 1.0};
  std::vector<double> p_weights{0.1, 0.3, 0.5, 0.7, 0.9};
  int knots = 7;
  double epsilon = 1e-3;
};

struct BoundSection {
  int r = 7;
  bool allow_large_r = false;
};

struct FitSection {
  std::string samples_csv;      // one value per line, '#' comments
  std::vector<double> samples;  // inline alternative
};

/// Typed contents of a configuration file. Every section is optional.
struct Config {
  std::vector<QueueSpec> queues;
  std::vector<std::optional<double>> queue_mu;  // per queue
  std::vector<MeasureKind> measures{MeasureKind::sojourn(), MeasureKind::abandonment()};
  double service_ratio = 0.879;
  int r = 12;
  SimulationSection simulation;
  std::optional<OptimizationSection> optimization;
  std::optional<StudySection> study;
  BoundSection bound;
  std::optional<FitSection> fit;

  /// Service rate of queue k: explicit mu, else service_ratio * lambda.
  double mu(std::size_t k) const;
};

/// Parses and validates; unknown keys are rejected. Schema and parse errors
/// carry the line of the offending key. With `require_admissible`, queues
/// outside the finite-approximation class raise Inadmissible.
Config parse_config(const std::string& text, bool require_admissible = true);
Config load_config(const std::string& path, bool require_admissible = true);

nlohmann::json to_json(const Config& c);

/// JSON pointer of every key and array element mapped to its 1-based line.
std::map<std::string, int> json_line_index(const std::string& text);

/// Rows of numbers from a CSV file (header and '#' lines skipped); first column.
std::vector<double> load_samples_csv(const std::string& path);

}  // namespace qsize
