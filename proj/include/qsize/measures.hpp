#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qsize/chain.hpp"
#include "qsize/queue.hpp"

namespace qsize {

/// Piecewise-linear h on a sorted grid, held constant outside it.
struct CustomTable {
  std::vector<double> xi;
  std::vector<double> value;
  std::string source;  // csv path, empty when given inline

  double eval(double x) const;
  bool finite() const;
};

CustomTable load_custom_csv(const std::string& path);

enum class MeasureType { OfferedSojourn, AbandonmentProb, TailWait, AvgQueueLength, Custom };

struct MeasureKind {
  MeasureType type = MeasureType::OfferedSojourn;
  double threshold = 0.0;                     // TailWait
  std::shared_ptr<const CustomTable> table;  // Custom

  static MeasureKind of(MeasureType t) {
    MeasureKind m;
    m.type = t;
    return m;
  }
  static MeasureKind sojourn() { return of(MeasureType::OfferedSojourn); }
  static MeasureKind abandonment() { return of(MeasureType::AbandonmentProb); }
  static MeasureKind tail_wait(double threshold);
  static MeasureKind queue_length() { return of(MeasureType::AvgQueueLength); }
  static MeasureKind custom(CustomTable table);

  /// Short identifier used in CSV output.
  std::string name() const;
};

/// g(xi, mu): expected value of the measure for a customer who finds offered
/// wait xi, averaged over its exponential service time.
double g_eval(const MeasureKind& kind, const QueueSpec& queue, double xi, double mu);

/// sum_i g(c_i, mu) v_i in state order.
double expected_measure(const MeasureKind& kind, const QueueSpec& queue, const FiniteChain& chain,
                        const StationaryVector& v);

struct VariationReport {
  double tv;            // total variation in xi on [0, ybar], maximized over mu
  double lipschitz_mu;  // finite-difference Lipschitz constant in mu
};

/// Numeric total variation (10^4-point grid) and Lipschitz-in-mu estimate over
/// [mu_lo, mu_hi]. Throws UnboundedVariation for non-finite custom tables.
VariationReport validate_assumption23(const MeasureKind& kind, const QueueSpec& queue, double mu_lo,
                                      double mu_hi);

nlohmann::json to_json(const MeasureKind& m);
MeasureKind measure_from_json(const nlohmann::json& j);

}  // namespace qsize
