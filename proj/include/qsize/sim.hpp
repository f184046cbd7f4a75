#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qsize/measures.hpp"

namespace qsize {

enum class Estimator { RaoBlackwell, DirectEvent };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

struct SimConfig {
  long samples = 10000000;
  long burn_in = 100000;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::RaoBlackwell;
};

/// One step of the offered-wait sequence for the customer who found `xi`.
struct SimStep {
  double xi;  // offered wait found on arrival
  double s;   // service requirement
  double y;   // patience
};

/// Iterates xi' = [min(xi + s, max(y, xi)) - t]^+ from xi = 0 and calls
/// `visit` for each post-burn-in step. Deterministic given the seed.
void simulate_chain(const QueueSpec& queue, double mu, const SimConfig& cfg,
                    const std::function<void(const SimStep&)>& visit);

/// Post-burn-in offered waits.
std::vector<double> simulate_chain(const QueueSpec& queue, double mu, const SimConfig& cfg);

struct SimEstimate {
  std::string measure;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci95_lo = 0.0, ci95_hi = 0.0;
  double ci99_lo = 0.0, ci99_hi = 0.0;
  long samples = 0;
  long batches = 0;
};

/// Per-sample contribution of a measure under the chosen estimator.
/// Rao-Blackwell uses g(xi, mu); direct-event uses the raw outcome of (s, y).
double sample_value(const MeasureKind& kind, const QueueSpec& queue, double mu, Estimator est,
                    const SimStep& step);

/// Streams the chain and forms batch-means estimates with ceil(sqrt(n))
/// batches. Throws OutOfDomain when fewer than 1000 samples are requested.
std::vector<SimEstimate> simulate_measures(const QueueSpec& queue, double mu, const std::vector<MeasureKind>& kinds,
                                           const SimConfig& cfg);

/// Batch-means estimate from stored per-sample values.
SimEstimate batch_means(const std::vector<double>& values, const std::string& measure);

}  // namespace qsize
