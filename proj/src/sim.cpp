#include "qsize/sim.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "qsize/errors.hpp"

namespace qsize {

std::string to_string(Estimator e) { return e == Estimator::RaoBlackwell ? "rao_blackwell" : "direct_event"; }

Estimator estimator_from_string(const std::string& s) {
  if (s == "rao_blackwell") return Estimator::RaoBlackwell;
  if (s == "direct_event") return Estimator::DirectEvent;
  throw SchemaError(0, "estimator", "expected 'rao_blackwell' or 'direct_event', got '" + s + "'");
}

void simulate_chain(const QueueSpec& queue, double mu, const SimConfig& cfg,
                    const std::function<void(const SimStep&)>& visit) {
  if (cfg.samples < 1 || cfg.burn_in < 0) throw domain_error("OutOfDomain", "need samples >= 1 and burn_in >= 0");
  if (!(mu > 0.0)) throw domain_error("OutOfDomain", "service rate must be positive");
  Rng rng(cfg.seed);
  const ServiceDist service{mu};
  double xi = 0.0;
  const long total = cfg.burn_in + cfg.samples;
  for (long n = 0; n < total; ++n) {
    const double s = service.sample(rng);
    const double y = queue.patience.sample(rng);
    const double t = queue.arrival.sample(rng);
    if (n >= cfg.burn_in) visit({xi, s, y});
    xi = std::max(std::min(xi + s, std::max(y, xi)) - t, 0.0);
  }
}

std::vector<double> simulate_chain(const QueueSpec& queue, double mu, const SimConfig& cfg) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg.samples));
  simulate_chain(queue, mu, cfg, [&](const SimStep& st) { out.push_back(st.xi); });
  return out;
}

double sample_value(const MeasureKind& kind, const QueueSpec& queue, double mu, Estimator est,
                    const SimStep& st) {
  if (est == Estimator::RaoBlackwell) return g_eval(kind, queue, st.xi, mu);
  const double reach = st.xi + st.s;
  switch (kind.type) {
    case MeasureType::OfferedSojourn:
      return reach;
    case MeasureType::AbandonmentProb:
      return st.y <= reach ? 1.0 : 0.0;
    case MeasureType::TailWait:
      return reach >= kind.threshold ? 1.0 : 0.0;
    case MeasureType::AvgQueueLength:
      return queue.lambda() * std::min(st.y, reach);
    case MeasureType::Custom:
      return kind.table->eval(std::min(reach, queue.y_bar()));
  }
  return 0.0;
}

namespace {

// Running mean and sum of squared deviations. A constant stream keeps its
// mean exactly.
struct Welford {
  long n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
};

SimEstimate finish(const std::string& measure, const Welford& all, const Welford& batches) {
  SimEstimate e;
  e.measure = measure;
  e.estimate = all.mean;
  e.samples = all.n;
  e.batches = batches.n;
  const double var = batches.n > 1 ? batches.m2 / (batches.n - 1) : 0.0;
  e.std_error = std::sqrt(var / batches.n);
  const double df = static_cast<double>(std::max(1L, batches.n - 1));
  const boost::math::students_t t(df);
  const double q95 = boost::math::quantile(t, 0.975), q99 = boost::math::quantile(t, 0.995);
  e.ci95_lo = e.estimate - q95 * e.std_error;
  e.ci95_hi = e.estimate + q95 * e.std_error;
  e.ci99_lo = e.estimate - q99 * e.std_error;
  e.ci99_hi = e.estimate + q99 * e.std_error;
  return e;
}

long batch_count(long n) { return static_cast<long>(std::ceil(std::sqrt(static_cast<double>(n)))); }

// First sample index of batch b when n samples are split into nb batches.
long batch_start(long b, long n, long nb) { return static_cast<long>((static_cast<__int128>(b) * n) / nb); }

}  // namespace

std::vector<SimEstimate> simulate_measures(const QueueSpec& queue, double mu, const std::vector<MeasureKind>& kinds,
                                           const SimConfig& cfg) {
  if (cfg.samples < 1000)
    throw domain_error("OutOfDomain", fmt::format("need at least 1000 samples, got {}", cfg.samples));
  const std::size_t L = kinds.size();
  const long n = cfg.samples, nb = batch_count(n);
  std::vector<Welford> all(L), batches(L), current(L);
  long i = 0, b = 0, next = batch_start(1, n, nb);
  simulate_chain(queue, mu, cfg, [&](const SimStep& st) {
    for (std::size_t l = 0; l < L; ++l) {
      const double v = sample_value(kinds[l], queue, mu, cfg.estimator, st);
      all[l].add(v);
      current[l].add(v);
    }
    if (++i == next) {
      for (std::size_t l = 0; l < L; ++l) {
        batches[l].add(current[l].mean);
        current[l] = {};
      }
      ++b;
      next = batch_start(b + 1, n, nb);
    }
  });
  std::vector<SimEstimate> out;
  for (std::size_t l = 0; l < L; ++l) out.push_back(finish(kinds[l].name(), all[l], batches[l]));
  return out;
}

SimEstimate batch_means(const std::vector<double>& values, const std::string& measure) {
  const long n = static_cast<long>(values.size());
  if (n < 1) throw domain_error("OutOfDomain", "batch means need at least one sample");
  const long nb = batch_count(n);
  Welford all, batches;
  for (long b = 0; b < nb; ++b) {
    Welford cur;
    for (long k = batch_start(b, n, nb); k < batch_start(b + 1, n, nb); ++k) {
      cur.add(values[k]);
      all.add(values[k]);
    }
    if (cur.n > 0) batches.add(cur.mean);
  }
  return finish(measure, all, batches);
}

}  // namespace qsize
