#pragma once

#include <random>
#include <string>
#include <vector>

#include "qsize/queue.hpp"
#include "qsize/studies.hpp"

namespace qtest {

inline qsize::QueueSpec make_queue(qsize::ArrivalDist a, qsize::PatienceDist g, std::string id = "q") {
  return qsize::QueueSpec{std::move(id), std::move(a), std::move(g), {}};
}

inline qsize::QueueSpec exp_point_mass(double rate, double bound) {
  return make_queue(qsize::ArrivalDist(qsize::Exponential{rate}), qsize::PatienceDist(qsize::PointMass{bound}));
}

/// Small-horizon queue so that low orders already resolve the grid.
inline qsize::QueueSpec small_queue(double lambda, double y_bar, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scv = 1.0 + 2.0 * u(rng);
  const double m = (0.2 + 0.6 * u(rng)) * y_bar;
  return qsize::QueueSpec{"s" + std::to_string(seed), qsize::moment_match_hyperexp2(1.0 / lambda, scv),
                          qsize::PatienceDist(qsize::TruncatedMixtureExponential{{0.5, 0.5}, {2.0 / m, 0.5 / m}, y_bar}),
                          {}};
}

/// Synthetic queues with the default generator ranges.
inline std::vector<qsize::QueueSpec> synthetic(int count, std::uint64_t seed) {
  qsize::GeneratorSpec g;
  g.count = count;
  g.seed = seed;
  return qsize::generate_queues(g);
}

}  // namespace qtest
