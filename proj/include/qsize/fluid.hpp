#pragma once

#include <vector>

#include "qsize/measures.hpp"

namespace qsize {

enum class FluidRegime { Overloaded, Underloaded };

struct FluidResult {
  double w_fluid = 0.0;
  FluidRegime regime = FluidRegime::Underloaded;
};

/// Point mass of the fluid model: the smallest x with G(x) >= 1 - mu/lambda
/// when mu < lambda, else 0.
FluidResult fluid_offered_wait(const QueueSpec& queue, double mu);

/// g(w_fluid, mu) for each kind.
std::vector<double> fluid_measures(const QueueSpec& queue, double mu, const std::vector<MeasureKind>& kinds);

}  // namespace qsize
