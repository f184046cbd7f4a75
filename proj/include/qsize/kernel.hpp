#pragma once

#include <vector>

#include "qsize/quadrature.hpp"
#include "qsize/queue.hpp"

namespace qsize {

/// Everything the one-step kernel of the offered-waiting-time chain needs.
class KernelContext {
 public:
  KernelContext(const QueueSpec& queue, double mu, QuadOptions quad = {});

  double mu() const { return mu_; }
  double y_bar() const { return y_bar_; }
  bool closed_form() const { return closed_; }

  /// tau(x, u; mu) = P[next offered wait <= x | current offered wait = u].
  double eval(double x, double u) const;

 private:
  double integral_closed(double x, double u, double t0, double t1) const;
  double integral_quadrature(double x, double u, double t0, double t1) const;

  const QueueSpec* queue_;
  double mu_;
  double y_bar_;
  QuadOptions quad_;
  bool closed_;
  std::vector<ErlangTerm> a_terms_;
  std::vector<ExpTerm> g_terms_;
};

inline double kernel_eval(const KernelContext& ctx, double x, double u) { return ctx.eval(x, u); }

}  // namespace qsize
