#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qsize/quadrature.hpp"
#include "qsize/queue.hpp"

namespace qsize {

/// Finite-state approximation of the offered-waiting-time chain on the grid
/// c_i = i * ybar / 2^r, i = 0..2^r (0-based here).
struct FiniteChain {
  int r = 0;
  double y_bar = 0.0;
  double mu = 0.0;
  std::vector<double> states;
  Eigen::MatrixXd Q;  // row-stochastic, J x J

  int size() const { return static_cast<int>(states.size()); }
};

enum class StationaryMethod { DirectSolve, PowerIteration };

std::string to_string(StationaryMethod m);

struct StationaryVector {
  Eigen::VectorXd v;
  double residual = 0.0;  // ||Q^T v - v||_inf
  StationaryMethod method = StationaryMethod::DirectSolve;
  long iterations = 0;
};

/// Builds Q^(r)(mu). Rows are evaluated in parallel.
FiniteChain build_chain(const QueueSpec& queue, double mu, int r, const QuadOptions& quad = {});

/// Wraps an explicit row-stochastic matrix on the given states.
FiniteChain chain_from_matrix(Eigen::MatrixXd Q, std::vector<double> states, double mu = 0.0);

/// Default tolerances: 1e-10 for DirectSolve, 1e-12 for PowerIteration.
/// PowerIteration takes up to 2J single steps of Q^T, then squares Q^T to
/// advance in doubling jumps; `max_iters` and `iterations` count products
/// with v, one per step or jump.
/// Throws NotConverged, SingularSystem.
StationaryVector stationary_vector(const FiniteChain& chain,
                                   StationaryMethod method = StationaryMethod::DirectSolve,
                                   double tol = -1.0, long max_iters = 1000000,
                                   const Eigen::VectorXd* v0 = nullptr);

/// Step-function CDF sum_i 1{x >= c_i} v_i.
double stationary_distribution(const StationaryVector& v, const FiniteChain& chain, double x);

/// delta(eps) = P[t - s >= eps] for an arrival gap t and an exponential service s.
double ergodicity_delta(const QueueSpec& queue, double mu, double eps);

struct ErgodicityProbe {
  int r_star;    // smallest r whose grid step passes the probe
  double delta;  // probed delta at that step
};

/// Smallest r >= 0 with delta(ybar / 2^r) > 1e-6.
ErgodicityProbe probe_ergodicity(const QueueSpec& queue, double mu);

/// Writes Q (one row per line) followed by a "v" row.
void dump_chain_csv(const FiniteChain& chain, const StationaryVector& v, const std::string& path);

}  // namespace qsize
