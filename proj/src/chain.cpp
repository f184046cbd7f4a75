#include "qsize/chain.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/os.h>

#include "qsize/errors.hpp"
#include "qsize/kernel.hpp"
#include "qsize/parallel.hpp"

namespace qsize {

namespace {
constexpr double kClampThreshold = 1e-12;
constexpr double kProbeThreshold = 1e-6;
constexpr int kMaxDoublings = 60;  // jumps up to 2^60 steps
}  // namespace

std::string to_string(StationaryMethod m) {
  return m == StationaryMethod::DirectSolve ? "DirectSolve" : "PowerIteration";
}

FiniteChain build_chain(const QueueSpec& queue, double mu, int r, const QuadOptions& quad) {
  if (r < 1 || r > 14) throw domain_error("OutOfDomain", "approximation order r must be in [1, 14]");
  const KernelContext ctx(queue, mu, quad);
  const int J = (1 << r) + 1;
  const double y_bar = queue.y_bar();
  const double h = y_bar / (1 << r);

  FiniteChain chain;
  chain.r = r;
  chain.y_bar = y_bar;
  chain.mu = mu;
  chain.states.resize(J);
  for (int i = 0; i < J; ++i) chain.states[i] = i * h;
  chain.states[J - 1] = y_bar;
  chain.Q.resize(J, J);

  parallel_for(J, [&](std::size_t i) {
    const double u = chain.states[i];
    double prev = 0.0;
    double row_sum = 0.0;
    for (int j = 0; j < J; ++j) {
      const double tau = (j == J - 1) ? 1.0 : ctx.eval(chain.states[j], u);
      double q = tau - prev;
      prev = tau;
      if (q < 0.0) {
        if (q < -kClampThreshold)
          throw numerical("NegativeTransition",
                          fmt::format("transition ({}, {}) = {:.3e} is below the clamp threshold", i, j, q));
        q = 0.0;
      }
      chain.Q(i, j) = q;
      row_sum += q;
    }
    chain.Q.row(i) /= row_sum;
  });
  return chain;
}

FiniteChain chain_from_matrix(Eigen::MatrixXd Q, std::vector<double> states, double mu) {
  if (Q.rows() != Q.cols() || Q.rows() != static_cast<Eigen::Index>(states.size()))
    throw domain_error("OutOfDomain", "matrix and state grid sizes disagree");
  FiniteChain c;
  c.states = std::move(states);
  c.y_bar = c.states.back();
  c.mu = mu;
  c.Q = std::move(Q);
  return c;
}

StationaryVector stationary_vector(const FiniteChain& chain, StationaryMethod method, double tol,
                                   long max_iters, const Eigen::VectorXd* v0) {
  const Eigen::Index J = chain.Q.rows();
  StationaryVector out;
  out.method = method;

  if (method == StationaryMethod::DirectSolve) {
    if (tol < 0.0) tol = 1e-10;
    Eigen::MatrixXd M = chain.Q.transpose();
    M.diagonal().array() -= 1.0;
    M.row(J - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(J);
    b(J - 1) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    // rcond alone misses exact zero pivots
    const Eigen::VectorXd pivots = lu.matrixLU().diagonal().cwiseAbs();
    const double rcond = std::min(lu.rcond(), pivots.minCoeff() / pivots.maxCoeff());
    if (!(rcond > 1e-14))
      throw numerical("SingularSystem",
                      fmt::format("balance equations are singular (rcond {:.3e}); "
                                  "the stationary vector is not unique at this order",
                                  rcond));
    Eigen::VectorXd v = lu.solve(b);
    v += lu.solve(b - M * v);
    for (Eigen::Index i = 0; i < J; ++i) {
      if (v(i) < -1e-9)
        throw numerical("SingularSystem", fmt::format("direct solve produced v[{}] = {:.3e} < 0", i, v(i)));
      if (v(i) < 0.0) v(i) = 0.0;
    }
    v /= v.sum();
    out.v = std::move(v);
    out.iterations = 1;
  } else {
    if (tol < 0.0) tol = 1e-12;
    Eigen::VectorXd v = v0 ? *v0 : Eigen::VectorXd::Constant(J, 1.0 / J);
    v /= v.sum();
    const Eigen::MatrixXd Qt = chain.Q.transpose();
    Eigen::VectorXd next(J);
    double diff = INFINITY;
    long it = 0;
    // Single steps while they cost less than one squaring, then jumps of
    // 2^k steps with P = (Q^T)^(2^k); diff compares v across each jump.
    const long single = std::min<long>(max_iters, 2L * J);
    while (it < single) {
      next.noalias() = Qt * v;
      next /= next.sum();
      diff = (next - v).cwiseAbs().maxCoeff();
      v.swap(next);
      ++it;
      if (diff <= tol) break;
    }
    if (!(diff <= tol)) {
      Eigen::MatrixXd P = Qt;
      for (int k = 0; k <= kMaxDoublings && it < max_iters; ++k) {
        next.noalias() = P * v;
        next /= next.sum();
        diff = (next - v).cwiseAbs().maxCoeff();
        v.swap(next);
        ++it;
        if (diff <= tol) break;
        P = P * P;
      }
    }
    if (!(diff <= tol))
      throw numerical("NotConverged",
                      fmt::format("power iteration stalled after {} iterations (residual {:.3e})", it, diff));
    out.v = std::move(v);
    out.iterations = it;
  }

  out.residual = (chain.Q.transpose() * out.v - out.v).cwiseAbs().maxCoeff();
  if (!(out.residual <= tol))
    throw numerical("NotConverged", fmt::format("{} residual {:.3e} exceeds tolerance {:.3e}",
                                                to_string(method), out.residual, tol));
  return out;
}

double stationary_distribution(const StationaryVector& v, const FiniteChain& chain, double x) {
  double s = 0.0;
  for (int i = 0; i < chain.size(); ++i)
    if (x >= chain.states[i]) s += v.v(i);
  return std::min(s, 1.0);
}

double ergodicity_delta(const QueueSpec& queue, double mu, double eps) {
  const auto terms = queue.arrival.exp_terms();
  if (!terms.empty()) {
    double s = 0.0;
    for (const ExpTerm& a : terms) s += a.weight * std::exp(-a.rate * eps) * mu / (mu + a.rate);
    return s;
  }
  const ArrivalDist& A = queue.arrival;
  QuadOptions q;
  q.abs_tol = 1e-13;
  return integrate_to_infinity([&](double s) { return mu * std::exp(-mu * s) * A.survival_left(eps + s); },
                               0.0, q);
}

ErgodicityProbe probe_ergodicity(const QueueSpec& queue, double mu) {
  for (int r = 0; r <= 60; ++r) {
    const double delta = ergodicity_delta(queue, mu, std::ldexp(queue.y_bar(), -r));
    if (delta > kProbeThreshold) return {r, delta};
  }
  throw numerical("NotErgodic", "arrival gaps never exceed service times with probability above 1e-6");
}

void dump_chain_csv(const FiniteChain& chain, const StationaryVector& v, const std::string& path) {
  auto out = fmt::output_file(path);
  out.print("state");
  for (double c : chain.states) out.print(",{:.17g}", c);
  out.print("\n");
  for (int i = 0; i < chain.size(); ++i) {
    out.print("{:.17g}", chain.states[i]);
    for (int j = 0; j < chain.size(); ++j) out.print(",{:.17g}", chain.Q(i, j));
    out.print("\n");
  }
  out.print("v");
  for (int i = 0; i < chain.size(); ++i) out.print(",{:.17g}", v.v(i));
  out.print("\n");
}

}  // namespace qsize
