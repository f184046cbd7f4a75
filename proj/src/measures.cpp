#include "qsize/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "qsize/errors.hpp"

namespace qsize {

// ------------------------------------------------------------------ tables

double CustomTable::eval(double x) const {
  if (x <= xi.front()) return value.front();
  if (x >= xi.back()) return value.back();
  const auto it = std::upper_bound(xi.begin(), xi.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xi.begin());
  const double t = (x - xi[k - 1]) / (xi[k] - xi[k - 1]);
  return value[k - 1] + t * (value[k] - value[k - 1]);
}

bool CustomTable::finite() const {
  return std::all_of(value.begin(), value.end(), [](double v) { return std::isfinite(v); }) &&
         std::all_of(xi.begin(), xi.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_table(const CustomTable& t) {
  if (t.xi.empty() || t.xi.size() != t.value.size())
    throw SchemaError(0, "table", "custom table needs at least one (xi, value) row");
  for (std::size_t i = 1; i < t.xi.size(); ++i)
    if (!(t.xi[i] > t.xi[i - 1])) throw SchemaError(0, "table", "custom table xi must be strictly increasing");
}

}  // namespace

CustomTable load_custom_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(0, "csv", "cannot open custom table '" + path + "'");
  CustomTable t;
  t.source = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double x, v;
    if (!(ss >> x >> v)) {
      if (lineno == 1) continue;  // header
      throw SchemaError(lineno, "csv", "expected two numbers per row in '" + path + "'");
    }
    t.xi.push_back(x);
    t.value.push_back(v);
  }
  check_table(t);
  return t;
}

MeasureKind MeasureKind::tail_wait(double threshold) {
  if (!(threshold >= 0.0)) throw SchemaError(0, "threshold", "tail-wait threshold must be >= 0");
  MeasureKind m = of(MeasureType::TailWait);
  m.threshold = threshold;
  return m;
}

MeasureKind MeasureKind::custom(CustomTable table) {
  check_table(table);
  MeasureKind m = of(MeasureType::Custom);
  m.table = std::make_shared<const CustomTable>(std::move(table));
  return m;
}

std::string MeasureKind::name() const {
  switch (type) {
    case MeasureType::OfferedSojourn:
      return "sojourn";
    case MeasureType::AbandonmentProb:
      return "abandonment";
    case MeasureType::TailWait:
      return "tail_wait";
    case MeasureType::AvgQueueLength:
      return "queue_length";
    case MeasureType::Custom:
      return "custom";
  }
  return "unknown";
}

// ------------------------------------------------------------------ g

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// int_0^d mu e^{-mu s} P[y > xi + s] ds
double survival_average(const PatienceDist& g, double xi, double d, double mu) {
  const double tail = std::exp(-mu * d);
  return std::visit(overloaded{
                        [&](const TruncatedMixtureExponential& p) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < p.weights.size(); ++i) {
                            const double th = p.rates[i];
                            s += p.weights[i] * std::exp(-th * xi) * mu / (mu + th) *
                                 -std::expm1(-(mu + th) * d);
                          }
                          return s;
                        },
                        [&](const UniformPatience& p) {
                          // (d/ybar)(1 - e^{-mu d}) - (1/ybar) int_0^d mu s e^{-mu s} ds
                          const double x = mu * d;
                          const double first_moment = (-std::expm1(-x) - x * tail) / mu;
                          return (d * -std::expm1(-x) - first_moment) / p.bound;
                        },
                        [&](const PointMass&) { return -std::expm1(-mu * d); },
                    },
                    g.variant());
}

// int_0^d e^{-mu s} P[y > xi + s] ds + int_0^xi P[y > z] dz
double truncated_patience_mean(const PatienceDist& g, double xi, double d, double mu) {
  return std::visit(overloaded{
                        [&](const TruncatedMixtureExponential& p) {
                          double s = 0.0;
                          for (std::size_t i = 0; i < p.weights.size(); ++i) {
                            const double th = p.rates[i];
                            s += p.weights[i] * -std::expm1(-th * xi) / th;
                            s += p.weights[i] * std::exp(-th * xi) * -std::expm1(-(mu + th) * d) / (mu + th);
                          }
                          return s;
                        },
                        [&](const UniformPatience& p) {
                          const double x = mu * d;
                          return xi - xi * xi / (2.0 * p.bound) + (x + std::expm1(-x)) / (p.bound * mu * mu);
                        },
                        [&](const PointMass&) { return xi - std::expm1(-mu * d) / mu; },
                    },
                    g.variant());
}

// h(ybar) + int_0^d mu e^{-mu s} (h(xi+s) - h(ybar)) ds, exact for piecewise-linear h.
double custom_average(const CustomTable& t, double xi, double y_bar, double mu) {
  const double h_end = t.eval(y_bar);
  std::vector<double> cuts{xi};
  for (double x : t.xi)
    if (x > xi && x < y_bar) cuts.push_back(x);
  cuts.push_back(y_bar);

  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double za = cuts[k], zb = cuts[k + 1];
    if (!(zb > za)) continue;
    const double ha = t.eval(za);
    const double beta = (t.eval(zb) - ha) / (zb - za);
    const double a = za - xi;
    const double len = mu * (zb - za);
    const double ea = std::exp(-mu * a);
    const double e0 = ea * -std::expm1(-len);
    // int_a^b mu (s - a) e^{-mu s} ds
    const double e1 = ea * (-std::expm1(-len) - len * std::exp(-len)) / mu;
    sum += (ha - h_end) * e0 + beta * e1;
  }
  return h_end + sum;
}

}  // namespace

double g_eval(const MeasureKind& kind, const QueueSpec& queue, double xi, double mu) {
  const double y_bar = queue.y_bar();
  xi = std::clamp(xi, 0.0, y_bar);
  const double d = y_bar - xi;
  switch (kind.type) {
    case MeasureType::OfferedSojourn:
      return xi + 1.0 / mu;
    case MeasureType::AbandonmentProb:
      return std::clamp(1.0 - survival_average(queue.patience, xi, d, mu), 0.0, 1.0);
    case MeasureType::TailWait:
      return std::exp(-mu * std::max(kind.threshold - xi, 0.0));
    case MeasureType::AvgQueueLength:
      return queue.lambda() * truncated_patience_mean(queue.patience, xi, d, mu);
    case MeasureType::Custom:
      return custom_average(*kind.table, xi, y_bar, mu);
  }
  return 0.0;
}

double expected_measure(const MeasureKind& kind, const QueueSpec& queue, const FiniteChain& chain,
                        const StationaryVector& v) {
  double s = 0.0;
  for (int i = 0; i < chain.size(); ++i) s += g_eval(kind, queue, chain.states[i], chain.mu) * v.v(i);
  return s;
}

VariationReport validate_assumption23(const MeasureKind& kind, const QueueSpec& queue, double mu_lo,
                                      double mu_hi) {
  if (kind.type == MeasureType::Custom && !kind.table->finite())
    throw domain_error("UnboundedVariation", "custom measure table contains non-finite values");
  if (!(mu_lo > 0.0) || mu_hi < mu_lo) throw domain_error("OutOfDomain", "need 0 < mu_lo <= mu_hi");

  const double y_bar = queue.y_bar();
  const int n_xi = 10000;
  const int n_mu = mu_hi > mu_lo ? 5 : 1;
  double tv = 0.0;
  for (int m = 0; m < n_mu; ++m) {
    const double mu = n_mu == 1 ? mu_lo : mu_lo + (mu_hi - mu_lo) * m / (n_mu - 1);
    double prev = g_eval(kind, queue, 0.0, mu);
    double acc = 0.0;
    for (int k = 1; k < n_xi; ++k) {
      const double g = g_eval(kind, queue, y_bar * k / (n_xi - 1), mu);
      acc += std::abs(g - prev);
      prev = g;
    }
    tv = std::max(tv, acc);
  }

  double lo = mu_lo, hi = mu_hi;
  if (!(hi > lo)) {
    lo = mu_lo * (1.0 - 1e-4);
    hi = mu_lo * (1.0 + 1e-4);
  }
  const int n_lip_mu = 21, n_lip_xi = 101;
  double lip = 0.0;
  for (int k = 0; k < n_lip_xi; ++k) {
    const double xi = y_bar * k / (n_lip_xi - 1);
    double prev = g_eval(kind, queue, xi, lo);
    for (int m = 1; m < n_lip_mu; ++m) {
      const double mu0 = lo + (hi - lo) * (m - 1) / (n_lip_mu - 1);
      const double mu1 = lo + (hi - lo) * m / (n_lip_mu - 1);
      const double g = g_eval(kind, queue, xi, mu1);
      lip = std::max(lip, std::abs(g - prev) / (mu1 - mu0));
      prev = g;
    }
  }
  return {tv, lip};
}

nlohmann::json to_json(const MeasureKind& m) {
  nlohmann::json j{{"type", m.name()}};
  if (m.type == MeasureType::TailWait) j["threshold"] = m.threshold;
  if (m.type == MeasureType::Custom) {
    if (!m.table->source.empty()) {
      j["csv"] = m.table->source;
    } else {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < m.table->xi.size(); ++i) rows.push_back({m.table->xi[i], m.table->value[i]});
      j["table"] = rows;
    }
  }
  return j;
}

MeasureKind measure_from_json(const nlohmann::json& j) {
  if (j.is_string()) return measure_from_json(nlohmann::json{{"type", j}});
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw SchemaError(0, "measures", "measure needs a string 'type'");
  const std::string t = j.at("type").get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        throw SchemaError(0, it.key(), "unknown key");
  };
  if (t == "sojourn") return allow({"type"}), MeasureKind::sojourn();
  if (t == "abandonment") return allow({"type"}), MeasureKind::abandonment();
  if (t == "queue_length") return allow({"type"}), MeasureKind::queue_length();
  if (t == "tail_wait") {
    allow({"type", "threshold"});
    if (!j.contains("threshold") || !j.at("threshold").is_number())
      throw SchemaError(0, "threshold", "tail_wait needs a numeric threshold");
    return MeasureKind::tail_wait(j.at("threshold").get<double>());
  }
  if (t == "custom") {
    allow({"type", "table", "csv"});
    if (j.contains("csv")) {
      if (!j.at("csv").is_string()) throw SchemaError(0, "csv", "expected a path string");
      return MeasureKind::custom(load_custom_csv(j.at("csv").get<std::string>()));
    }
    if (!j.contains("table") || !j.at("table").is_array())
      throw SchemaError(0, "table", "custom measure needs 'table' rows or a 'csv' path");
    CustomTable table;
    for (const auto& row : j.at("table")) {
      if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
        throw SchemaError(0, "table", "table rows must be [xi, value] pairs");
      table.xi.push_back(row[0].get<double>());
      table.value.push_back(row[1].get<double>());
    }
    return MeasureKind::custom(std::move(table));
  }
  throw SchemaError(0, "type", "unknown measure type '" + t + "'");
}

}  // namespace qsize
