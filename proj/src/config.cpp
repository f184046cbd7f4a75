#include "qsize/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "qsize/errors.hpp"

namespace qsize {

using nlohmann::json;

std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::EvalError:
      return "eval_error";
    case StudyKind::EquityFrontier:
      return "equity_frontier";
    case StudyKind::ClusterAnalysis:
      return "cluster_analysis";
    case StudyKind::MarkovianSimplification:
      return "markovian";
  }
  return "?";
}

double Config::mu(std::size_t k) const {
  if (k < queue_mu.size() && queue_mu[k]) return *queue_mu[k];
  return service_ratio * queues.at(k).lambda();
}

// ------------------------------------------------------------ line index

namespace {

std::string pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Walks text that is already known to be valid JSON.
struct LineScanner {
  const std::string& t;
  std::map<std::string, int>& out;
  std::size_t i = 0;
  int line = 1;

  void ws() {
    while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) {
      if (t[i] == '\n') ++line;
      ++i;
    }
  }
  std::string str() {
    std::string s;
    ++i;
    while (i < t.size() && t[i] != '"') {
      if (t[i] == '\\') {
        s += t[i + 1];
        i += 2;
        continue;
      }
      s += t[i++];
    }
    ++i;
    return s;
  }
  void value(const std::string& path) {
    ws();
    if (i >= t.size()) return;
    const char c = t[i];
    if (c == '{' || c == '[') {
      const bool object = c == '{';
      ++i;
      ws();
      if (t[i] == (object ? '}' : ']')) {
        ++i;
        return;
      }
      for (int n = 0;; ++n) {
        ws();
        std::string p;
        if (object) {
          const int l = line;
          p = path + "/" + pointer_token(str());
          out.emplace(p, l);
          ws();
          ++i;  // ':'
        } else {
          p = path + "/" + std::to_string(n);
          out.emplace(p, line);
        }
        value(p);
        ws();
        if (t[i++] != ',') return;
      }
    }
    if (c == '"') {
      str();
      return;
    }
    while (i < t.size() && !std::strchr(",]} \t\r\n", t[i])) ++i;
  }
};

}  // namespace

std::map<std::string, int> json_line_index(const std::string& text) {
  std::map<std::string, int> out;
  LineScanner s{text, out};
  out.emplace("", 1);
  s.ws();
  out[""] = s.line;
  s.value("");
  return out;
}

// ------------------------------------------------------------ parsing

namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : lines_(json_line_index(text)) {}

  int line_of(const std::string& path) const {
    std::string p = path;
    for (;;) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      if (p.empty()) return 0;
      p = p.substr(0, p.rfind('/'));
    }
  }

  [[noreturn]] void fail(const std::string& path, const std::string& field, const std::string& msg) const {
    throw SchemaError(line_of(path + "/" + pointer_token(field)), field, msg);
  }

  // Locates an error raised by a nested parser that only knew the field name.
  [[noreturn]] void relocate(const SchemaError& e, const std::string& prefix) const {
    const std::string tail = "/" + pointer_token(e.field());
    int best = 0;
    for (auto it = lines_.lower_bound(prefix); it != lines_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
      const std::string& p = it->first;
      if (p.size() >= tail.size() && p.compare(p.size() - tail.size(), tail.size(), tail) == 0)
        if (best == 0 || it->second < best) best = it->second;
    }
    throw SchemaError(best ? best : line_of(prefix), e.field(), e.message());
  }

  template <class F>
  auto nested(const std::string& prefix, F&& f) const {
    try {
      return f();
    } catch (const SchemaError& e) {
      if (e.line() != 0) throw;
      relocate(e, prefix);
    }
  }

  void allow(const json& j, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!j.is_object()) fail(path, path.empty() ? "config" : path.substr(path.rfind('/') + 1), "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        fail(path, it.key(), "unknown key");
  }

  double num(const json& j, const std::string& path, const char* key) const {
    if (!j.at(key).is_number()) fail(path, key, "expected a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) fail(path, key, "expected a finite number");
    return v;
  }
  double positive(const json& j, const std::string& path, const char* key) const {
    const double v = num(j, path, key);
    if (!(v > 0.0)) fail(path, key, "must be positive");
    return v;
  }
  long integer(const json& j, const std::string& path, const char* key, long lo) const {
    if (!j.at(key).is_number_integer()) fail(path, key, "expected an integer");
    const long v = j.at(key).get<long>();
    if (v < lo) fail(path, key, fmt::format("must be >= {}", lo));
    return v;
  }
  std::uint64_t seed(const json& j, const std::string& path, const char* key) const {
    if (!j.at(key).is_number_unsigned()) fail(path, key, "expected a non-negative integer");
    return j.at(key).get<std::uint64_t>();
  }
  bool boolean(const json& j, const std::string& path, const char* key) const {
    if (!j.at(key).is_boolean()) fail(path, key, "expected true or false");
    return j.at(key).get<bool>();
  }
  std::string string(const json& j, const std::string& path, const char* key) const {
    if (!j.at(key).is_string()) fail(path, key, "expected a string");
    return j.at(key).get<std::string>();
  }
  std::vector<double> vec(const json& j, const std::string& path, const char* key) const {
    const json& a = j.at(key);
    if (!a.is_array()) fail(path, key, "expected an array of numbers");
    std::vector<double> out;
    for (const json& x : a) {
      if (!x.is_number()) fail(path, key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::pair<double, double> range(const json& j, const std::string& path, const char* key) const {
    const std::vector<double> v = vec(j, path, key);
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] >= v[0])) fail(path, key, "expected [lo, hi] with 0 < lo <= hi");
    return {v[0], v[1]};
  }

 private:
  std::map<std::string, int> lines_;
};

SimulationSection parse_simulation(const Parser& P, const json& j) {
  const std::string path = "/simulation";
  P.allow(j, path, {"samples", "burn_in", "seed", "estimator"});
  SimulationSection s;
  if (j.contains("samples")) s.samples = P.integer(j, path, "samples", 1);
  if (j.contains("burn_in")) s.burn_in = P.integer(j, path, "burn_in", 0);
  if (j.contains("seed")) s.seed = P.seed(j, path, "seed");
  if (j.contains("estimator"))
    s.estimator = P.nested(path, [&] { return estimator_from_string(P.string(j, path, "estimator")); });
  return s;
}

OptimizationSection parse_optimization(const Parser& P, const json& j) {
  const std::string path = "/optimization";
  P.allow(j, path,
          {"template", "varsigma", "mu_total", "theta_lower", "theta_upper", "knots", "epsilon", "mu_min", "mu_max",
           "cost", "coupling", "rhs", "node_limit", "knot_restricted", "r_check"});
  OptimizationSection o;
  if (j.contains("template"))
    o.kind = P.nested(path, [&] { return template_from_string(P.string(j, path, "template")); });
  if (j.contains("varsigma")) o.varsigma = P.positive(j, path, "varsigma");
  if (j.contains("mu_total")) o.mu_total = P.positive(j, path, "mu_total");
  if (j.contains("theta_lower")) o.theta_lower = P.positive(j, path, "theta_lower");
  if (j.contains("theta_upper")) o.theta_upper = P.positive(j, path, "theta_upper");
  if (!(o.theta_upper > o.theta_lower)) P.fail(path, "theta_upper", "must exceed theta_lower");
  if (j.contains("knots")) o.knots = static_cast<int>(P.integer(j, path, "knots", 2));
  if (j.contains("epsilon")) o.epsilon = P.positive(j, path, "epsilon");
  if (j.contains("mu_min")) o.mu_min = P.num(j, path, "mu_min");
  if (j.contains("mu_max")) o.mu_max = P.positive(j, path, "mu_max");
  if (o.mu_min < 0.0 || !(o.mu_max > o.mu_min)) P.fail(path, "mu_max", "need 0 <= mu_min < mu_max");
  if (j.contains("cost")) o.cost = P.vec(j, path, "cost");
  if (j.contains("coupling")) {
    const json& c = j.at("coupling");
    if (!c.is_array()) P.fail(path, "coupling", "expected an array of rows");
    for (std::size_t r = 0; r < c.size(); ++r) {
      if (!c[r].is_array()) P.fail(path, "coupling", "expected an array of rows");
      std::vector<double> row;
      for (const json& x : c[r]) {
        if (!x.is_number()) P.fail(path, "coupling", "rows must hold numbers");
        row.push_back(x.get<double>());
      }
      o.coupling.push_back(std::move(row));
    }
  }
  if (j.contains("rhs")) o.rhs = P.vec(j, path, "rhs");
  if (o.coupling.size() != o.rhs.size()) P.fail(path, "rhs", "one entry per coupling row is required");
  if (j.contains("node_limit")) o.node_limit = P.integer(j, path, "node_limit", 1);
  if (j.contains("knot_restricted")) o.knot_restricted = P.boolean(j, path, "knot_restricted");
  if (j.contains("r_check")) o.r_check = static_cast<int>(P.integer(j, path, "r_check", 2));
  if (o.kind == Template::Generic && o.cost.empty()) P.fail(path, "cost", "the generic template needs a cost vector");
  if (o.kind != Template::Generic && !o.varsigma) P.fail(path, "varsigma", "equity templates need varsigma");
  return o;
}

StudyKind study_kind(const Parser& P, const std::string& path, const std::string& s) {
  if (s == "eval_error") return StudyKind::EvalError;
  if (s == "equity_frontier") return StudyKind::EquityFrontier;
  if (s == "cluster_analysis") return StudyKind::ClusterAnalysis;
  if (s == "markovian") return StudyKind::MarkovianSimplification;
  P.fail(path, "kind", "expected eval_error, equity_frontier, cluster_analysis or markovian, got '" + s + "'");
}

StudySection parse_study(const Parser& P, const json& j) {
  const std::string path = "/study";
  P.allow(j, path,
          {"kind", "count", "seed", "lambda_range", "scv_range", "patience_mean_range", "y_bar", "r", "sim_samples",
           "burn_in", "template", "varsigma", "fractions", "p_weights", "knots", "epsilon"});
  StudySection s;
  if (!j.contains("kind")) P.fail(path, "kind", "missing required field");
  s.kind = study_kind(P, path, P.string(j, path, "kind"));
  if (s.kind == StudyKind::EquityFrontier || s.kind == StudyKind::ClusterAnalysis) s.gen.count = 10;
  if (j.contains("count")) s.gen.count = static_cast<int>(P.integer(j, path, "count", 0));
  if (j.contains("seed")) s.gen.seed = P.seed(j, path, "seed");
  if (j.contains("lambda_range")) std::tie(s.gen.lambda_lo, s.gen.lambda_hi) = P.range(j, path, "lambda_range");
  if (j.contains("scv_range")) std::tie(s.gen.scv_lo, s.gen.scv_hi) = P.range(j, path, "scv_range");
  if (s.gen.scv_lo < 1.0) P.fail(path, "scv_range", "H2 arrivals need scv >= 1");
  if (j.contains("patience_mean_range"))
    std::tie(s.gen.patience_mean_lo, s.gen.patience_mean_hi) = P.range(j, path, "patience_mean_range");
  if (j.contains("y_bar")) s.gen.y_bar = P.positive(j, path, "y_bar");
  if (!(s.gen.patience_mean_hi < s.gen.y_bar)) P.fail(path, "patience_mean_range", "means must stay below y_bar");
  if (j.contains("r")) s.r = static_cast<int>(P.integer(j, path, "r", 1));
  if (j.contains("sim_samples")) s.sim_samples = P.integer(j, path, "sim_samples", 1000);
  if (j.contains("burn_in")) s.burn_in = P.integer(j, path, "burn_in", 0);
  if (j.contains("template")) {
    s.objective = P.nested(path, [&] { return template_from_string(P.string(j, path, "template")); });
    if (s.objective == Template::Generic) P.fail(path, "template", "studies use an equity template");
  }
  if (j.contains("varsigma")) s.varsigma = P.vec(j, path, "varsigma");
  if (j.contains("fractions")) s.fractions = P.vec(j, path, "fractions");
  if (j.contains("p_weights")) {
    s.p_weights = P.vec(j, path, "p_weights");
    for (double p : s.p_weights)
      if (!(p >= 0.0 && p <= 1.0)) P.fail(path, "p_weights", "weights must lie in [0, 1]");
  }
  if (j.contains("knots")) s.knots = static_cast<int>(P.integer(j, path, "knots", 2));
  if (j.contains("epsilon")) s.epsilon = P.positive(j, path, "epsilon");
  return s;
}

FitSection parse_fit(const Parser& P, const json& j) {
  const std::string path = "/fit";
  P.allow(j, path, {"samples_csv", "samples"});
  FitSection f;
  if (j.contains("samples_csv")) f.samples_csv = P.string(j, path, "samples_csv");
  if (j.contains("samples")) f.samples = P.vec(j, path, "samples");
  if (f.samples_csv.empty() == f.samples.empty()) P.fail(path, "samples", "give exactly one of samples, samples_csv");
  return f;
}

}  // namespace

Config parse_config(const std::string& text, bool require_admissible) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
    std::string what = e.what();
    if (auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
    throw SchemaError(line, "json", what);
  }
  const Parser P(text);
  P.allow(j, "", {"queues", "measures", "service_ratio", "r", "simulation", "optimization", "study", "bound", "fit"});

  Config c;
  if (j.contains("service_ratio")) c.service_ratio = P.positive(j, "", "service_ratio");
  if (j.contains("r")) c.r = static_cast<int>(P.integer(j, "", "r", 1));
  if (j.contains("queues")) {
    const json& q = j.at("queues");
    if (!q.is_array()) P.fail("", "queues", "expected an array");
    for (std::size_t k = 0; k < q.size(); ++k) {
      const std::string path = fmt::format("/queues/{}", k);
      c.queues.push_back(P.nested(path, [&] { return queue_from_json(q[k]); }));
      std::optional<double> mu;
      if (q[k].contains("mu")) mu = P.positive(q[k], path, "mu");
      c.queue_mu.push_back(mu);
      if (require_admissible) {
        try {
          validate_assumption1(c.queues.back().arrival, c.queues.back().patience);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::Inadmissible) throw;
          throw Error(ErrorKind::Inadmissible, e.code(),
                      fmt::format("line {}, queue '{}': {}", P.line_of(path + "/arrival"), c.queues.back().id,
                                  e.what()));
        }
      }
    }
    for (std::size_t a = 0; a < c.queues.size(); ++a)
      for (std::size_t b = a + 1; b < c.queues.size(); ++b)
        if (c.queues[a].id == c.queues[b].id) P.fail(fmt::format("/queues/{}", b), "id", "duplicate queue id");
  }
  if (j.contains("measures")) {
    const json& m = j.at("measures");
    if (!m.is_array() || m.empty()) P.fail("", "measures", "expected a non-empty array");
    c.measures.clear();
    for (std::size_t l = 0; l < m.size(); ++l)
      c.measures.push_back(P.nested(fmt::format("/measures/{}", l), [&] { return measure_from_json(m[l]); }));
  }
  if (j.contains("simulation")) c.simulation = parse_simulation(P, j.at("simulation"));
  if (j.contains("optimization")) c.optimization = parse_optimization(P, j.at("optimization"));
  if (j.contains("study")) c.study = parse_study(P, j.at("study"));
  if (j.contains("bound")) {
    const json& b = j.at("bound");
    P.allow(b, "/bound", {"r", "allow_large_r"});
    if (b.contains("r")) c.bound.r = static_cast<int>(P.integer(b, "/bound", "r", 1));
    if (b.contains("allow_large_r")) c.bound.allow_large_r = P.boolean(b, "/bound", "allow_large_r");
  }
  if (j.contains("fit")) c.fit = parse_fit(P, j.at("fit"));
  return c;
}

Config load_config(const std::string& path, bool require_admissible) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Usage, "Io", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), require_admissible);
}

json to_json(const Config& c) {
  json j;
  json queues = json::array();
  for (std::size_t k = 0; k < c.queues.size(); ++k) {
    json q = to_json(c.queues[k]);
    if (k < c.queue_mu.size() && c.queue_mu[k]) q["mu"] = *c.queue_mu[k];
    queues.push_back(q);
  }
  j["queues"] = queues;
  json measures = json::array();
  for (const MeasureKind& m : c.measures) measures.push_back(to_json(m));
  j["measures"] = measures;
  j["service_ratio"] = c.service_ratio;
  j["r"] = c.r;
  j["simulation"] = {{"samples", c.simulation.samples},
                     {"burn_in", c.simulation.burn_in},
                     {"seed", c.simulation.seed},
                     {"estimator", to_string(c.simulation.estimator)}};
  j["bound"] = {{"r", c.bound.r}, {"allow_large_r", c.bound.allow_large_r}};
  if (c.optimization) {
    const OptimizationSection& o = *c.optimization;
    json oj{{"template", to_string(o.kind)}, {"theta_lower", o.theta_lower}, {"theta_upper", o.theta_upper},
            {"knots", o.knots},              {"epsilon", o.epsilon},         {"mu_min", o.mu_min},
            {"node_limit", o.node_limit},    {"knot_restricted", o.knot_restricted}};
    if (o.varsigma) oj["varsigma"] = *o.varsigma;
    if (o.mu_total) oj["mu_total"] = *o.mu_total;
    if (std::isfinite(o.mu_max)) oj["mu_max"] = o.mu_max;
    if (!o.cost.empty()) oj["cost"] = o.cost;
    if (!o.coupling.empty()) {
      oj["coupling"] = o.coupling;
      oj["rhs"] = o.rhs;
    }
    if (o.r_check) oj["r_check"] = *o.r_check;
    j["optimization"] = oj;
  }
  if (c.study) {
    const StudySection& s = *c.study;
    json sj{{"kind", to_string(s.kind)},
            {"count", s.gen.count},
            {"seed", s.gen.seed},
            {"lambda_range", {s.gen.lambda_lo, s.gen.lambda_hi}},
            {"scv_range", {s.gen.scv_lo, s.gen.scv_hi}},
            {"patience_mean_range", {s.gen.patience_mean_lo, s.gen.patience_mean_hi}},
            {"y_bar", s.gen.y_bar},
            {"sim_samples", s.sim_samples},
            {"burn_in", s.burn_in},
            {"template", to_string(s.objective)},
            {"fractions", s.fractions},
            {"p_weights", s.p_weights},
            {"knots", s.knots},
            {"epsilon", s.epsilon}};
    if (s.r) sj["r"] = *s.r;
    if (!s.varsigma.empty()) sj["varsigma"] = s.varsigma;
    j["study"] = sj;
  }
  if (c.fit) {
    json fj = json::object();
    if (!c.fit->samples_csv.empty()) fj["samples_csv"] = c.fit->samples_csv;
    if (!c.fit->samples.empty()) fj["samples"] = c.fit->samples;
    j["fit"] = fj;
  }
  return j;
}

std::vector<double> load_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "Io", "cannot read samples file '" + path + "'");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string cellv = line.substr(first, line.find(',', first) - first);
    try {
      std::size_t used = 0;
      const double v = std::stod(cellv, &used);
      out.push_back(v);
    } catch (const std::exception&) {
      if (out.empty() && lineno == 1) continue;  // header
      throw SchemaError(lineno, "samples_csv", "not a number: '" + cellv + "'");
    }
  }
  return out;
}

}  // namespace qsize
