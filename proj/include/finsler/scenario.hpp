#pragma once

/// \file scenario.hpp
/// Scenario runner behind the CLI: loads a JSON config describing a metric,
/// connections, samples and tasks; executes the tasks; assembles a
/// deterministic JSON report plus optional CSV curve dumps.
///
/// Reproducibility contract: identical configs (including the seed) produce
/// byte-identical JSON reports. Sampling uses mt19937_64 with a fixed
/// uint64 -> [0,1) mapping, task records are assembled in declaration order,
/// and runtime_ms is reported as 0 unless output.timing is set.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "finsler/dynamics.hpp"
#include "finsler/report.hpp"

namespace finsler::scenario {

using nlohmann::json;

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config model.
// ---------------------------------------------------------------------------

namespace detail {

inline const json& require_field(const json& j, const std::string& path,
                                 const std::string& key) {
  if (!j.is_object() || !j.contains(key))
    throw config_error(path + "." + key + ": required field is missing");
  return j.at(key);
}

inline double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw config_error(path + ": expected a number");
  return j.get<double>();
}

inline int require_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw config_error(path + ": expected an integer");
  return j.get<int>();
}

inline std::string require_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw config_error(path + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> require_vector(const json& j, const std::string& path,
                                          int expected) {
  if (!j.is_array())
    throw config_error(path + ": expected an array of " + std::to_string(expected) +
                       " numbers");
  if (static_cast<int>(j.size()) != expected)
    throw config_error(path + ": expected " + std::to_string(expected) +
                       " components, got " + std::to_string(j.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(require_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

struct MetricConfig {
  std::string family;
  int n = 0;
  double radius = 1.0;                       // riemannian_sphere
  std::vector<double> a, b;                  // randers
  std::string expression, cone;              // custom
  expr::Params params;

  static MetricConfig parse(const json& j, const std::string& path) {
    MetricConfig mc;
    mc.family = detail::require_string(detail::require_field(j, path, "family"),
                                       path + ".family");
    if (mc.family == "euclidean" || mc.family == "minkowski_quartic" ||
        mc.family == "custom" || mc.family == "riemannian_sphere") {
      mc.n = detail::require_int(detail::require_field(j, path, "n"), path + ".n");
      if (mc.n < 1 || mc.n > 4) throw config_error(path + ".n: must be in 1..4");
    }
    if (mc.family == "riemannian_sphere") {
      mc.radius = detail::require_number(detail::require_field(j, path, "radius"),
                                         path + ".radius");
      if (mc.radius <= 0) throw config_error(path + ".radius: must be positive");
    } else if (mc.family == "randers") {
      const json& bj = detail::require_field(j, path, "b");
      if (!bj.is_array() || bj.empty())
        throw config_error(path + ".b: expected a nonempty array");
      mc.n = static_cast<int>(bj.size());
      mc.b = detail::require_vector(bj, path + ".b", mc.n);
      const json& aj = detail::require_field(j, path, "a");
      if (!aj.is_array() || static_cast<int>(aj.size()) != mc.n)
        throw config_error(path + ".a: expected " + std::to_string(mc.n) + " rows");
      for (int r = 0; r < mc.n; ++r) {
        const auto row =
            detail::require_vector(aj[r], path + ".a[" + std::to_string(r) + "]", mc.n);
        mc.a.insert(mc.a.end(), row.begin(), row.end());
      }
    } else if (mc.family == "custom") {
      mc.expression = detail::require_string(
          detail::require_field(j, path, "expression"), path + ".expression");
      mc.cone = detail::require_string(detail::require_field(j, path, "cone"),
                                       path + ".cone");
      if (j.contains("params")) {
        const json& pj = j.at("params");
        if (!pj.is_object()) throw config_error(path + ".params: expected an object");
        for (auto it = pj.begin(); it != pj.end(); ++it)
          mc.params[it.key()] =
              detail::require_number(it.value(), path + ".params." + it.key());
      }
    } else if (mc.family != "euclidean" && mc.family != "minkowski_quartic") {
      throw config_error(path + ".family: unknown family '" + mc.family + "'");
    }
    return mc;
  }

  MetricPtr build() const {
    try {
      if (family == "euclidean") return make_euclidean(n);
      if (family == "riemannian_sphere") return make_sphere(n, radius);
      if (family == "randers") return make_randers(a, b);
      if (family == "minkowski_quartic") return make_quartic(n);
      return make_expression_metric(n, expression, cone, params);
    } catch (const expr::parse_error& e) {
      throw config_error(std::string("metric.expression: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("metric: ") + e.what());
    }
  }
};

struct ConnectionConfig {
  std::string kind;  // chern | berwald | distinguished
  std::string f = "0", h = "0";

  static ConnectionConfig parse(const json& j, const std::string& path) {
    ConnectionConfig cc;
    cc.kind = detail::require_string(detail::require_field(j, path, "kind"),
                                     path + ".kind");
    if (cc.kind == "distinguished") {
      if (j.contains("f"))
        cc.f = detail::require_string(j.at("f"), path + ".f");
      if (j.contains("h"))
        cc.h = detail::require_string(j.at("h"), path + ".h");
    } else if (cc.kind != "chern" && cc.kind != "berwald") {
      throw config_error(path + ".kind: unknown kind '" + cc.kind + "'");
    }
    return cc;
  }

  ChristoffelField build(const MetricPtr& m) const {
    if (kind == "chern") return ChristoffelField::chern(m);
    if (kind == "berwald") return ChristoffelField::berwald(m);
    QSpec q;
    q.f_source = f;
    q.h_source = h;
    try {
      return ChristoffelField::distinguished(m, q);
    } catch (const expr::parse_error& e) {
      throw config_error(std::string("connections: bad Q expression: ") + e.what());
    }
  }
};

struct SampleConfig {
  std::uint64_t seed = 0;
  int count = 0;
  std::vector<std::pair<double, double>> x_box, v_box;
  struct Explicit {
    std::vector<double> x, v, w;
    bool has_w = false;
  };
  std::vector<Explicit> explicit_samples;

  static SampleConfig parse(const json& j, const std::string& path, int n) {
    SampleConfig sc;
    if (j.contains("seed"))
      sc.seed = static_cast<std::uint64_t>(
          detail::require_int(j.at("seed"), path + ".seed"));
    if (j.contains("count"))
      sc.count = detail::require_int(j.at("count"), path + ".count");
    if (sc.count < 0) throw config_error(path + ".count: must be >= 0");
    if (sc.count > 0) {
      const json& box = detail::require_field(j, path, "box");
      auto parse_box = [&](const char* key) {
        const json& bj = detail::require_field(box, path + ".box", key);
        if (!bj.is_array() || static_cast<int>(bj.size()) != n)
          throw config_error(path + ".box." + key + ": expected " +
                             std::to_string(n) + " ranges");
        std::vector<std::pair<double, double>> out;
        for (int i = 0; i < n; ++i) {
          const auto r = detail::require_vector(
              bj[i], path + ".box." + key + "[" + std::to_string(i) + "]", 2);
          if (!(r[0] < r[1]))
            throw config_error(path + ".box." + key + "[" + std::to_string(i) +
                               "]: empty range");
          out.emplace_back(r[0], r[1]);
        }
        return out;
      };
      sc.x_box = parse_box("x");
      sc.v_box = parse_box("v");
    }
    if (j.contains("explicit")) {
      const json& ej = j.at("explicit");
      if (!ej.is_array()) throw config_error(path + ".explicit: expected an array");
      for (std::size_t i = 0; i < ej.size(); ++i) {
        const std::string p = path + ".explicit[" + std::to_string(i) + "]";
        Explicit e;
        e.x = detail::require_vector(detail::require_field(ej[i], p, "x"), p + ".x", n);
        e.v = detail::require_vector(detail::require_field(ej[i], p, "v"), p + ".v", n);
        if (ej[i].contains("w")) {
          e.w = detail::require_vector(ej[i].at("w"), p + ".w", n);
          e.has_w = true;
        }
        sc.explicit_samples.push_back(std::move(e));
      }
    }
    return sc;
  }
};

struct OutputConfig {
  std::string path;
  std::string format = "json";
  bool timing = false;

  static OutputConfig parse(const json& j, const std::string& jpath) {
    OutputConfig oc;
    if (j.contains("path"))
      oc.path = detail::require_string(j.at("path"), jpath + ".path");
    if (j.contains("format")) {
      oc.format = detail::require_string(j.at("format"), jpath + ".format");
      if (oc.format != "json" && oc.format != "csv")
        throw config_error(jpath + ".format: must be 'json' or 'csv'");
    }
    if (j.contains("timing")) {
      if (!j.at("timing").is_boolean())
        throw config_error(jpath + ".timing: expected a boolean");
      oc.timing = j.at("timing").get<bool>();
    }
    return oc;
  }
};

struct TaskConfig {
  std::string type;
  json raw;
};

struct ScenarioConfig {
  MetricConfig metric;
  std::vector<ConnectionConfig> connections;
  SampleConfig samples;
  std::map<std::string, double> tolerances;
  std::vector<TaskConfig> tasks;
  OutputConfig output;

  static ScenarioConfig parse(const json& j) {
    ScenarioConfig sc;
    sc.metric = MetricConfig::parse(detail::require_field(j, "config", "metric"),
                                    "metric");
    if (j.contains("connections")) {
      const json& cj = j.at("connections");
      if (!cj.is_array()) throw config_error("connections: expected an array");
      for (std::size_t i = 0; i < cj.size(); ++i)
        sc.connections.push_back(ConnectionConfig::parse(
            cj[i], "connections[" + std::to_string(i) + "]"));
    }
    if (sc.connections.empty()) sc.connections.push_back({"chern", "0", "0"});
    if (j.contains("samples"))
      sc.samples = SampleConfig::parse(j.at("samples"), "samples", sc.metric.n);
    if (j.contains("tolerances")) {
      const json& tj = j.at("tolerances");
      if (!tj.is_object()) throw config_error("tolerances: expected an object");
      for (auto it = tj.begin(); it != tj.end(); ++it)
        sc.tolerances[it.key()] =
            detail::require_number(it.value(), "tolerances." + it.key());
    }
    if (j.contains("tasks")) {
      const json& tj = j.at("tasks");
      if (!tj.is_array()) throw config_error("tasks: expected an array");
      for (std::size_t i = 0; i < tj.size(); ++i) {
        const std::string path = "tasks[" + std::to_string(i) + "]";
        TaskConfig tc;
        tc.type = detail::require_string(detail::require_field(tj[i], path, "type"),
                                         path + ".type");
        tc.raw = tj[i];
        sc.tasks.push_back(std::move(tc));
      }
    }
    if (j.contains("output")) sc.output = OutputConfig::parse(j.at("output"), "output");
    return sc;
  }

  static ScenarioConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse(j);
  }

  double tolerance_for(const std::string& identity, double fallback) const {
    auto it = tolerances.find(identity);
    if (it != tolerances.end()) return it->second;
    it = tolerances.find("default");
    if (it != tolerances.end()) return it->second;
    return fallback;
  }
};

// ---------------------------------------------------------------------------
// Deterministic sampling.
// ---------------------------------------------------------------------------

/// mt19937_64 with an explicit 53-bit mapping to [0,1); both are fully
/// pinned by the standard, so streams are identical across platforms.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

struct Sample {
  Vec x, v, w;
};

/// Explicit samples first (cone-validated), then seeded box sampling with
/// rejection against the cone (and a nondegenerate flag for w), capped at
/// 10^4 attempts per sample.
inline std::vector<Sample> make_samples(const Metric& m, const SampleConfig& sc) {
  const int n = m.dim();
  std::vector<Sample> out;
  for (std::size_t i = 0; i < sc.explicit_samples.size(); ++i) {
    const auto& e = sc.explicit_samples[i];
    if (!m.cone_contains(e.x, e.v))
      throw config_error("samples.explicit[" + std::to_string(i) +
                         "]: v is outside the admissible cone");
    Sample s{e.x, e.v, e.w};
    if (!e.has_w) s.w.assign(n, 0.0);
    out.push_back(std::move(s));
  }
  if (sc.count == 0) return out;

  SampleRng rng(sc.seed);
  constexpr int kCap = 10000;
  for (int i = 0; i < sc.count; ++i) {
    Sample s;
    s.x.resize(n);
    s.v.resize(n);
    s.w.resize(n);
    int attempts = 0;
    while (true) {
      if (++attempts > kCap)
        throw config_error("samples: could not draw an admissible (x, v) within " +
                           std::to_string(kCap) + " attempts");
      for (int k = 0; k < n; ++k)
        s.x[k] = rng.uniform(sc.x_box[k].first, sc.x_box[k].second);
      for (int k = 0; k < n; ++k)
        s.v[k] = rng.uniform(sc.v_box[k].first, sc.v_box[k].second);
      if (m.cone_contains(s.x, s.v)) break;
    }
    attempts = 0;
    while (true) {
      if (++attempts > kCap)
        throw config_error("samples: could not draw a nondegenerate flag w within " +
                           std::to_string(kCap) + " attempts");
      for (int k = 0; k < n; ++k)
        s.w[k] = rng.uniform(sc.v_box[k].first, sc.v_box[k].second);
      // w must span a nondegenerate flag with v
      try {
        const TensorValue g = fundamental_tensor(m, s.x, s.v);
        const double L = m.lagrangian(s.x, s.v);
        double gww = 0, gvw = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            gww += g(a, b) * s.w[a] * s.w[b];
            gvw += g(a, b) * s.v[a] * s.w[b];
          }
        const double den = gww * L - gvw * gvw;
        const double scale = std::abs(gww * L) + gvw * gvw;
        if (std::abs(den) > 1e-6 * std::max(scale, 1e-300)) break;
      } catch (const degenerate_metric_error&) {
        throw config_error("samples: fundamental tensor degenerate at a drawn sample");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

struct ResidualRecord {
  std::string identity;
  int sample = 0;
  double residual = 0;
  double tolerance = 0;
  bool pass = true;
};

struct KeyValue {
  enum class Kind { Number, Integer, Text, Flag, Numbers };
  std::string key;
  Kind kind = Kind::Number;
  double number = 0;
  long long integer = 0;
  std::string text;
  bool flag = false;
  std::vector<double> numbers;

  static KeyValue num(std::string k, double v) {
    KeyValue kv;
    kv.key = std::move(k);
    kv.kind = Kind::Number;
    kv.number = v;
    return kv;
  }
  static KeyValue integer_of(std::string k, long long v) {
    KeyValue kv;
    kv.key = std::move(k);
    kv.kind = Kind::Integer;
    kv.integer = v;
    return kv;
  }
  static KeyValue str(std::string k, std::string v) {
    KeyValue kv;
    kv.key = std::move(k);
    kv.kind = Kind::Text;
    kv.text = std::move(v);
    return kv;
  }
  static KeyValue boolean(std::string k, bool v) {
    KeyValue kv;
    kv.key = std::move(k);
    kv.kind = Kind::Flag;
    kv.flag = v;
    return kv;
  }
  static KeyValue nums(std::string k, std::vector<double> v) {
    KeyValue kv;
    kv.key = std::move(k);
    kv.kind = Kind::Numbers;
    kv.numbers = std::move(v);
    return kv;
  }
};

struct TaskReport {
  std::string task;
  std::vector<KeyValue> inputs, outputs;
  std::vector<ResidualRecord> residuals;
  double tolerance = 0;
  bool pass = true;
  long long runtime_ms = 0;
  bool verification = false;  // participates in the exit-code contract
};

struct RunResult {
  std::vector<TaskReport> reports;
  bool all_pass = true;
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

// ---------------------------------------------------------------------------
// Execution helpers.
// ---------------------------------------------------------------------------

namespace detail {

inline int thread_cap() {
  if (const char* env = std::getenv("FINSLER_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

/// Index-parallel loop with deterministic result placement; honors
/// FINSLER_THREADS. The callable must only write to its own index.
template <class F>
void parallel_for(int count, F&& fn) {
  const int threads = std::min(thread_cap(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex emu;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < count) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(emu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::string json_echo(const json& j) { return j.dump(); }

}  // namespace detail

}  // namespace finsler::scenario
