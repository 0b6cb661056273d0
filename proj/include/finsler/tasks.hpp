#pragma once

/// \file tasks.hpp
/// Task implementations for the scenario runner: verification suites,
/// curvature tables, geodesic/transport/jacobi integrations, energy
/// variations, and connection comparison, plus report serialization.

#include <algorithm>
#include <functional>

#include "finsler/scenario.hpp"

namespace finsler::scenario {

struct RunContext {
  const ScenarioConfig* config = nullptr;
  MetricPtr metric;
  std::vector<ChristoffelField> connections;
  std::vector<std::string> labels;
  std::vector<Sample> samples;
};

namespace detail {

inline int connection_index(const json& j, const std::string& key,
                            const RunContext& ctx, int fallback,
                            const std::string& path) {
  int idx = fallback;
  if (j.contains(key)) idx = require_int(j.at(key), path + "." + key);
  if (idx < 0 || idx >= static_cast<int>(ctx.connections.size()))
    throw config_error(path + "." + key + ": connection index out of range");
  return idx;
}

inline std::vector<int> connection_indices(const json& j, const RunContext& ctx,
                                           const std::string& path) {
  std::vector<int> out;
  if (j.contains("connections")) {
    const json& cj = j.at("connections");
    if (!cj.is_array()) throw config_error(path + ".connections: expected an array");
    for (std::size_t i = 0; i < cj.size(); ++i) {
      const std::string p = path + ".connections[" + std::to_string(i) + "]";
      const int idx = require_int(cj[i], p);
      if (idx < 0 || idx >= static_cast<int>(ctx.connections.size()))
        throw config_error(p + ": connection index out of range");
      out.push_back(idx);
    }
  } else {
    for (int i = 0; i < static_cast<int>(ctx.connections.size()); ++i)
      out.push_back(i);
  }
  return out;
}

/// Residual of nabla g = Q_expected for one connection at one sample.
inline double metric_compat_residual(const RunContext& ctx,
                                     const ChristoffelField& c,
                                     const Sample& s) {
  const int n = ctx.metric->dim();
  const TensorValue nabla_g =
      covariant_derivative_tensor(c, fundamental_field(ctx.metric), s.x, s.v);

  TensorValue expected(n, nabla_g.variances(), s.x, s.v);
  if (c.kind() != ConnectionKind::Chern) {
    QSpec q = c.kind() == ConnectionKind::Berwald ? QSpec::constants(2.0, 0.0)
                                                  : c.qspec();
    const TensorValue qv = qspec_field(ctx.metric, q)(s.x, s.v, 0).value(s.x, s.v);
    // nabla_g slots (w,z,u) vs Q slots (u,w,z)
    for (int u = 0; u < n; ++u)
      for (int w = 0; w < n; ++w)
        for (int z = 0; z < n; ++z) expected(w, z, u) = qv(u, w, z);
  }

  finsler::detail::ResidualNorm norm;
  const JetTensor gj = fundamental_field(ctx.metric)(s.x, s.v, 1);
  for (int i = 0; i < n; ++i) {
    const TensorValue d = gj.x_derivative(i).value(s.x, s.v);
    norm.scale = std::max(norm.scale, d.max_abs());
  }
  for (std::size_t i = 0; i < nabla_g.data().size(); ++i) {
    const double terms[2] = {nabla_g.data()[i], -expected.data()[i]};
    norm.add(terms);
  }
  return norm.normalized();
}

inline double homogeneity_residual(const Metric& m, const Sample& s) {
  finsler::detail::ResidualNorm norm;
  const TensorValue g = fundamental_tensor(m, s.x, s.v);
  const TensorValue c = cartan_tensor(m, s.x, s.v);
  const auto spray = spray_coefficients(m, s.x, s.v);
  for (double lambda : {0.5, 2.0, 7.0}) {
    Vec lv(s.v.size());
    for (std::size_t i = 0; i < s.v.size(); ++i) lv[i] = lambda * s.v[i];
    const TensorValue gl = fundamental_tensor(m, s.x, lv);
    const TensorValue cl = cartan_tensor(m, s.x, lv);
    const auto sl = spray_coefficients(m, s.x, lv);
    for (std::size_t i = 0; i < g.data().size(); ++i) {
      const double terms[2] = {gl.data()[i], -g.data()[i]};
      norm.add(terms);
    }
    for (std::size_t i = 0; i < c.data().size(); ++i) {
      const double terms[2] = {lambda * cl.data()[i], -c.data()[i]};
      norm.add(terms);
    }
    for (std::size_t i = 0; i < spray.size(); ++i) {
      const double terms[2] = {sl[i], -lambda * lambda * spray[i]};
      norm.add(terms);
    }
  }
  return norm.normalized(1.0);
}

inline double euler_residual(const Metric& m, const Sample& s) {
  const int n = m.dim();
  const TensorValue g = fundamental_tensor(m, s.x, s.v);
  const double L = m.lagrangian(s.x, s.v);
  finsler::detail::ResidualNorm norm;
  double gvv = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gvv += g(i, j) * s.v[i] * s.v[j];
  {
    const double terms[2] = {gvv, -L};
    norm.add(terms);
  }
  // g(v, e_k) = 1/2 dL/dy^k
  const XYJets jets = seeded_y(n, s.x, s.v, 1);
  const Jet Lj = m.lagrangian(std::span<const Jet>(jets.x),
                              std::span<const Jet>(jets.y));
  for (int k = 0; k < n; ++k) {
    double gv = 0;
    for (int i = 0; i < n; ++i) gv += g(i, k) * s.v[i];
    const double terms[2] = {gv, -0.5 * Lj.derivative(k).value()};
    norm.add(terms);
  }
  return norm.normalized(1.0);
}

inline void require_flag_vector(const Sample& s, const std::string& context) {
  for (double w : s.w)
    if (w != 0.0) return;
  throw config_error(context + ": samples used for flag curvature need a w vector");
}

inline double flag_independence_residual(const RunContext& ctx, const Sample& s) {
  std::vector<double> ks;
  for (const auto& c : ctx.connections)
    ks.push_back(flag_curvature(*ctx.metric, c, s.x, s.v, s.w));
  double scale = 1e-12, diff = 0;
  for (double k : ks) scale = std::max(scale, std::abs(k));
  for (std::size_t i = 0; i + 1 < ks.size(); ++i)
    diff = std::max(diff, std::abs(ks[i] - ks[i + 1]));
  return diff / scale;
}

struct IdentityDefaults {
  static double tolerance(const std::string& identity,
                          const ScenarioConfig& config) {
    double fallback = 1e-7;
    if (identity.rfind("metric_compat", 0) == 0)
      fallback = identity.find("chern") != std::string::npos ? 1e-9 : 1e-8;
    else if (identity.rfind("homogeneity", 0) == 0)
      fallback = 1e-9;
    else if (identity.rfind("euler", 0) == 0)
      fallback = 1e-10;
    else if (identity.rfind("flagpole", 0) == 0)
      fallback = 1e-8;
    // exact identity key first, then its family prefix, then default
    auto it = config.tolerances.find(identity);
    if (it != config.tolerances.end()) return it->second;
    const auto slash = identity.find('/');
    if (slash != std::string::npos) {
      it = config.tolerances.find(identity.substr(0, slash));
      if (it != config.tolerances.end()) return it->second;
    }
    return config.tolerance_for("", fallback);
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Tasks.
// ---------------------------------------------------------------------------

inline TaskReport run_verify(const RunContext& ctx, const TaskConfig& task,
                             const std::string& path) {
  TaskReport rep;
  rep.task = "verify";
  rep.verification = true;

  std::vector<std::string> identities{"metric_compat", "bianchi_first",
                                      "bianchi_second", "bianchi_vertical",
                                      "symmetries"};
  if (task.raw.contains("identities")) {
    identities.clear();
    const json& ij = task.raw.at("identities");
    if (!ij.is_array()) throw config_error(path + ".identities: expected an array");
    for (std::size_t i = 0; i < ij.size(); ++i)
      identities.push_back(detail::require_string(
          ij[i], path + ".identities[" + std::to_string(i) + "]"));
  }
  const std::vector<int> conns = detail::connection_indices(task.raw, ctx, path);
  const int count = static_cast<int>(ctx.samples.size());
  if (count == 0) throw config_error(path + ": verify requires samples");

  rep.inputs.push_back(KeyValue::integer_of("samples", count));
  {
    std::string names;
    for (const auto& id : identities) names += (names.empty() ? "" : ",") + id;
    rep.inputs.push_back(KeyValue::str("identities", names));
  }

  auto add_records = [&](const std::string& identity,
                         const std::vector<double>& residuals) {
    const double tol = detail::IdentityDefaults::tolerance(identity, *ctx.config);
    for (int i = 0; i < count; ++i) {
      ResidualRecord r{identity, i, residuals[i], tol, residuals[i] <= tol};
      rep.pass = rep.pass && r.pass;
      rep.residuals.push_back(std::move(r));
    }
  };

  for (const std::string& identity : identities) {
    if (identity == "metric_compat") {
      for (int ci : conns) {
        std::vector<double> res(count);
        detail::parallel_for(count, [&](int i) {
          res[i] = detail::metric_compat_residual(ctx, ctx.connections[ci],
                                                  ctx.samples[i]);
        });
        add_records("metric_compat/" + ctx.labels[ci], res);
      }
    } else if (identity == "bianchi_first" || identity == "bianchi_second" ||
               identity == "bianchi_vertical" || identity == "bianchi") {
      for (int ci : conns) {
        std::vector<BianchiResiduals> res(count);
        detail::parallel_for(count, [&](int i) {
          res[i] = bianchi_residuals(ctx.connections[ci], ctx.samples[i].x,
                                     ctx.samples[i].v);
        });
        auto pick = [&](const std::string& which) {
          std::vector<double> vals(count);
          for (int i = 0; i < count; ++i)
            vals[i] = which == "bianchi_first"    ? res[i].first
                      : which == "bianchi_second" ? res[i].second
                                                  : res[i].vertical;
          add_records(which + "/" + ctx.labels[ci], vals);
        };
        if (identity == "bianchi") {
          pick("bianchi_first");
          pick("bianchi_second");
          pick("bianchi_vertical");
        } else {
          pick(identity);
        }
      }
    } else if (identity == "symmetries") {
      std::vector<SymmetryResiduals> res(count);
      detail::parallel_for(count, [&](int i) {
        res[i] = curvature_symmetry_residuals(ctx.metric, ctx.samples[i].x,
                                              ctx.samples[i].v);
      });
      std::vector<double> pair_res(count), six_res(count);
      for (int i = 0; i < count; ++i) {
        pair_res[i] = res[i].sym_pair;
        six_res[i] = res[i].six_term;
      }
      add_records("symmetries_pair", pair_res);
      add_records("symmetries_six", six_res);
    } else if (identity == "flag_independence") {
      if (ctx.connections.size() < 2)
        throw config_error(path + ": flag_independence needs >= 2 connections");
      for (int i = 0; i < count; ++i)
        detail::require_flag_vector(ctx.samples[i], path);
      std::vector<double> res(count);
      detail::parallel_for(count, [&](int i) {
        res[i] = detail::flag_independence_residual(ctx, ctx.samples[i]);
      });
      add_records("flag_independence", res);
    } else if (identity == "homogeneity") {
      std::vector<double> res(count);
      detail::parallel_for(count, [&](int i) {
        res[i] = detail::homogeneity_residual(*ctx.metric, ctx.samples[i]);
      });
      add_records("homogeneity", res);
    } else if (identity == "euler") {
      std::vector<double> res(count);
      detail::parallel_for(count, [&](int i) {
        res[i] = detail::euler_residual(*ctx.metric, ctx.samples[i]);
      });
      add_records("euler", res);
    } else {
      throw config_error(path + ".identities: unknown identity '" + identity + "'");
    }
  }

  double worst = 0;
  for (const auto& r : rep.residuals) worst = std::max(worst, r.residual);
  rep.outputs.push_back(KeyValue::num("max_residual", worst));
  rep.tolerance = ctx.config->tolerance_for("default", 1e-7);
  return rep;
}

inline TaskReport run_compare(const RunContext& ctx, const TaskConfig& task,
                              const std::string& path) {
  TaskReport rep;
  rep.task = "compare";
  rep.verification = true;
  const int ia = detail::connection_index(task.raw, "connection_a", ctx, 0, path);
  const int ib = detail::connection_index(task.raw, "connection_b", ctx, 1, path);
  const int count = static_cast<int>(ctx.samples.size());
  if (count == 0) throw config_error(path + ": compare requires samples");
  rep.inputs.push_back(KeyValue::str("connection_a", ctx.labels[ia]));
  rep.inputs.push_back(KeyValue::str("connection_b", ctx.labels[ib]));

  std::vector<CurvatureComparison> res(count);
  detail::parallel_for(count, [&](int i) {
    res[i] = compare_curvatures(ctx.connections[ia], ctx.connections[ib],
                                ctx.samples[i].x, ctx.samples[i].v);
  });
  const double tol_full =
      detail::IdentityDefaults::tolerance("curvature_comparison", *ctx.config);
  const double tol_pole =
      detail::IdentityDefaults::tolerance("flagpole_equality", *ctx.config);
  for (int i = 0; i < count; ++i) {
    ResidualRecord full{"curvature_comparison", i, res[i].full_residual, tol_full,
                        res[i].full_residual <= tol_full};
    rep.pass = rep.pass && full.pass;
    rep.residuals.push_back(std::move(full));
    // the flagpole identity applies when Q(u, v) = 0
    if (res[i].q_flagpole_norm < 1e-9) {
      ResidualRecord pole{"flagpole_equality", i, res[i].flagpole_residual, tol_pole,
                          res[i].flagpole_residual <= tol_pole};
      rep.pass = rep.pass && pole.pass;
      rep.residuals.push_back(std::move(pole));
    }
  }
  rep.tolerance = tol_full;
  return rep;
}

inline TaskReport run_info(const RunContext& ctx, const TaskConfig&,
                           const std::string&) {
  TaskReport rep;
  rep.task = "info";
  rep.outputs.push_back(KeyValue::str("family", ctx.metric->family()));
  rep.outputs.push_back(KeyValue::integer_of("dimension", ctx.metric->dim()));
  {
    std::string names;
    for (const auto& l : ctx.labels) names += (names.empty() ? "" : ",") + l;
    rep.outputs.push_back(KeyValue::str("connections", names));
  }
  rep.outputs.push_back(
      KeyValue::integer_of("samples", static_cast<long long>(ctx.samples.size())));
  if (!ctx.samples.empty()) {
    const Sample& s = ctx.samples.front();
    rep.outputs.push_back(
        KeyValue::num("lagrangian_at_first_sample", ctx.metric->lagrangian(s.x, s.v)));
    const TensorValue g = fundamental_tensor(*ctx.metric, s.x, s.v);
    rep.outputs.push_back(KeyValue::num(
        "det_g_at_first_sample", linalg::determinant(g.data(), ctx.metric->dim())));
  }
  return rep;
}

inline TaskReport run_curvature_task(const RunContext& ctx, const TaskConfig& task,
                                     const std::string& path, RunResult& result) {
  TaskReport rep;
  rep.task = "curvature";
  const std::vector<int> conns = detail::connection_indices(task.raw, ctx, path);
  const int count = static_cast<int>(ctx.samples.size());
  if (count == 0) throw config_error(path + ": curvature requires samples");

  for (int i = 0; i < count; ++i) detail::require_flag_vector(ctx.samples[i], path);
  std::vector<std::vector<double>> flags(conns.size(), std::vector<double>(count));
  for (std::size_t c = 0; c < conns.size(); ++c) {
    detail::parallel_for(count, [&](int i) {
      flags[c][i] = flag_curvature(*ctx.metric, ctx.connections[conns[c]],
                                   ctx.samples[i].x, ctx.samples[i].v,
                                   ctx.samples[i].w);
    });
    rep.outputs.push_back(
        KeyValue::nums("flag/" + ctx.labels[conns[c]], flags[c]));
  }

  if (task.raw.contains("csv")) {
    std::vector<std::string> cols{"sample"};
    for (std::size_t c = 0; c < conns.size(); ++c)
      cols.push_back("flag_" + ctx.labels[conns[c]]);
    CsvWriter csv(cols);
    for (int i = 0; i < count; ++i) {
      std::vector<double> row{static_cast<double>(i)};
      for (std::size_t c = 0; c < conns.size(); ++c) row.push_back(flags[c][i]);
      csv.row(row);
    }
    result.files.emplace_back(
        detail::require_string(task.raw.at("csv"), path + ".csv"), csv.str());
  }
  return rep;
}

namespace detail {

/// Embeds the (possibly subsampled) curve into the report outputs as column
/// arrays, mirroring the CSV layout.
inline void embed_curve(std::vector<KeyValue>& outputs, const Curve& c,
                        const std::vector<std::string>& field_names,
                        const std::vector<Vec>* field) {
  const int stride = field ? 2 : 1;
  std::vector<double> ts;
  std::vector<std::vector<double>> cols(2 * c.n + field_names.size());
  for (int i = 0, f = 0; i <= c.steps(); i += stride, ++f) {
    if (field && f >= static_cast<int>(field->size())) break;
    ts.push_back(c.ts[i]);
    for (int k = 0; k < c.n; ++k) {
      cols[k].push_back(c.xs[i][k]);
      cols[c.n + k].push_back(c.vs[i][k]);
    }
    if (field)
      for (std::size_t k = 0; k < field_names.size(); ++k)
        cols[2 * c.n + k].push_back((*field)[f][k]);
  }
  outputs.push_back(KeyValue::nums("curve/t", std::move(ts)));
  for (int k = 0; k < c.n; ++k)
    outputs.push_back(KeyValue::nums("curve/x" + std::to_string(k + 1), cols[k]));
  for (int k = 0; k < c.n; ++k)
    outputs.push_back(KeyValue::nums("curve/v" + std::to_string(k + 1), cols[c.n + k]));
  for (std::size_t k = 0; k < field_names.size(); ++k)
    outputs.push_back(KeyValue::nums("curve/" + field_names[k], cols[2 * c.n + k]));
}

inline bool embed_requested(const json& j) {
  return j.contains("embed") && j.at("embed").is_boolean() && j.at("embed").get<bool>();
}

inline std::string curve_csv(const Curve& c,
                             const std::vector<std::string>& field_names,
                             const std::vector<Vec>* field) {
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= c.n; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 1; i <= c.n; ++i) cols.push_back("v" + std::to_string(i));
  for (const auto& f : field_names) cols.push_back(f);
  CsvWriter csv(cols);
  const int stride = field ? 2 : 1;
  for (int i = 0, f = 0; i <= c.steps(); i += stride, ++f) {
    std::vector<double> row{c.ts[i]};
    row.insert(row.end(), c.xs[i].begin(), c.xs[i].end());
    row.insert(row.end(), c.vs[i].begin(), c.vs[i].end());
    if (field) {
      if (f >= static_cast<int>(field->size())) break;
      row.insert(row.end(), (*field)[f].begin(), (*field)[f].end());
    }
    csv.row(row);
  }
  return csv.str();
}

struct GeodesicInputs {
  Vec x0, v0;
  double t0 = 0, t1 = 1;
  int steps = 1024;
  int connection = 0;
};

inline GeodesicInputs parse_geodesic_inputs(const json& j, const RunContext& ctx,
                                            const std::string& path) {
  GeodesicInputs gi;
  const int n = ctx.metric->dim();
  gi.x0 = require_vector(require_field(j, path, "x0"), path + ".x0", n);
  gi.v0 = require_vector(require_field(j, path, "v0"), path + ".v0", n);
  const auto span =
      require_vector(require_field(j, path, "t_span"), path + ".t_span", 2);
  gi.t0 = span[0];
  gi.t1 = span[1];
  if (!(gi.t0 < gi.t1)) throw config_error(path + ".t_span: empty interval");
  if (j.contains("steps")) gi.steps = require_int(j.at("steps"), path + ".steps");
  if (gi.steps < 16 || gi.steps % 2 != 0)
    throw config_error(path + ".steps: need an even count >= 16");
  gi.connection = connection_index(j, "connection", ctx, 0, path);
  return gi;
}

}  // namespace detail

inline TaskReport run_geodesic_task(const RunContext& ctx, const TaskConfig& task,
                                    const std::string& path, RunResult& result) {
  TaskReport rep;
  rep.task = "geodesic";
  const auto gi = detail::parse_geodesic_inputs(task.raw, ctx, path);
  rep.inputs.push_back(KeyValue::nums("x0", gi.x0));
  rep.inputs.push_back(KeyValue::nums("v0", gi.v0));
  rep.inputs.push_back(KeyValue::integer_of("steps", gi.steps));
  rep.inputs.push_back(KeyValue::str("connection", ctx.labels[gi.connection]));

  try {
    const Curve g = integrate_geodesic(ctx.connections[gi.connection], gi.x0, gi.v0,
                                       gi.t0, gi.t1, gi.steps);
    const double L0 = ctx.metric->lagrangian(g.xs[0], g.vs[0]);
    double drift = 0;
    for (std::size_t i = 0; i < g.ts.size(); ++i)
      drift = std::max(drift, std::abs(ctx.metric->lagrangian(g.xs[i], g.vs[i]) - L0) /
                                  std::abs(L0));
    rep.outputs.push_back(KeyValue::nums("x_end", g.xs.back()));
    rep.outputs.push_back(KeyValue::nums("v_end", g.vs.back()));
    rep.outputs.push_back(KeyValue::num("lagrangian_drift", drift));
    if (detail::embed_requested(task.raw)) detail::embed_curve(rep.outputs, g, {}, nullptr);
    if (task.raw.contains("csv"))
      result.files.emplace_back(
          detail::require_string(task.raw.at("csv"), path + ".csv"),
          detail::curve_csv(g, {}, nullptr));
  } catch (const cone_exit_error& e) {
    rep.pass = false;
    rep.outputs.push_back(KeyValue::str("error", "cone_exit"));
    rep.outputs.push_back(KeyValue::num("exit_time", e.exit_time()));
  }
  return rep;
}

inline TaskReport run_transport_task(const RunContext& ctx, const TaskConfig& task,
                                     const std::string& path, RunResult& result) {
  TaskReport rep;
  rep.task = "transport";
  const auto gi = detail::parse_geodesic_inputs(task.raw, ctx, path);
  const int n = ctx.metric->dim();
  const Vec X0 = detail::require_vector(
      detail::require_field(task.raw, path, "X0"), path + ".X0", n);
  const std::string kind_name = detail::require_string(
      detail::require_field(task.raw, path, "kind"), path + ".kind");
  TransportKind kind;
  if (kind_name == "self") kind = TransportKind::SelfParallel;
  else if (kind_name == "gamma") kind = TransportKind::GammaParallel;
  else if (kind_name == "w") kind = TransportKind::WParallel;
  else throw config_error(path + ".kind: expected self | gamma | w");

  std::function<Vec(double)> W;
  if (kind == TransportKind::WParallel) {
    const json& wj = detail::require_field(task.raw, path, "w_field");
    std::vector<expr::AstPtr> comps;
    if (!wj.is_array() || static_cast<int>(wj.size()) != n)
      throw config_error(path + ".w_field: expected " + std::to_string(n) +
                         " expressions of t");
    for (std::size_t i = 0; i < wj.size(); ++i) {
      try {
        comps.push_back(expr::parse(
            detail::require_string(wj[i], path + ".w_field[" + std::to_string(i) + "]"),
            {"t"}));
      } catch (const expr::parse_error& e) {
        throw config_error(path + ".w_field[" + std::to_string(i) + "]: " + e.what());
      }
    }
    W = [comps](double t) {
      Vec out;
      const std::vector<double> vars{t};
      for (const auto& c : comps)
        out.push_back(expr::evaluate(*c, std::span<const double>(vars), {}));
      return out;
    };
  }

  rep.inputs.push_back(KeyValue::str("kind", kind_name));
  rep.inputs.push_back(KeyValue::nums("X0", X0));
  rep.inputs.push_back(KeyValue::str("connection", ctx.labels[gi.connection]));

  try {
    const Curve g = integrate_geodesic(ctx.connections[gi.connection], gi.x0, gi.v0,
                                       gi.t0, gi.t1, gi.steps);
    const TransportResult tr =
        parallel_transport(ctx.connections[gi.connection], g, X0, kind, W);
    rep.outputs.push_back(KeyValue::boolean("truncated", tr.truncated));
    rep.outputs.push_back(KeyValue::num("reached_t", tr.reached_t));
    rep.outputs.push_back(KeyValue::nums("X_end", tr.values.back()));
    if (kind == TransportKind::GammaParallel) {
      // g-norm drift along the curve
      double norm0 = 0, worst = 0;
      for (std::size_t i = 0; i < tr.values.size(); ++i) {
        const TensorValue g2 =
            fundamental_tensor(*ctx.metric, g.xs[2 * i], g.vs[2 * i]);
        double acc = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) acc += g2(a, b) * tr.values[i][a] * tr.values[i][b];
        if (i == 0) norm0 = acc;
        worst = std::max(worst, std::abs(acc - norm0) / std::abs(norm0));
      }
      rep.outputs.push_back(KeyValue::num("norm_drift", worst));
    }
    std::vector<std::string> names;
    for (int i = 1; i <= n; ++i) names.push_back("X" + std::to_string(i));
    if (detail::embed_requested(task.raw))
      detail::embed_curve(rep.outputs, g, names, &tr.values);
    if (task.raw.contains("csv")) {
      result.files.emplace_back(
          detail::require_string(task.raw.at("csv"), path + ".csv"),
          detail::curve_csv(g, names, &tr.values));
    }
  } catch (const cone_exit_error& e) {
    rep.pass = false;
    rep.outputs.push_back(KeyValue::str("error", "cone_exit"));
    rep.outputs.push_back(KeyValue::num("exit_time", e.exit_time()));
  }
  return rep;
}

inline TaskReport run_jacobi_task(const RunContext& ctx, const TaskConfig& task,
                                  const std::string& path, RunResult& result) {
  TaskReport rep;
  rep.task = "jacobi";
  const auto gi = detail::parse_geodesic_inputs(task.raw, ctx, path);
  const int n = ctx.metric->dim();
  const Vec J0 = detail::require_vector(detail::require_field(task.raw, path, "J0"),
                                        path + ".J0", n);
  const Vec J0dot = detail::require_vector(
      detail::require_field(task.raw, path, "J0dot"), path + ".J0dot", n);
  rep.inputs.push_back(KeyValue::nums("J0", J0));
  rep.inputs.push_back(KeyValue::nums("J0dot", J0dot));
  rep.inputs.push_back(KeyValue::str("connection", ctx.labels[gi.connection]));

  const Curve g = integrate_geodesic(ctx.connections[gi.connection], gi.x0, gi.v0,
                                     gi.t0, gi.t1, gi.steps);
  const JacobiResult jr =
      integrate_jacobi(ctx.connections[gi.connection], g, J0, J0dot);
  rep.outputs.push_back(KeyValue::nums("J_end", jr.values.back()));
  {
    const std::size_t last = jr.values.size() - 1;
    const TensorValue g2 =
        fundamental_tensor(*ctx.metric, g.xs[2 * last], g.vs[2 * last]);
    double acc = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) acc += g2(a, b) * jr.values[last][a] * jr.values[last][b];
    rep.outputs.push_back(KeyValue::num("J_end_norm", std::sqrt(std::max(0.0, acc))));
  }
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("J" + std::to_string(i));
  if (detail::embed_requested(task.raw))
    detail::embed_curve(rep.outputs, g, names, &jr.values);
  if (task.raw.contains("csv")) {
    result.files.emplace_back(
        detail::require_string(task.raw.at("csv"), path + ".csv"),
        detail::curve_csv(g, names, &jr.values));
  }
  return rep;
}

inline TaskReport run_variation_task(const RunContext& ctx, const TaskConfig& task,
                                     const std::string& path) {
  TaskReport rep;
  rep.task = "variation";
  const int n = ctx.metric->dim();
  const int order = task.raw.contains("order")
                        ? detail::require_int(task.raw.at("order"), path + ".order")
                        : 1;
  if (order != 1 && order != 2)
    throw config_error(path + ".order: must be 1 or 2");

  // variation field W(t) from expressions, differentiated by jets
  const json& fj = detail::require_field(task.raw, path, "field");
  if (!fj.is_array() || static_cast<int>(fj.size()) != n)
    throw config_error(path + ".field: expected " + std::to_string(n) +
                       " expressions of t");
  std::vector<expr::AstPtr> wexprs;
  for (std::size_t i = 0; i < fj.size(); ++i) {
    try {
      wexprs.push_back(expr::parse(
          detail::require_string(fj[i], path + ".field[" + std::to_string(i) + "]"),
          {"t"}));
    } catch (const expr::parse_error& e) {
      throw config_error(path + ".field[" + std::to_string(i) + "]: " + e.what());
    }
  }
  auto wval = [wexprs](double t) {
    auto sp = jet_space(1, 1);
    const std::vector<Jet> tj{Jet::seeded(sp, t, 0)};
    Vec out;
    for (const auto& c : wexprs) out.push_back(expr::evaluate<Jet>(*c, tj, {}).value());
    return out;
  };
  auto wdot = [wexprs](double t) {
    auto sp = jet_space(1, 1);
    const std::vector<Jet> tj{Jet::seeded(sp, t, 0)};
    Vec out;
    const std::vector<int> one{1};
    for (const auto& c : wexprs)
      out.push_back(expr::evaluate<Jet>(*c, tj, {}).derivative_value(one));
    return out;
  };

  VariationSpec spec;
  spec.field = wval;
  spec.field_deriv = wdot;
  if (task.raw.contains("fixed_endpoints")) {
    if (!task.raw.at("fixed_endpoints").is_boolean())
      throw config_error(path + ".fixed_endpoints: expected a boolean");
    spec.fixed_endpoints = task.raw.at("fixed_endpoints").get<bool>();
  }

  const int conn = detail::connection_index(task.raw, "connection", ctx, 0, path);
  double value = 0;
  if (task.raw.contains("curve")) {
    if (order == 2)
      throw config_error(path + ": order 2 requires a geodesic (x0, v0), not a curve");
    const json& cj = task.raw.at("curve");
    if (!cj.is_array() || static_cast<int>(cj.size()) != n)
      throw config_error(path + ".curve: expected " + std::to_string(n) +
                         " expressions of t");
    std::vector<expr::AstPtr> comps;
    for (std::size_t i = 0; i < cj.size(); ++i) {
      try {
        comps.push_back(expr::parse(
            detail::require_string(cj[i], path + ".curve[" + std::to_string(i) + "]"),
            {"t"}));
      } catch (const expr::parse_error& e) {
        throw config_error(path + ".curve[" + std::to_string(i) + "]: " + e.what());
      }
    }
    const auto span = detail::require_vector(
        detail::require_field(task.raw, path, "t_span"), path + ".t_span", 2);
    int steps = 256;
    if (task.raw.contains("steps"))
      steps = detail::require_int(task.raw.at("steps"), path + ".steps");
    if (steps < 16 || steps % 2 != 0)
      throw config_error(path + ".steps: need an even count >= 16");
    spec.curve =
        PiecewiseCurve(curve_from_expressions(n, comps, {}, span[0], span[1], steps));
    value = first_variation(*ctx.metric, ctx.connections[conn], spec);
    rep.outputs.push_back(KeyValue::num("first_variation", value));
  } else {
    const auto gi = detail::parse_geodesic_inputs(task.raw, ctx, path);
    const Curve g = integrate_geodesic(ctx.connections[gi.connection], gi.x0, gi.v0,
                                       gi.t0, gi.t1, gi.steps);
    if (order == 1) {
      spec.curve = PiecewiseCurve(g);
      value = first_variation(*ctx.metric, ctx.connections[conn], spec);
      rep.outputs.push_back(KeyValue::num("first_variation", value));
    } else {
      value = second_variation(*ctx.metric, ctx.connections[conn], g, spec);
      rep.outputs.push_back(KeyValue::num("second_variation", value));
    }
  }
  rep.inputs.push_back(KeyValue::integer_of("order", order));
  rep.inputs.push_back(KeyValue::str("connection", ctx.labels[conn]));
  return rep;
}

// ---------------------------------------------------------------------------
// Runner and serialization.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_kv(JsonWriter& w, const std::vector<KeyValue>& kvs) {
  w.begin_object();
  for (const auto& kv : kvs) {
    w.key(kv.key);
    switch (kv.kind) {
      case KeyValue::Kind::Number: w.value(kv.number); break;
      case KeyValue::Kind::Integer: w.value(kv.integer); break;
      case KeyValue::Kind::Text: w.value(kv.text); break;
      case KeyValue::Kind::Flag: w.value(kv.flag); break;
      case KeyValue::Kind::Numbers: w.array_of(kv.numbers); break;
    }
  }
  w.end_object();
}

}  // namespace detail

inline std::string serialize_report(const ScenarioConfig& config,
                                    const std::vector<TaskReport>& reports,
                                    bool all_pass) {
  JsonWriter w;
  w.begin_object();
  w.key("metric").begin_object();
  w.key("family").value(config.metric.family);
  w.key("n").value(config.metric.n);
  w.end_object();
  w.key("seed").value(static_cast<long long>(config.samples.seed));
  w.key("tasks").begin_array();
  for (const auto& rep : reports) {
    w.begin_object();
    w.key("task").value(rep.task);
    w.key("inputs");
    detail::write_kv(w, rep.inputs);
    w.key("outputs");
    detail::write_kv(w, rep.outputs);
    w.key("residuals").begin_array();
    for (const auto& r : rep.residuals) {
      w.begin_object();
      w.key("identity").value(r.identity);
      w.key("sample").value(r.sample);
      w.key("residual").value(r.residual);
      w.key("tolerance").value(r.tolerance);
      w.key("pass").value(r.pass);
      w.end_object();
    }
    w.end_array();
    w.key("tolerance").value(rep.tolerance);
    w.key("pass").value(rep.pass);
    w.key("runtime_ms").value(rep.runtime_ms);
    w.end_object();
  }
  w.end_array();
  w.key("pass").value(all_pass);
  w.end_object();
  return w.str() + "\n";
}

inline std::string serialize_residual_csv(const std::vector<TaskReport>& reports) {
  std::string out = "task_index,identity,sample,residual,tolerance,pass\n";
  char buf[64];
  int idx = 0;
  for (const auto& rep : reports) {
    for (const auto& r : rep.residuals) {
      std::snprintf(buf, sizeof(buf), "%d,", idx);
      out += buf;
      out += r.identity;
      std::snprintf(buf, sizeof(buf), ",%d,%.17g,%.17g,%s\n", r.sample, r.residual,
                    r.tolerance, r.pass ? "true" : "false");
      out += buf;
    }
    ++idx;
  }
  return out;
}

/// Executes the config's tasks (optionally restricted to one type) in
/// declaration order and assembles the report.
inline RunResult run_scenario(const ScenarioConfig& config,
                              const std::string& only_type = "") {
  RunContext ctx;
  ctx.config = &config;
  ctx.metric = config.metric.build();
  for (const auto& cc : config.connections) {
    ctx.connections.push_back(cc.build(ctx.metric));
    ctx.labels.push_back(ctx.connections.back().label());
  }
  ctx.samples = make_samples(*ctx.metric, config.samples);

  std::vector<TaskConfig> tasks;
  for (const auto& t : config.tasks)
    if (only_type.empty() || t.type == only_type) tasks.push_back(t);
  if (tasks.empty() && !only_type.empty()) {
    // synthesize a default task for parameter-free types
    if (only_type == "info" || only_type == "verify" || only_type == "curvature" ||
        only_type == "compare") {
      TaskConfig t;
      t.type = only_type;
      t.raw = json::object();
      tasks.push_back(std::move(t));
    } else {
      throw config_error("no '" + only_type + "' task found in the config");
    }
  }

  RunResult result;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string path = "tasks[" + std::to_string(i) + "]";
    const auto started = std::chrono::steady_clock::now();
    TaskReport rep;
    if (tasks[i].type == "verify") rep = run_verify(ctx, tasks[i], path);
    else if (tasks[i].type == "compare") rep = run_compare(ctx, tasks[i], path);
    else if (tasks[i].type == "info") rep = run_info(ctx, tasks[i], path);
    else if (tasks[i].type == "curvature")
      rep = run_curvature_task(ctx, tasks[i], path, result);
    else if (tasks[i].type == "geodesic")
      rep = run_geodesic_task(ctx, tasks[i], path, result);
    else if (tasks[i].type == "transport")
      rep = run_transport_task(ctx, tasks[i], path, result);
    else if (tasks[i].type == "jacobi")
      rep = run_jacobi_task(ctx, tasks[i], path, result);
    else if (tasks[i].type == "variation")
      rep = run_variation_task(ctx, tasks[i], path);
    else
      throw config_error(path + ".type: unknown task type '" + tasks[i].type + "'");
    if (config.output.timing) {
      const auto elapsed = std::chrono::steady_clock::now() - started;
      rep.runtime_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    }
    result.all_pass = result.all_pass && rep.pass;
    result.reports.push_back(std::move(rep));
  }
  result.report_json = serialize_report(config, result.reports, result.all_pass);
  return result;
}

}  // namespace finsler::scenario
