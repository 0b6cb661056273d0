// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
//  1. riemannian reduction (sphere christoffels + unit flag curvature)
//  2. flatness of euclidean and minkowski_quartic
//  3. metric compatibility (chern) and prescribed nabla g (distinguished)
//  4. bianchi identities for chern and berwald on randers
//  5. chern curvature symmetries on randers
//  6. curvature comparison via the difference tensor
//  7. connection-independence of the flag curvature
//  8. geodesic invariance across the distinguished family + L conservation
//  9. jacobi fields against closed-form and shooting oracles
// 10. first/second variation against finite differences of the energy
// 11. osculating-metric comparison
// 12. expression parser goldens and jet/finite-difference agreement
// 13. CLI determinism and exit-code contract

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/dynamics.hpp"
#include "finsler/tasks.hpp"
#include "oracles.hpp"

using namespace finsler;
namespace fs = std::filesystem;

namespace {

MetricPtr curved_randers() {
  return make_expression_metric(
      2, "(sqrt((1 + 0.25*x2^2)*y1^2 + y2^2) + (0.2 + 0.1*x1)*y1)^2",
      "y1^2 + y2^2");
}

struct Sample {
  Vec x, v, w;
};

std::vector<Sample> draw_samples(const Metric& m, int count, std::uint64_t seed,
                                 double xlo, double xhi, double vlo, double vhi,
                                 bool need_flag) {
  scenario::SampleRng rng(seed);
  const int n = m.dim();
  std::vector<Sample> out;
  while (static_cast<int>(out.size()) < count) {
    Sample s;
    s.x.resize(n);
    s.v.resize(n);
    s.w.resize(n);
    for (int i = 0; i < n; ++i) s.x[i] = rng.uniform(xlo, xhi);
    for (int i = 0; i < n; ++i) s.v[i] = rng.uniform(vlo, vhi);
    for (int i = 0; i < n; ++i) s.w[i] = rng.uniform(vlo, vhi);
    if (!m.cone_contains(s.x, s.v)) continue;
    if (need_flag) {
      // keep the flag clearly nondegenerate: Gram determinant of {v, w}
      double vv = 0, ww = 0, vw = 0;
      for (int i = 0; i < n; ++i) {
        vv += s.v[i] * s.v[i];
        ww += s.w[i] * s.w[i];
        vw += s.v[i] * s.w[i];
      }
      if (vv * ww - vw * vw < 0.01 * vv * ww) continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double metric_compat_residual(const MetricPtr& m, const ChristoffelField& c,
                              const Sample& s) {
  const int n = m->dim();
  const TensorValue nabla_g =
      covariant_derivative_tensor(c, fundamental_field(m), s.x, s.v);
  TensorValue expected(n, nabla_g.variances(), s.x, s.v);
  if (c.kind() != ConnectionKind::Chern) {
    QSpec q = c.kind() == ConnectionKind::Berwald ? QSpec::constants(2.0, 0.0)
                                                  : c.qspec();
    const TensorValue qv = qspec_field(m, q)(s.x, s.v, 0).value(s.x, s.v);
    for (int u = 0; u < n; ++u)
      for (int w = 0; w < n; ++w)
        for (int z = 0; z < n; ++z) expected(w, z, u) = qv(u, w, z);
  }
  finsler::detail::ResidualNorm norm;
  const JetTensor gj = fundamental_field(m)(s.x, s.v, 1);
  for (int i = 0; i < n; ++i)
    norm.scale = std::max(norm.scale, gj.x_derivative(i).value(s.x, s.v).max_abs());
  for (std::size_t i = 0; i < nabla_g.data().size(); ++i) {
    const double terms[2] = {nabla_g.data()[i], -expected.data()[i]};
    norm.add(terms);
  }
  return norm.normalized(c.kind() == ConnectionKind::Chern ? 0.0 : 1.0);
}

// --------------------------------------------------------------------------

bool criterion_riemannian_reduction(std::string& info) {
  auto m = make_sphere(2, 1.0);
  const auto chern = ChristoffelField::chern(m);
  const auto berwald = ChristoffelField::berwald(m);
  double worst_gamma = 0;
  for (const auto& s : draw_samples(*m, 10, 101, -0.6, 0.6, -1.2, 1.2, false)) {
    const auto oracle = oracles::sphere_levi_civita(s.x, 1.0);
    for (const auto& c : {chern, berwald}) {
      const TensorValue gamma = c.christoffels(s.x, s.v);
      for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            worst_gamma = std::max(
                worst_gamma, std::abs(gamma(k, i, j) - oracle[(k * 2 + i) * 2 + j]));
    }
  }
  // n = 3 chart as well
  auto m3 = make_sphere(3, 1.0);
  const auto chern3 = ChristoffelField::chern(m3);
  for (const auto& s : draw_samples(*m3, 5, 151, -0.5, 0.5, -1.2, 1.2, false)) {
    const auto oracle = oracles::sphere_levi_civita(s.x, 1.0);
    const TensorValue gamma = chern3.christoffels(s.x, s.v);
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          worst_gamma = std::max(
              worst_gamma, std::abs(gamma(k, i, j) - oracle[(k * 3 + i) * 3 + j]));
  }
  double worst_flag = 0;
  for (const auto& s : draw_samples(*m, 50, 202, -0.6, 0.6, -1.2, 1.2, true))
    worst_flag = std::max(
        worst_flag, std::abs(flag_curvature(*m, chern, s.x, s.v, s.w) - 1.0));
  for (const auto& s : draw_samples(*m3, 10, 252, -0.5, 0.5, -1.2, 1.2, true))
    worst_flag = std::max(
        worst_flag, std::abs(flag_curvature(*m3, chern3, s.x, s.v, s.w) - 1.0));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max |dGamma| %.2e, max |K-1| %.2e", worst_gamma,
                worst_flag);
  info = buf;
  return worst_gamma < 1e-10 && worst_flag < 1e-6;
}

bool criterion_flatness(std::string& info) {
  double worst = 0;
  for (const MetricPtr& m : {make_euclidean(2), make_quartic(2), make_quartic(3)}) {
    const auto chern = ChristoffelField::chern(m);
    const auto berwald = ChristoffelField::berwald(m);
    for (const auto& s :
         draw_samples(*m, 10, 303, -0.8, 0.8, 0.2, 1.2, true)) {
      for (const auto& c : {chern, berwald}) {
        worst = std::max(worst, c.christoffels(s.x, s.v).max_abs());
        worst = std::max(worst, curvature_tensor(c, s.x, s.v).comps.max_abs());
      }
      worst = std::max(worst, std::abs(flag_curvature(*m, chern, s.x, s.v, s.w)));
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max |Gamma|,|R|,|K| = %.2e", worst);
  info = buf;
  return worst <= 1e-10;
}

bool criterion_metric_compat(std::string& info) {
  auto randers = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  const auto chern = ChristoffelField::chern(randers);
  double worst_chern = 0;
  for (const auto& s : draw_samples(*randers, 100, 404, -0.5, 0.5, 0.3, 1.3, false))
    worst_chern = std::max(worst_chern, metric_compat_residual(randers, chern, s));

  double worst_dist = 0;
  const QSpec q = QSpec::constants(1.0, 0.5);
  for (const MetricPtr& m : {randers, curved_randers()}) {
    const auto dist = ChristoffelField::distinguished(m, q);
    for (const auto& s : draw_samples(*m, 20, 505, -0.5, 0.5, 0.3, 1.3, false))
      worst_dist = std::max(worst_dist, metric_compat_residual(m, dist, s));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "chern %.2e, distinguished %.2e", worst_chern,
                worst_dist);
  info = buf;
  return worst_chern <= 1e-9 && worst_dist <= 1e-8;
}

bool criterion_bianchi(std::string& info) {
  auto m = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  double worst = 0;
  for (const auto& c : {ChristoffelField::chern(m), ChristoffelField::berwald(m)}) {
    for (const auto& s : draw_samples(*m, 50, 606, -0.5, 0.5, 0.3, 1.3, false)) {
      const auto b = bianchi_residuals(c, s.x, s.v);
      worst = std::max({worst, b.first, b.second, b.vertical});
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max residual %.2e", worst);
  info = buf;
  return worst <= 1e-7;
}

bool criterion_symmetries(std::string& info) {
  auto m = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  double worst = 0;
  for (const auto& s : draw_samples(*m, 50, 707, -0.5, 0.5, 0.3, 1.3, false)) {
    const auto r = curvature_symmetry_residuals(m, s.x, s.v);
    worst = std::max({worst, r.sym_pair, r.six_term});
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max residual %.2e", worst);
  info = buf;
  return worst <= 1e-7;
}

bool criterion_comparison(std::string& info) {
  auto m = curved_randers();
  const auto chern = ChristoffelField::chern(m);
  const auto berwald = ChristoffelField::berwald(m);
  const auto dist = ChristoffelField::distinguished(m, QSpec::constants(1.0, 0.5));
  double worst_full = 0, worst_pole = 0;
  for (const auto& s : draw_samples(*m, 20, 808, -0.5, 0.5, 0.3, 1.3, false)) {
    const auto ab = compare_curvatures(chern, berwald, s.x, s.v);
    const auto dc = compare_curvatures(dist, chern, s.x, s.v);
    worst_full = std::max({worst_full, ab.full_residual, dc.full_residual});
    worst_pole = std::max({worst_pole, ab.flagpole_residual, dc.flagpole_residual});
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "full %.2e, flagpole %.2e", worst_full, worst_pole);
  info = buf;
  return worst_full <= 1e-7 && worst_pole <= 1e-8;
}

bool criterion_flag_independence(std::string& info) {
  auto m = curved_randers();
  const std::vector<ChristoffelField> conns{
      ChristoffelField::chern(m), ChristoffelField::berwald(m),
      ChristoffelField::distinguished(m, QSpec::constants(1.0, 0.5))};
  double worst = 0;
  for (const auto& s : draw_samples(*m, 100, 909, -0.5, 0.5, 0.25, 1.25, true)) {
    std::vector<double> ks;
    for (const auto& c : conns)
      ks.push_back(flag_curvature(*m, c, s.x, s.v, s.w));
    double scale = 1e-12;
    for (double k : ks) scale = std::max(scale, std::abs(k));
    for (std::size_t i = 0; i + 1 < ks.size(); ++i)
      worst = std::max(worst, std::abs(ks[i] - ks[i + 1]) / scale);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max relative spread %.2e", worst);
  info = buf;
  return worst <= 1e-7;
}

bool criterion_geodesics(std::string& info) {
  auto m = curved_randers();
  const Vec x0{0.1, -0.2}, v0{0.9, 0.5};
  const auto chern = ChristoffelField::chern(m);
  const Curve a = integrate_geodesic(chern, x0, v0, 0, 1, 512);
  const Curve b = integrate_geodesic(
      ChristoffelField::distinguished(m, QSpec::constants(1.0, 0.5)), x0, v0, 0, 1,
      512);
  const Curve c = integrate_geodesic(ChristoffelField::berwald(m), x0, v0, 0, 1, 512);
  double dev = 0;
  for (std::size_t i = 0; i < a.ts.size(); ++i)
    for (int k = 0; k < 2; ++k)
      dev = std::max({dev, std::abs(a.xs[i][k] - b.xs[i][k]),
                      std::abs(a.xs[i][k] - c.xs[i][k])});

  auto drift = [&](int steps) {
    const Curve g = integrate_geodesic(chern, x0, v0, 0, 2, steps);
    const double L0 = m->lagrangian(g.xs[0], g.vs[0]);
    double worst = 0;
    for (std::size_t i = 0; i < g.ts.size(); ++i)
      worst =
          std::max(worst, std::abs(m->lagrangian(g.xs[i], g.vs[i]) - L0) / L0);
    return worst;
  };
  const double d1024 = drift(1024), d32 = drift(32), d64 = drift(64);
  const double order = d32 / d64;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "deviation %.2e, drift@1024 %.2e, order factor %.1f",
                dev, d1024, order);
  info = buf;
  return dev <= 1e-9 && d1024 <= 1e-8 && order > 10 && order < 22;
}

bool criterion_jacobi(std::string& info) {
  // sphere: |J(t)| = sin(t) along a unit-speed geodesic
  auto sphere = make_sphere(2, 1.0);
  const auto sphere_chern = ChristoffelField::chern(sphere);
  const Curve g = integrate_geodesic(sphere_chern, Vec{0, 0}, Vec{0.5, 0}, 0, 2.5, 1024);
  const JacobiResult jr = integrate_jacobi(sphere_chern, g, Vec{0, 0}, Vec{0, 0.5});
  double worst_sphere = 0;
  for (std::size_t i = 0; i < jr.ts.size(); ++i) {
    const TensorValue gt = fundamental_tensor(*sphere, g.xs[2 * i], g.vs[2 * i]);
    double acc = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) acc += gt(a, b) * jr.values[i][a] * jr.values[i][b];
    worst_sphere = std::max(
        worst_sphere, std::abs(std::sqrt(std::max(0.0, acc)) -
                               std::abs(std::sin(jr.ts[i]))));
  }

  // randers: jacobi field against the geodesic-shooting oracle
  double shooting_rel = 0;
  for (const MetricPtr& m : {make_randers({1, 0, 0, 1}, {0.3, 0.0}), curved_randers()}) {
    const auto chern = ChristoffelField::chern(m);
    const Vec x0{0.1, -0.1}, v0{0.8, 0.5}, J0{0.3, -0.2}, J0dot{-0.1, 0.4};
    const Curve base = integrate_geodesic(chern, x0, v0, 0, 1.5, 512);
    const JacobiResult jb = integrate_jacobi(chern, base, J0, J0dot);
    const TensorValue gamma = chern.christoffels(x0, v0);
    Vec vdot = J0dot;
    const Vec corr = finsler::detail::gamma_vv(gamma, v0, J0);
    for (int k = 0; k < 2; ++k) vdot[k] -= corr[k];
    const double s = 1e-4;
    Vec xp(2), vp(2), xm(2), vm(2);
    for (int k = 0; k < 2; ++k) {
      xp[k] = x0[k] + s * J0[k];
      vp[k] = v0[k] + s * vdot[k];
      xm[k] = x0[k] - s * J0[k];
      vm[k] = v0[k] - s * vdot[k];
    }
    const Curve gp = integrate_geodesic(chern, xp, vp, 0, 1.5, 512);
    const Curve gm = integrate_geodesic(chern, xm, vm, 0, 1.5, 512);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < jb.ts.size(); ++i)
      for (int k = 0; k < 2; ++k) {
        const double fd = (gp.xs[2 * i][k] - gm.xs[2 * i][k]) / (2 * s);
        num += (jb.values[i][k] - fd) * (jb.values[i][k] - fd);
        den += jb.values[i][k] * jb.values[i][k];
      }
    shooting_rel = std::max(shooting_rel, std::sqrt(num / den));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "sphere %.2e, shooting L2 %.2e", worst_sphere,
                shooting_rel);
  info = buf;
  return worst_sphere <= 1e-5 && shooting_rel <= 1e-3;
}

bool criterion_variations(std::string& info) {
  // E'(0) on an analytic geodesic with fixed endpoints
  auto sphere = make_sphere(2, 1.0);
  const auto sphere_chern = ChristoffelField::chern(sphere);
  const Vec u{0.6, 0.8};
  auto xf = [u](double t) {
    const double s = std::tan(t / 2);
    return Vec{u[0] * s, u[1] * s};
  };
  auto vf = [u](double t) {
    const double s = std::tan(t / 2);
    return Vec{u[0] * 0.5 * (1 + s * s), u[1] * 0.5 * (1 + s * s)};
  };
  auto af = [u](double t) {
    const double s = std::tan(t / 2);
    return Vec{u[0] * 0.5 * s * (1 + s * s), u[1] * 0.5 * s * (1 + s * s)};
  };
  VariationSpec gspec;
  gspec.curve = PiecewiseCurve(curve_from_functions(2, xf, vf, af, 0, 1, 256));
  gspec.field = [](double t) {
    const double b = std::sin(M_PI * t);
    return Vec{0.7 * b, -0.3 * b};
  };
  gspec.field_deriv = [](double t) {
    const double b = M_PI * std::cos(M_PI * t);
    return Vec{0.7 * b, -0.3 * b};
  };
  const double e1_geodesic = std::abs(first_variation(*sphere, sphere_chern, gspec));

  // finite-difference matches on the curved fixture
  auto m = curved_randers();
  const auto chern = ChristoffelField::chern(m);
  auto cxf = [](double t) { return Vec{t + 0.2 * std::sin(t), 0.3 * std::cos(t)}; };
  auto cvf = [](double t) { return Vec{1 + 0.2 * std::cos(t), -0.3 * std::sin(t)}; };
  auto caf = [](double t) { return Vec{-0.2 * std::sin(t), -0.3 * std::cos(t)}; };
  VariationSpec spec;
  spec.curve = PiecewiseCurve(curve_from_functions(2, cxf, cvf, caf, 0, 1, 256));
  spec.field = [](double t) {
    const double b = std::sin(M_PI * t);
    return Vec{0.5 * b, 0.8 * b};
  };
  spec.field_deriv = [](double t) {
    const double b = M_PI * std::cos(M_PI * t);
    return Vec{0.5 * b, 0.8 * b};
  };
  const double e1 = first_variation(*m, chern, spec);
  auto energy_shifted = [&](double s) {
    auto xs = [&, s](double t) {
      Vec x = cxf(t);
      const Vec w = spec.field(t);
      return Vec{x[0] + s * w[0], x[1] + s * w[1]};
    };
    auto vs = [&, s](double t) {
      Vec v = cvf(t);
      const Vec wd = spec.field_deriv(t);
      return Vec{v[0] + s * wd[0], v[1] + s * wd[1]};
    };
    return energy(*m, curve_from_functions(2, xs, vs, caf, 0, 1, 256));
  };
  const double h1 = 1e-5;
  const double fd1 = (energy_shifted(h1) - energy_shifted(-h1)) / (2 * h1);
  const double e1_err = std::abs(e1 - fd1);

  // second variation on an integrated geodesic of the curved fixture
  const Curve geo = integrate_geodesic(chern, Vec{0.05, -0.1}, Vec{0.85, 0.4}, 0, 1, 512);
  const double e2 = second_variation(*m, chern, geo, spec);
  auto energy2 = [&](double s) {
    auto xs = [&, s](double t) {
      const int i = static_cast<int>(std::llround((t - geo.t0) / geo.step()));
      const Vec w = spec.field(t);
      return Vec{geo.xs[i][0] + s * w[0], geo.xs[i][1] + s * w[1]};
    };
    auto vs = [&, s](double t) {
      const int i = static_cast<int>(std::llround((t - geo.t0) / geo.step()));
      const Vec wd = spec.field_deriv(t);
      return Vec{geo.vs[i][0] + s * wd[0], geo.vs[i][1] + s * wd[1]};
    };
    return energy(*m, curve_from_functions(2, xs, vs, caf, geo.t0, geo.t1,
                                           geo.steps()));
  };
  const double h2 = 1e-3;
  const double fd2 = (-energy2(2 * h2) + 16 * energy2(h2) - 30 * energy2(0) +
                      16 * energy2(-h2) - energy2(-2 * h2)) /
                     (12 * h2 * h2);
  const double e2_rel = std::abs(e2 - fd2) / std::max(1.0, std::abs(fd2));

  char buf[128];
  std::snprintf(buf, sizeof(buf), "E'(geo) %.2e, |E'-fd| %.2e, |E''-fd|rel %.2e",
                e1_geodesic, e1_err, e2_rel);
  info = buf;
  return e1_geodesic <= 1e-8 && e1_err <= 1e-6 && e2_rel <= 1e-4;
}

bool criterion_osculating(std::string& info) {
  auto m = curved_randers();
  const std::vector<expr::AstPtr> generic{
      expr::parse("1 + 0.2*x2 + 0.1*x1^2", {"x1", "x2"}),
      expr::parse("0.6 - 0.15*x1", {"x1", "x2"})};
  double worst_generic = 0;
  for (const Vec& x : {Vec{0.2, -0.3}, Vec{-0.1, 0.25}, Vec{0.35, 0.1}}) {
    const auto rep =
        osculating_compare(m, QSpec::constants(1.0, 0.5), generic, {}, x);
    worst_generic = std::max(worst_generic, rep.closed_form_residual);
  }

  auto flat = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  const std::vector<expr::AstPtr> radial{
      expr::parse("x1/sqrt(x1^2 + x2^2)", {"x1", "x2"}),
      expr::parse("x2/sqrt(x1^2 + x2^2)", {"x1", "x2"})};
  const auto rep =
      osculating_compare(flat, QSpec::constants(1.0, 0.5), radial, {},
                         Vec{0.6, 0.45});
  char buf[128];
  std::snprintf(buf, sizeof(buf), "generic %.2e, geodesic-field curvature %.2e",
                worst_generic, rep.curvature_residual);
  info = buf;
  return worst_generic <= 1e-7 && rep.geodesic_defect <= 1e-10 &&
         rep.curvature_residual <= 1e-5;
}

bool criterion_parser(std::string& info) {
  auto value = [](const std::string& src) {
    const auto ast = expr::parse(src, {"x1"});
    const std::vector<double> vars{3.0};
    return expr::evaluate(*ast, std::span<const double>(vars), {});
  };
  bool golden = true;
  golden = golden && value("2-3-4") == -5.0;
  golden = golden && value("2^3^2") == 512.0;
  golden = golden && value("-2^2") == -4.0;
  golden = golden && value("6/3/2") == 1.0;
  golden = golden && value("2+3*4^2") == 50.0;
  golden = golden && value("2*-3") == -6.0;
  golden = golden && std::abs(value("2^-1") - 0.5) < 1e-15;
  try {
    expr::parse_metric_expression("y1 + * y2", 2);
    golden = false;
  } catch (const expr::parse_error& e) {
    golden = golden && e.position() == 6;
  }

  // jet derivatives of a parsed metric vs finite differences
  const auto ast = expr::parse_metric_expression(
      "(sqrt((1 + 0.25*x2^2)*y1^2 + y2^2) + (0.2 + 0.1*x1)*y1)^2", 2);
  oracles::RealFn fd = [&](std::span<const double> u) {
    const std::vector<double> vars{u[0], u[1], u[2], u[3]};
    return expr::evaluate(*ast, std::span<const double>(vars), {});
  };
  auto fj = [&](std::span<const Jet> u) {
    const std::vector<Jet> vars{u[0], u[1], u[2], u[3]};
    return expr::evaluate<Jet>(*ast, std::span<const Jet>(vars), {});
  };
  const std::vector<double> base{0.2, -0.3, 0.9, 0.5};
  double worst = 0;
  std::vector<std::vector<double>> dirs{
      {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  for (std::size_t d1 = 0; d1 < 4; ++d1)
    for (std::size_t d2 = d1; d2 < 4; ++d2) {
      std::vector<std::vector<double>> dd{dirs[d1], dirs[d2]};
      const std::vector<int> orders{1, 1};
      const double exact = derive(fj, base, dd, orders);
      const double approx = oracles::fd_mixed_derivative(fd, base, dd, orders, 1e-4);
      worst = std::max(worst,
                       std::abs(exact - approx) / std::max(1.0, std::abs(exact)));
    }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "goldens %s, max fd gap %.2e",
                golden ? "ok" : "BROKEN", worst);
  info = buf;
  return golden && worst <= 1e-6;
}

bool criterion_cli(std::string& info) {
  const fs::path dir = fs::temp_directory_path() / "finsler_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(FINSLER_CLI_PATH) + " " + args + " 2>" +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  auto config = [](const std::string& name) {
    return (fs::path(FINSLER_CONFIG_DIR) / name).string();
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const int ok1 = run("run --config " + config("curved_verify.json") + " --out " +
                      (dir / "a.json").string());
  const int ok2 = run("run --config " + config("curved_verify.json") + " --out " +
                      (dir / "b.json").string());
  const bool deterministic = slurp(dir / "a.json") == slurp(dir / "b.json") &&
                             !slurp(dir / "a.json").empty();
  const int bad = run("verify --config " + config("bad_dimension.json"));
  const int fail = run("verify --config " + config("sphere_too_tight.json") +
                       " --out " + (dir / "tight.json").string());
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "exits ok=%d,%d bad=%d fail=%d, byte-identical=%s", ok1, ok2, bad,
                fail, deterministic ? "yes" : "no");
  info = buf;
  return ok1 == 0 && ok2 == 0 && bad == 2 && fail == 1 && deterministic;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "riemannian reduction on the sphere", criterion_riemannian_reduction},
      {2, "flatness of euclidean and minkowski_quartic", criterion_flatness},
      {3, "metric compatibility and prescribed nabla g", criterion_metric_compat},
      {4, "bianchi identities on randers", criterion_bianchi},
      {5, "chern curvature symmetries on randers", criterion_symmetries},
      {6, "curvature comparison via the difference tensor", criterion_comparison},
      {7, "flag curvature is connection-independent", criterion_flag_independence},
      {8, "geodesic invariance and conservation", criterion_geodesics},
      {9, "jacobi fields against oracles", criterion_jacobi},
      {10, "energy variations against finite differences", criterion_variations},
      {11, "osculating-metric comparison", criterion_osculating},
      {12, "expression parser and jet evaluation", criterion_parser},
      {13, "CLI determinism and exit codes", criterion_cli},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool pass = false;
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!pass) ++failures;
    std::printf("criterion %2d %s %s (%s)\n", c.id, pass ? "PASS" : "FAIL", c.title,
                detail.c_str());
    std::fflush(stdout);
  }
  if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  else std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}
