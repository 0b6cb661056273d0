#pragma once

/// \file riemannian.hpp
/// Classical Levi-Civita machinery for a position-dependent metric g_ij(x),
/// computed on x-jets. Used for the osculating-metric comparison and as the
/// Riemannian-reduction route in tests. Deliberately independent of the
/// anisotropic pipeline: only the jet arithmetic is shared.

#include <functional>
#include <span>
#include <vector>

#include "finsler/tensor.hpp"

namespace finsler {

/// A position metric as a jet field: returns g_ij expanded around x with
/// validity order >= extra. Seeds 0..n-1 must be the x directions (the space
/// may have more seeds; the extra ones just ride along).
using PositionMetricField =
    std::function<JetTensor(std::span<const double> x, int extra)>;

/// Levi-Civita Christoffel symbols as jets of order >= extra.
inline JetTensor levi_civita_jets(const PositionMetricField& gfield, int n,
                                  std::span<const double> x, int extra) {
  const JetTensor g = gfield(x, extra + 1);
  std::vector<double> gval(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gval[i * n + j] = g(i, j).value();
  detail::require_nondegenerate(gval, n);
  const auto ginv = linalg::inverse(g.data(), n);

  std::vector<JetTensor> dg(n);
  for (int i = 0; i < n; ++i) dg[i] = g.x_derivative(i);

  JetTensor gamma(n, {Variance::Upper, Variance::Lower, Variance::Lower},
                  jet_space(g.data()[0].seeds(), g.order() - 1));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::vector<Jet> lower;
      lower.reserve(n);
      for (int l = 0; l < n; ++l)
        lower.push_back(dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
      for (int k = 0; k < n; ++k) {
        Jet acc = ginv[k * n + 0] * lower[0];
        for (int l = 1; l < n; ++l) acc += ginv[k * n + l] * lower[l];
        acc = acc * 0.5;
        gamma(k, i, j) = acc;
        if (j != i) gamma(k, j, i) = acc;
      }
    }
  return gamma;
}

inline TensorValue levi_civita_christoffels(const PositionMetricField& gfield,
                                            int n, std::span<const double> x) {
  return levi_civita_jets(gfield, n, x, 0)
      .value(std::vector<double>(x.begin(), x.end()), {});
}

/// Classical curvature R^k_{ijm} = d_m G^k_ji - d_j G^k_mi + G G terms, in the
/// same index convention as the anisotropic CurvatureValue.
inline TensorValue riemann_curvature(const PositionMetricField& gfield, int n,
                                     std::span<const double> x) {
  const JetTensor gamma = levi_civita_jets(gfield, n, x, 1);
  std::vector<JetTensor> dg(n);
  for (int m = 0; m < n; ++m) dg[m] = gamma.x_derivative(m);
  TensorValue R(n,
                {Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower},
                std::vector<double>(x.begin(), x.end()), {});
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
          double val = dg[m](k, j, i).value() - dg[j](k, m, i).value();
          for (int l = 0; l < n; ++l)
            val += gamma(l, j, i).value() * gamma(k, m, l).value() -
                   gamma(l, m, i).value() * gamma(k, j, l).value();
          R(k, i, j, m) = val;
        }
  return R;
}

/// Position-metric field of a Riemannian L (quadratic in y): freeze g at an
/// arbitrary admissible direction since it does not depend on y.
inline PositionMetricField riemannian_gfield(MetricPtr m) {
  return [m](std::span<const double> x, int extra) {
    const int n = m->dim();
    const JetSpacePtr sp = jet_space(2 * n, extra + 2);
    std::vector<Jet> xj, yj;
    for (int i = 0; i < n; ++i) xj.push_back(Jet::seeded(sp, x[i], i));
    // any direction works for a quadratic L; keep it inside every built cone
    for (int i = 0; i < n; ++i) yj.push_back(Jet::seeded(sp, 1.0, n + i));
    const Jet L = m->lagrangian(std::span<const Jet>(xj), std::span<const Jet>(yj));
    JetTensor g(n, {Variance::Lower, Variance::Lower}, jet_space(2 * n, extra));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Jet gij = L.derivative(n + i).derivative(n + j) * 0.5;
        g(i, j) = gij;
        if (j != i) g(j, i) = gij;
      }
    return g;
  };
}

/// Osculating metric g_V(x) = g_{(x, V(x))} of a pseudo-Finsler metric along
/// a vector field V given by expressions of x. The y-derivatives are taken
/// before composing y = V(x), which the seeding arranges automatically.
inline PositionMetricField osculating_gfield(MetricPtr m,
                                             std::vector<expr::AstPtr> v_field,
                                             expr::Params params = {}) {
  return [m, v_field, params](std::span<const double> x, int extra) {
    const int n = m->dim();
    const JetSpacePtr sp = jet_space(2 * n, extra + 2);
    std::vector<Jet> xj;
    for (int i = 0; i < n; ++i) xj.push_back(Jet::seeded(sp, x[i], i));
    std::vector<Jet> yj;
    for (int i = 0; i < n; ++i) {
      Jet vi = expr::evaluate<Jet>(*v_field[i], xj, params);
      yj.push_back(vi + Jet::seeded(sp, 0.0, n + i));
    }
    const Jet L = m->lagrangian(std::span<const Jet>(xj), std::span<const Jet>(yj));
    JetTensor g(n, {Variance::Lower, Variance::Lower}, jet_space(2 * n, extra));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Jet gij = L.derivative(n + i).derivative(n + j) * 0.5;
        g(i, j) = gij;
        if (j != i) g(j, i) = gij;
      }
    return g;
  };
}

}  // namespace finsler
