#pragma once

/// \file curvature.hpp
/// Curvature tensor of an anisotropic connection, flag curvature, Bianchi
/// identity residuals, curvature symmetries of the Chern connection, and the
/// comparison of curvatures of two connections through their difference
/// tensor.
///
/// Index convention: R_v(d_m, d_j) d_i = R^k_{ijm} d_k, stored as
/// comps(k,i,j,m). The coordinate formula is
///   R^k_{ijm} = (dGamma^k_ji/dx^m - v^l Gamma^h_ml dGamma^k_ji/dy^h)
///             - (dGamma^k_mi/dx^j - v^l Gamma^h_jl dGamma^k_mi/dy^h)
///             + Gamma^l_ji Gamma^k_ml - Gamma^l_mi Gamma^k_jl.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "finsler/connection.hpp"

namespace finsler {

class degenerate_flag_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurvatureValue {
  TensorValue comps;  // (k,i,j,m)
  double operator()(int k, int i, int j, int m) const { return comps(k, i, j, m); }
  int dim() const { return comps.dim(); }
};

/// Curvature components as jets of (x,y); order >= extra.
inline JetTensor curvature_jets(const ChristoffelField& c, std::span<const double> x,
                                std::span<const double> v, int extra) {
  const int n = c.dim();
  const JetTensor gamma = c.christoffel_jets(x, v, extra + 1);
  const int ord = gamma.order();
  const JetSpacePtr sp = jet_space(2 * n, ord);

  std::vector<Jet> y;
  y.reserve(n);
  for (int i = 0; i < n; ++i) y.push_back(Jet::seeded(sp, v[i], n + i));

  std::vector<JetTensor> dgx(n), dgy(n);
  for (int m = 0; m < n; ++m) dgx[m] = gamma.x_derivative(m);
  for (int h = 0; h < n; ++h) dgy[h] = gamma.y_derivative(h);

  // ngamma(h,m) = Gamma^h_{m l} y^l (the nonlinear coefficients as functions)
  JetTensor ngamma(n, {Variance::Upper, Variance::Lower}, sp);
  for (int h = 0; h < n; ++h)
    for (int m = 0; m < n; ++m) {
      Jet acc = gamma(h, m, 0) * y[0];
      for (int l = 1; l < n; ++l) acc += gamma(h, m, l) * y[l];
      ngamma(h, m) = acc;
    }

  // hor[m](k,a,b) = dGamma^k_ab/dx^m - ngamma(h,m) dGamma^k_ab/dy^h
  std::vector<JetTensor> hor(n);
  for (int m = 0; m < n; ++m) {
    JetTensor h = dgx[m];
    for (int s = 0; s < n; ++s)
      for (std::size_t e = 0; e < h.data().size(); ++e)
        h.data()[e] -= ngamma(s, m) * dgy[s].data()[e];
    hor[m] = std::move(h);
  }

  JetTensor R(n,
              {Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower},
              jet_space(2 * n, ord - 1));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) {
          Jet val = hor[m](k, j, i) - hor[j](k, m, i);
          for (int l = 0; l < n; ++l)
            val += gamma(l, j, i) * gamma(k, m, l) - gamma(l, m, i) * gamma(k, j, l);
          R(k, i, j, m) = val;
        }
  return R;
}

inline CurvatureValue curvature_tensor(const ChristoffelField& c,
                                       std::span<const double> x,
                                       std::span<const double> v) {
  return {curvature_jets(c, x, v, 0).value(std::vector<double>(x.begin(), x.end()),
                                           std::vector<double>(v.begin(), v.end()))};
}

inline TensorField curvature_field(ChristoffelField c) {
  return [c](std::span<const double> x, std::span<const double> v, int extra) {
    return curvature_jets(c, x, v, extra);
  };
}

/// R_v(X, Y) Z as a vector: sum R^k_{ijm} Z^i Y^j X^m.
inline std::vector<double> curvature_apply(const CurvatureValue& R,
                                           std::span<const double> X,
                                           std::span<const double> Y,
                                           std::span<const double> Z) {
  const int n = R.dim();
  std::vector<double> out(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double acc = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) acc += R(k, i, j, m) * Z[i] * Y[j] * X[m];
    out[k] = acc;
  }
  return out;
}

/// K_v(w) = g(R_v(v,w)w, v) / (g(w,w) L(v) - g(v,w)^2).
inline double flag_curvature(const Metric& m, const ChristoffelField& c,
                             std::span<const double> x, std::span<const double> v,
                             std::span<const double> w) {
  const int n = m.dim();
  const TensorValue g = fundamental_tensor(m, x, v);
  const double L = m.lagrangian(x, v);
  double gww = 0, gvw = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      gww += g(i, j) * w[i] * w[j];
      gvw += g(i, j) * v[i] * w[j];
    }
  const double den = gww * L - gvw * gvw;
  const double scale = std::abs(gww * L) + gvw * gvw;
  if (std::abs(den) <= 1e-12 * std::max(scale, 1e-300))
    throw degenerate_flag_error("flag (v,w) is degenerate");
  const CurvatureValue R = curvature_tensor(c, x, v);
  const std::vector<double> rv = curvature_apply(R, v, w, w);
  double num = 0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) num += g(k, l) * rv[k] * v[l];
  return num / den;
}

namespace detail {

/// Tracks max |sum of terms| and max |individual term| across index tuples;
/// the normalized residual is their ratio.
struct ResidualNorm {
  double residual = 0, scale = 0;
  void add(std::span<const double> terms) {
    double sum = 0;
    for (double t : terms) {
      sum += t;
      scale = std::max(scale, std::abs(t));
    }
    residual = std::max(residual, std::abs(sum));
  }
  /// Max |sum| over the max |term|. A positive floor keeps the ratio
  /// meaningful when every term sits at roundoff level (both sides of an
  /// identity vanishing), where a pure ratio of roundoffs would read O(1).
  double normalized(double floor = 0) const {
    const double s = std::max(scale, floor);
    return s > 0 ? residual / s : residual;
  }
};

}  // namespace detail

struct BianchiResiduals {
  double first = 0, second = 0, vertical = 0;
};

/// Normalized max-norm residuals of the three Bianchi identities, evaluated
/// on all coordinate basis tuples. Torsion terms are included whenever the
/// connection has torsion (custom fixtures); built kinds are torsion-free.
inline BianchiResiduals bianchi_residuals(const ChristoffelField& c,
                                          std::span<const double> x,
                                          std::span<const double> v) {
  const int n = c.dim();
  const CurvatureValue R = curvature_tensor(c, x, v);
  const TensorValue P = vertical_deriv_P(c, x, v);
  const TensorValue T = torsion(c, x, v);
  const bool torsion_free = T.max_abs() == 0.0;

  const TensorValue gradR = covariant_derivative_tensor(c, curvature_field(c), x, v);
  const TensorValue vertR =
      vertical_derivative_tensor(curvature_field(c), n, x, v);
  const TensorValue gradP = covariant_derivative_tensor(c, vertical_P_field(c), x, v);
  TensorValue gradT;
  if (!torsion_free) gradT = covariant_derivative_tensor(c, torsion_field(c), x, v);

  BianchiResiduals out;

  // first: sum_cyc R(u,w)z - sum_cyc [T(T(u,w),z) + (nabla_u T)(w,z)] = 0
  {
    detail::ResidualNorm norm;
    std::vector<double> terms;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int k = 0; k < n; ++k) {
            terms.clear();
            const int cyc[3][3] = {{a, b, cc}, {b, cc, a}, {cc, a, b}};
            for (const auto& t : cyc) {
              const int u = t[0], w = t[1], z = t[2];
              terms.push_back(R(k, z, w, u));
              if (!torsion_free) {
                double tt = 0;
                for (int l = 0; l < n; ++l) tt += T(k, l, z) * T(l, u, w);
                terms.push_back(-tt);
                terms.push_back(-gradT(k, w, z, u));
              }
            }
            norm.add(terms);
          }
    out.first = norm.normalized();
  }

  // second: sum_cyc [(nabla_u R)(w,z)b - P(w,b,R(u,z)v) + R(T(u,w),z)b] = 0
  {
    detail::ResidualNorm norm;
    // constant-curvature metrics have parallel R: every term then sits at
    // roundoff, so normalize against the curvature scale itself
    norm.scale = R.comps.max_abs();
    std::vector<double> terms;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int d = 0; d < n; ++d)
            for (int k = 0; k < n; ++k) {
              terms.clear();
              const int cyc[3][3] = {{a, b, cc}, {b, cc, a}, {cc, a, b}};
              for (const auto& t : cyc) {
                const int u = t[0], w = t[1], z = t[2];
                terms.push_back(gradR.at(std::vector<int>{k, d, z, w, u}));
                double pterm = 0;
                for (int s = 0; s < n; ++s) {
                  double rho = 0;
                  for (int i = 0; i < n; ++i) rho += R(s, i, z, u) * v[i];
                  pterm += P(k, w, d, s) * rho;
                }
                terms.push_back(-pterm);
                if (!torsion_free) {
                  double rt = 0;
                  for (int s = 0; s < n; ++s) rt += R(k, d, z, s) * T(s, u, w);
                  terms.push_back(rt);
                }
              }
              norm.add(terms);
            }
    out.second = norm.normalized();
  }

  // vertical: (d^nu R)(u,w,z,b) = (nabla_u P)(w,z,b) - (nabla_w P)(u,z,b)
  //   + P(T(u,w),z,b) - P(w,z,P(u,v,b)) + P(u,z,P(w,v,b))
  {
    detail::ResidualNorm norm;
    norm.scale = std::max(R.comps.max_abs(), P.max_abs());
    std::vector<double> terms;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < n; ++cc)
          for (int d = 0; d < n; ++d)
            for (int k = 0; k < n; ++k) {
              terms.clear();
              terms.push_back(vertR.at(std::vector<int>{k, cc, b, a, d}));
              terms.push_back(-gradP.at(std::vector<int>{k, b, cc, d, a}));
              terms.push_back(gradP.at(std::vector<int>{k, a, cc, d, b}));
              if (!torsion_free) {
                double pt = 0;
                for (int s = 0; s < n; ++s) pt += P(k, s, cc, d) * T(s, a, b);
                terms.push_back(-pt);
              }
              double inner1 = 0, inner2 = 0;
              for (int s = 0; s < n; ++s) {
                double pa = 0, pb = 0;
                for (int i = 0; i < n; ++i) {
                  pa += P(s, a, i, d) * v[i];
                  pb += P(s, b, i, d) * v[i];
                }
                inner1 += P(k, b, cc, s) * pa;
                inner2 += P(k, a, cc, s) * pb;
              }
              terms.push_back(inner1);
              terms.push_back(-inner2);
              norm.add(terms);
            }
    out.vertical = norm.normalized();
  }
  return out;
}

struct SymmetryResiduals {
  double sym_pair = 0;  // g(R(u,w)z,b) + g(R(u,w)b,z) = 2 C(R(w,u)v,z,b)
  double six_term = 0;  // the six-Cartan-term pair-interchange identity
};

/// Curvature symmetries of the Chern connection with respect to g and C.
inline SymmetryResiduals curvature_symmetry_residuals(const MetricPtr& m,
                                                      std::span<const double> x,
                                                      std::span<const double> v) {
  const int n = m->dim();
  const ChristoffelField chern = ChristoffelField::chern(m);
  const CurvatureValue R = curvature_tensor(chern, x, v);
  const TensorValue g = fundamental_tensor(*m, x, v);
  const TensorValue C = cartan_tensor(*m, x, v);

  auto flag_vec = [&](int mm, int jj) {
    // rho^t = R^t_{i j m} v^i with X = d_mm, Y = d_jj, Z = v
    std::vector<double> rho(n, 0.0);
    for (int t = 0; t < n; ++t) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += R(t, i, jj, mm) * v[i];
      rho[t] = acc;
    }
    return rho;
  };
  auto gdot = [&](std::span<const double> vec, int slot) {
    double acc = 0;
    for (int k = 0; k < n; ++k) acc += g(k, slot) * vec[k];
    return acc;
  };
  auto cdot = [&](std::span<const double> vec, int s1, int s2) {
    double acc = 0;
    for (int t = 0; t < n; ++t) acc += C(t, s1, s2) * vec[t];
    return acc;
  };
  auto rvec = [&](int mm, int jj, int ii) {
    std::vector<double> r(n);
    for (int k = 0; k < n; ++k) r[k] = R(k, ii, jj, mm);
    return r;
  };

  SymmetryResiduals out;
  detail::ResidualNorm pair_norm, six_norm;
  std::vector<double> terms;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          // pair identity, (u,w,z,b) = (a,b,c,d)
          terms.clear();
          terms.push_back(gdot(rvec(a, b, c), d));
          terms.push_back(gdot(rvec(a, b, d), c));
          terms.push_back(-2.0 * cdot(flag_vec(b, a), c, d));
          pair_norm.add(terms);

          // six-term identity
          terms.clear();
          terms.push_back(gdot(rvec(a, b, c), d));
          terms.push_back(-gdot(rvec(c, d, a), b));
          terms.push_back(-cdot(flag_vec(b, c), a, d));
          terms.push_back(-cdot(flag_vec(c, a), b, d));
          terms.push_back(-cdot(flag_vec(a, d), c, b));
          terms.push_back(-cdot(flag_vec(d, b), c, a));
          terms.push_back(-cdot(flag_vec(c, d), a, b));
          terms.push_back(-cdot(flag_vec(b, a), c, d));
          six_norm.add(terms);
        }
  out.sym_pair = pair_norm.normalized();
  out.six_term = six_norm.normalized();
  return out;
}

struct CurvatureComparison {
  double full_residual = 0;      // hat R vs R + P-terms + Q'
  double flagpole_residual = 0;  // hat R(u,w)v vs R(u,w)v
  double q_flagpole_norm = 0;    // max |Q_v(u, v)|; flagpole identity needs 0
};

/// Residual of the curvature-comparison formula between two connections over
/// the same metric: hat R(u,w)z = R(u,w)z - P(w,z,Q(u,v)) + P(u,z,Q(w,v))
/// + Q'(u,w)z, with P and nabla taken from the un-hatted connection cB.
inline CurvatureComparison compare_curvatures(const ChristoffelField& cA,
                                              const ChristoffelField& cB,
                                              std::span<const double> x,
                                              std::span<const double> v) {
  if (cA.metric_ptr().get() != cB.metric_ptr().get())
    throw std::invalid_argument("compare_curvatures: metric mismatch");
  const int n = cA.dim();
  const CurvatureValue Rhat = curvature_tensor(cA, x, v);
  const CurvatureValue R = curvature_tensor(cB, x, v);
  const TensorValue P = vertical_deriv_P(cB, x, v);
  const TensorValue Q = difference_tensor(cA, cB, x, v);
  const TensorValue T = torsion(cB, x, v);
  const TensorField qfield = difference_field(cA, cB);
  const TensorValue gradQ = covariant_derivative_tensor(cB, qfield, x, v);
  const TensorValue vertQ = vertical_derivative_tensor(qfield, n, x, v);
  const bool torsion_free = T.max_abs() == 0.0;

  // qv[t][u] = Q^t_{u s} v^s
  std::vector<double> qv(n * n, 0.0);
  for (int t = 0; t < n; ++t)
    for (int u = 0; u < n; ++u) {
      double acc = 0;
      for (int s = 0; s < n; ++s) acc += Q(t, u, s) * v[s];
      qv[t * n + u] = acc;
    }

  CurvatureComparison out;
  for (double q : qv) out.q_flagpole_norm = std::max(out.q_flagpole_norm, std::abs(q));

  detail::ResidualNorm full;
  std::vector<double> terms;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int k = 0; k < n; ++k) {
          terms.clear();
          terms.push_back(Rhat(k, c, b, a));
          terms.push_back(-R(k, c, b, a));
          double p1 = 0, p2 = 0;
          for (int t = 0; t < n; ++t) {
            p1 += P(k, b, c, t) * qv[t * n + a];
            p2 += P(k, a, c, t) * qv[t * n + b];
          }
          terms.push_back(p1);
          terms.push_back(-p2);
          // Q'(u,w)z
          terms.push_back(-gradQ.at(std::vector<int>{k, b, c, a}));
          terms.push_back(gradQ.at(std::vector<int>{k, a, c, b}));
          if (!torsion_free) {
            double qt = 0;
            for (int t = 0; t < n; ++t) qt += Q(k, t, c) * T(t, a, b);
            terms.push_back(-qt);
          }
          double dq1 = 0, dq2 = 0, qq1 = 0, qq2 = 0;
          for (int t = 0; t < n; ++t) {
            dq1 += vertQ.at(std::vector<int>{k, a, c, t}) * qv[t * n + b];
            dq2 += vertQ.at(std::vector<int>{k, b, c, t}) * qv[t * n + a];
            qq1 += Q(k, a, t) * Q(t, b, c);
            qq2 += Q(k, b, t) * Q(t, a, c);
          }
          terms.push_back(-dq1);
          terms.push_back(dq2);
          terms.push_back(-qq1);
          terms.push_back(qq2);
          full.add(terms);
        }
  out.full_residual = full.normalized();

  detail::ResidualNorm pole;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < n; ++k) {
        double rhat = 0, r = 0;
        for (int i = 0; i < n; ++i) {
          rhat += Rhat(k, i, b, a) * v[i];
          r += R(k, i, b, a) * v[i];
        }
        const double t[2] = {rhat, -r};
        pole.add(t);
      }
  out.flagpole_residual = pole.normalized();
  return out;
}

}  // namespace finsler
