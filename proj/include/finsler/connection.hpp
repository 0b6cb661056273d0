#pragma once

/// \file connection.hpp
/// Anisotropic connections as Christoffel fields Gamma^k_ij(x,y).
///
/// Everything is built from one object: the Taylor expansion of L at (x,v) in
/// all 2n phase-space variables. Derived quantities (fundamental tensor,
/// spray, nonlinear connection, the three connection kinds, Berwald and
/// Landsberg tensors) are assembled by jet arithmetic on that expansion, so
/// x- and y-derivatives of Christoffel symbols come out of the same pipeline
/// run at a higher order instead of finite differencing.
///
/// Connection kinds:
///   chern          Gamma^k_ij = 1/2 g^{kl} (dg_lj/dx^i + dg_li/dx^j - dg_ij/dx^l)
///                  with the horizontal derivative d/dx^i - N^h_i d/dy^h
///   berwald        Gamma^k_ij = d^2 G^k / dy^i dy^j
///   distinguished  Gamma^k_ij = chern - 1/2 g^{kl} Q_ijl,  Q = f*Landsberg + h*Cartan

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/metric.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

enum class ConnectionKind { Chern, Berwald, Distinguished, Custom };

/// Defines the prescribed metric derivative Q = f*Landsberg + h*Cartan of a
/// distinguished connection. f and h may be constants or expressions of
/// (x, y); non-homogeneous choices are allowed.
struct QSpec {
  std::string f_source = "0";
  std::string h_source = "0";
  expr::Params params;

  static QSpec constants(double f, double h) {
    QSpec q;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", f);
    q.f_source = buf;
    std::snprintf(buf, sizeof(buf), "%.17g", h);
    q.h_source = buf;
    return q;
  }

  std::string label() const {
    return "distinguished(f=" + f_source + ",h=" + h_source + ")";
  }
};

/// All jets share one 2n-seed space: x^i on seed i, y^i on seed n+i.
struct MetricJets {
  int n = 0;
  JetSpacePtr space;
  std::vector<Jet> x, y;
  Jet L;
  JetTensor g;     // (0,2), [i][j]
  JetTensor ginv;  // (2,0), [i][j]
  std::vector<Jet> spray;  // G^i
  JetTensor nonlinear;     // N^h_i = dG^h/dy^i, (1,1) [h][i]

  static MetricJets at(const Metric& m, std::span<const double> x,
                       std::span<const double> v, int order) {
    m.require_cone(x, v);
    MetricJets mj;
    mj.n = m.dim();
    const int n = mj.n;
    XYJets seeds = seeded_xy(n, x, v, order);
    mj.space = seeds.space;
    mj.x = std::move(seeds.x);
    mj.y = std::move(seeds.y);
    mj.L = m.lagrangian(std::span<const Jet>(mj.x), std::span<const Jet>(mj.y));

    mj.g = JetTensor(n, {Variance::Lower, Variance::Lower}, mj.space);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Jet gij = mj.L.derivative(n + i).derivative(n + j) * 0.5;
        mj.g(i, j) = gij;
        if (j != i) mj.g(j, i) = gij;
      }

    std::vector<double> gval(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gval[i * n + j] = mj.g(i, j).value();
    detail::require_nondegenerate(gval, n);

    mj.ginv = JetTensor(n, {Variance::Upper, Variance::Upper}, mj.space);
    {
      auto inv = linalg::inverse(mj.g.data(), n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mj.ginv(i, j) = inv[i * n + j];
    }

    // G^i = 1/4 g^{il} (d2L/dy^l dx^k y^k - dL/dx^l)
    mj.spray.reserve(n);
    std::vector<Jet> rhs;
    rhs.reserve(n);
    for (int l = 0; l < n; ++l) {
      Jet dLdx_l = mj.L.derivative(l);
      Jet acc = mj.L.derivative(n + l).derivative(0) * mj.y[0];
      for (int k = 1; k < n; ++k)
        acc += mj.L.derivative(n + l).derivative(k) * mj.y[k];
      rhs.push_back(acc - dLdx_l);
    }
    for (int i = 0; i < n; ++i) {
      Jet acc = mj.ginv(i, 0) * rhs[0];
      for (int l = 1; l < n; ++l) acc += mj.ginv(i, l) * rhs[l];
      mj.spray.push_back(acc * 0.25);
    }

    mj.nonlinear = JetTensor(n, {Variance::Upper, Variance::Lower}, mj.space);
    for (int h = 0; h < n; ++h)
      for (int i = 0; i < n; ++i) mj.nonlinear(h, i) = mj.spray[h].derivative(n + i);
    return mj;
  }
};

namespace detail {

inline JetTensor chern_christoffel_jets(const MetricJets& mj) {
  const int n = mj.n;
  // horizontal derivatives of g: delta_i g_ab = dg/dx^i - N^h_i dg/dy^h
  std::vector<JetTensor> dg(n);
  for (int i = 0; i < n; ++i) {
    JetTensor d = mj.g.x_derivative(i);
    for (int h = 0; h < n; ++h) {
      const JetTensor dy = mj.g.y_derivative(h);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) d(a, b) -= mj.nonlinear(h, i) * dy(a, b);
    }
    dg[i] = std::move(d);
  }
  JetTensor gamma(n, {Variance::Upper, Variance::Lower, Variance::Lower}, mj.space);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::vector<Jet> lower;
      lower.reserve(n);
      for (int l = 0; l < n; ++l)
        lower.push_back(dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
      for (int k = 0; k < n; ++k) {
        Jet acc = mj.ginv(k, 0) * lower[0];
        for (int l = 1; l < n; ++l) acc += mj.ginv(k, l) * lower[l];
        acc = acc * 0.5;
        gamma(k, i, j) = acc;
        if (j != i) gamma(k, j, i) = acc;
      }
    }
  return gamma;
}

inline JetTensor berwald_christoffel_jets(const MetricJets& mj) {
  const int n = mj.n;
  JetTensor gamma(n, {Variance::Upper, Variance::Lower, Variance::Lower}, mj.space);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      const Jet d1 = mj.spray[k].derivative(n + i);
      for (int j = i; j < n; ++j) {
        Jet d2 = d1.derivative(n + j);
        gamma(k, i, j) = d2;
        if (j != i) gamma(k, j, i) = d2;
      }
    }
  return gamma;
}

inline JetTensor cartan_jets(const MetricJets& mj) {
  const int n = mj.n;
  JetTensor c(n, {Variance::Lower, Variance::Lower, Variance::Lower}, mj.space);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const Jet dij = mj.L.derivative(n + i).derivative(n + j);
      for (int k = j; k < n; ++k) {
        Jet v = dij.derivative(n + k) * 0.25;
        c(i, j, k) = v;
        c(i, k, j) = v;
        c(j, i, k) = v;
        c(j, k, i) = v;
        c(k, i, j) = v;
        c(k, j, i) = v;
      }
    }
  return c;
}

/// B^l_ijk = d^3 G^l / dy^i dy^j dy^k (vertical derivative of the Berwald
/// connection), totally symmetric in the lower slots.
inline JetTensor berwald_tensor_jets(const MetricJets& mj) {
  const int n = mj.n;
  JetTensor b(n, {Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower},
              mj.space);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i) {
      const Jet d1 = mj.spray[l].derivative(n + i);
      for (int j = i; j < n; ++j) {
        const Jet d2 = d1.derivative(n + j);
        for (int k = j; k < n; ++k) {
          Jet v = d2.derivative(n + k);
          b(l, i, j, k) = v;
          b(l, i, k, j) = v;
          b(l, j, i, k) = v;
          b(l, j, k, i) = v;
          b(l, k, i, j) = v;
          b(l, k, j, i) = v;
        }
      }
    }
  return b;
}

/// Landsberg curvature L_ijk = 1/2 g(B(e_i,e_j,e_k), y).
inline JetTensor landsberg_jets(const MetricJets& mj, const JetTensor& berwald) {
  const int n = mj.n;
  // lower the upper slot against y: gy_m = g_{ml} y^l
  std::vector<Jet> gy;
  gy.reserve(n);
  for (int m = 0; m < n; ++m) {
    Jet acc = mj.g(m, 0) * mj.y[0];
    for (int l = 1; l < n; ++l) acc += mj.g(m, l) * mj.y[l];
    gy.push_back(acc);
  }
  JetTensor lt(n, {Variance::Lower, Variance::Lower, Variance::Lower}, mj.space);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet acc = berwald(0, i, j, k) * gy[0];
        for (int m = 1; m < n; ++m) acc += berwald(m, i, j, k) * gy[m];
        lt(i, j, k) = acc * 0.5;
      }
  return lt;
}

struct ParsedQ {
  expr::AstPtr f, h;
  expr::Params params;
  bool f_zero = true, h_zero = true;
};

inline ParsedQ parse_qspec(const QSpec& q, int n) {
  ParsedQ p;
  p.f = expr::parse_metric_expression(q.f_source, n);
  p.h = expr::parse_metric_expression(q.h_source, n);
  p.params = q.params;
  auto is_zero = [](const expr::Ast& a) {
    return a.kind == expr::Ast::Kind::Number && a.number == 0.0;
  };
  p.f_zero = is_zero(*p.f);
  p.h_zero = is_zero(*p.h);
  return p;
}

/// Q_ijk = f*Landsberg + h*Cartan evaluated as jets.
inline JetTensor qspec_jets(const MetricJets& mj, const ParsedQ& q) {
  const int n = mj.n;
  std::vector<Jet> vars(mj.x.begin(), mj.x.end());
  vars.insert(vars.end(), mj.y.begin(), mj.y.end());
  JetTensor acc(n, {Variance::Lower, Variance::Lower, Variance::Lower}, mj.space);
  if (!q.f_zero) {
    const Jet f = expr::evaluate<Jet>(*q.f, vars, q.params);
    const JetTensor lt = landsberg_jets(mj, berwald_tensor_jets(mj));
    for (std::size_t i = 0; i < acc.data().size(); ++i)
      acc.data()[i] += f * lt.data()[i];
  }
  if (!q.h_zero) {
    const Jet h = expr::evaluate<Jet>(*q.h, vars, q.params);
    const JetTensor c = cartan_jets(mj);
    for (std::size_t i = 0; i < acc.data().size(); ++i)
      acc.data()[i] += h * c.data()[i];
  }
  return acc;
}

inline JetTensor distinguished_christoffel_jets(const MetricJets& mj,
                                                const ParsedQ& q) {
  const int n = mj.n;
  JetTensor gamma = chern_christoffel_jets(mj);
  if (q.f_zero && q.h_zero) return gamma;
  const JetTensor qt = qspec_jets(mj, q);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet acc = mj.ginv(k, 0) * qt(i, j, 0);
        for (int l = 1; l < n; ++l) acc += mj.ginv(k, l) * qt(i, j, l);
        gamma(k, i, j) -= acc * 0.5;
      }
  return gamma;
}

}  // namespace detail

/// One anisotropic connection over a metric: evaluates Gamma^k_ij at (x,v) as
/// values or as jets in (x,y). Custom evaluators serve as test fixtures.
class ChristoffelField {
 public:
  using CustomFn = std::function<JetTensor(std::span<const double> x,
                                           std::span<const double> v, int extra)>;

  static ChristoffelField chern(MetricPtr m) {
    return ChristoffelField(std::move(m), ConnectionKind::Chern, {}, "chern");
  }
  static ChristoffelField berwald(MetricPtr m) {
    return ChristoffelField(std::move(m), ConnectionKind::Berwald, {}, "berwald");
  }
  static ChristoffelField distinguished(MetricPtr m, QSpec q) {
    std::string label = q.label();
    ChristoffelField c(std::move(m), ConnectionKind::Distinguished, std::move(q),
                       std::move(label));
    return c;
  }
  static ChristoffelField custom(MetricPtr m, std::string label, CustomFn fn) {
    ChristoffelField c(std::move(m), ConnectionKind::Custom, {}, std::move(label));
    c.custom_ = std::move(fn);
    return c;
  }

  ConnectionKind kind() const { return kind_; }
  const std::string& label() const { return label_; }
  const Metric& metric() const { return *metric_; }
  const MetricPtr& metric_ptr() const { return metric_; }
  int dim() const { return metric_->dim(); }

  /// L-jet order needed for Gamma values; jets of order `extra` need
  /// depth() + extra.
  int depth() const {
    switch (kind_) {
      case ConnectionKind::Chern: return 3;
      case ConnectionKind::Berwald: return 4;
      case ConnectionKind::Distinguished: return parsed_q_.f_zero ? 3 : 5;
      case ConnectionKind::Custom: return 0;
    }
    return 5;
  }

  JetTensor christoffel_jets(std::span<const double> x, std::span<const double> v,
                             int extra) const {
    if (kind_ == ConnectionKind::Custom) return custom_(x, v, extra);
    const MetricJets mj = MetricJets::at(*metric_, x, v, depth() + extra);
    switch (kind_) {
      case ConnectionKind::Chern: return detail::chern_christoffel_jets(mj);
      case ConnectionKind::Berwald: return detail::berwald_christoffel_jets(mj);
      default: return detail::distinguished_christoffel_jets(mj, parsed_q_);
    }
  }

  TensorValue christoffels(std::span<const double> x,
                           std::span<const double> v) const {
    return christoffel_jets(x, v, 0).value(std::vector<double>(x.begin(), x.end()),
                                           std::vector<double>(v.begin(), v.end()));
  }

  /// N^h_m = Gamma^h_ml v^l; used as the horizontal correction in covariant
  /// derivatives. Coincides with dG/dy for all built kinds.
  static std::vector<double> nonlinear_from(const TensorValue& gamma,
                                            std::span<const double> v) {
    const int n = gamma.dim();
    std::vector<double> nl(n * n, 0.0);
    for (int h = 0; h < n; ++h)
      for (int m = 0; m < n; ++m) {
        double acc = 0;
        for (int l = 0; l < n; ++l) acc += gamma(h, m, l) * v[l];
        nl[h * n + m] = acc;
      }
    return nl;
  }

  const QSpec& qspec() const { return qspec_; }

 private:
  ChristoffelField(MetricPtr m, ConnectionKind kind, QSpec q, std::string label)
      : metric_(std::move(m)), kind_(kind), qspec_(std::move(q)),
        label_(std::move(label)) {
    if (kind_ == ConnectionKind::Distinguished)
      parsed_q_ = detail::parse_qspec(qspec_, metric_->dim());
  }

  MetricPtr metric_;
  ConnectionKind kind_;
  QSpec qspec_;
  detail::ParsedQ parsed_q_;
  std::string label_;
  CustomFn custom_;
};

// ---------------------------------------------------------------------------
// Derived tensors.
// ---------------------------------------------------------------------------

inline TensorValue chern_christoffels(const MetricPtr& m, std::span<const double> x,
                                      std::span<const double> v) {
  return ChristoffelField::chern(m).christoffels(x, v);
}

inline TensorValue berwald_christoffels(const MetricPtr& m, std::span<const double> x,
                                        std::span<const double> v) {
  return ChristoffelField::berwald(m).christoffels(x, v);
}

inline TensorValue distinguished_christoffels(const MetricPtr& m, const QSpec& q,
                                              std::span<const double> x,
                                              std::span<const double> v) {
  return ChristoffelField::distinguished(m, q).christoffels(x, v);
}

/// Torsion T^k_ij = Gamma^k_ij - Gamma^k_ji; zero for all built kinds.
inline TensorValue torsion(const ChristoffelField& c, std::span<const double> x,
                           std::span<const double> v) {
  const TensorValue gamma = c.christoffels(x, v);
  const int n = gamma.dim();
  TensorValue t(n, {Variance::Upper, Variance::Lower, Variance::Lower},
                gamma.base_x(), gamma.base_v());
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t(k, i, j) = gamma(k, i, j) - gamma(k, j, i);
  return t;
}

/// Vertical derivative of the connection: P^l_ijk = dGamma^l_ij / dy^k.
inline TensorValue vertical_deriv_P(const ChristoffelField& c,
                                    std::span<const double> x,
                                    std::span<const double> v) {
  const JetTensor gamma = c.christoffel_jets(x, v, 1);
  const int n = gamma.dim();
  TensorValue p(n,
                {Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower},
                std::vector<double>(x.begin(), x.end()),
                std::vector<double>(v.begin(), v.end()));
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Jet& gij = gamma(l, i, j);
        for (int k = 0; k < n; ++k) p(l, i, j, k) = gij.derivative(n + k).value();
      }
  return p;
}

/// Q^k_ij = Gamma_A^k_ij - Gamma_B^k_ij.
inline TensorValue difference_tensor(const ChristoffelField& a,
                                     const ChristoffelField& b,
                                     std::span<const double> x,
                                     std::span<const double> v) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("difference_tensor: dimension mismatch");
  TensorValue ga = a.christoffels(x, v);
  const TensorValue gb = b.christoffels(x, v);
  for (std::size_t i = 0; i < ga.data().size(); ++i) ga.data()[i] -= gb.data()[i];
  return ga;
}

/// Berwald tensor B^l_ijk (third vertical derivatives of the spray).
inline TensorValue berwald_tensor(const Metric& m, std::span<const double> x,
                                  std::span<const double> v) {
  const MetricJets mj = MetricJets::at(m, x, v, 5);
  return detail::berwald_tensor_jets(mj).value(
      std::vector<double>(x.begin(), x.end()),
      std::vector<double>(v.begin(), v.end()));
}

/// Landsberg curvature L_ijk = 1/2 g(B(e_i,e_j,e_k), v).
inline TensorValue landsberg_tensor(const Metric& m, std::span<const double> x,
                                    std::span<const double> v) {
  const MetricJets mj = MetricJets::at(m, x, v, 5);
  return detail::landsberg_jets(mj, detail::berwald_tensor_jets(mj))
      .value(std::vector<double>(x.begin(), x.end()),
             std::vector<double>(v.begin(), v.end()));
}

// ---------------------------------------------------------------------------
// Covariant derivative of anisotropic tensor fields.
// ---------------------------------------------------------------------------

/// An anisotropic tensor field evaluator: returns the field's components as
/// jets in (x,y) around the basepoint, valid to at least the given order.
using TensorField = std::function<JetTensor(std::span<const double> x,
                                            std::span<const double> v, int extra)>;

/// Coordinate covariant derivative with the horizontal correction baked in:
///   (nabla T)_{...;m} = dT/dx^m - N^h_m dT/dy^h
///                       - sum_{lower j} Gamma^l_{m j} T[...l...]
///                       + sum_{upper k} Gamma^k_{m l} T[...l...]
/// with N^h_m = Gamma^h_{m l} v^l. The derivative slot is appended last.
inline TensorValue covariant_derivative_tensor(const ChristoffelField& c,
                                               const TensorField& field,
                                               std::span<const double> x,
                                               std::span<const double> v) {
  const int n = c.dim();
  const JetTensor tj = field(x, v, 1);
  const TensorValue gamma = c.christoffels(x, v);
  const std::vector<double> nl = ChristoffelField::nonlinear_from(gamma, v);

  std::vector<Variance> out_var = tj.variances();
  out_var.push_back(Variance::Lower);
  TensorValue out(n, out_var, std::vector<double>(x.begin(), x.end()),
                  std::vector<double>(v.begin(), v.end()));

  const int rank = tj.rank();
  std::vector<int> idx(rank + 1, 0);
  for (IndexIter it(n, rank); !it.done(); it.next()) {
    const auto base_idx = *it;
    const Jet& entry = tj.at(base_idx);
    for (int m = 0; m < n; ++m) {
      double acc = entry.derivative(m).value();
      for (int h = 0; h < n; ++h)
        acc -= nl[h * n + m] * entry.derivative(n + h).value();
      for (int s = 0; s < rank; ++s) {
        std::vector<int> swapped(base_idx.begin(), base_idx.end());
        for (int l = 0; l < n; ++l) {
          swapped[s] = l;
          const double tv = tj.at(swapped).value();
          if (tj.variances()[s] == Variance::Lower)
            acc -= gamma(l, m, base_idx[s]) * tv;
          else
            acc += gamma(base_idx[s], m, l) * tv;
        }
      }
      std::copy(base_idx.begin(), base_idx.end(), idx.begin());
      idx[rank] = m;
      out.at(idx) = acc;
    }
  }
  return out;
}

/// Vertical derivative of a tensor field: (d^nu T)(..., Z) = d/dt T_{v+tZ};
/// the new lower slot is appended last.
inline TensorValue vertical_derivative_tensor(const TensorField& field, int n,
                                              std::span<const double> x,
                                              std::span<const double> v) {
  const JetTensor tj = field(x, v, 1);
  std::vector<Variance> out_var = tj.variances();
  out_var.push_back(Variance::Lower);
  TensorValue out(n, out_var, std::vector<double>(x.begin(), x.end()),
                  std::vector<double>(v.begin(), v.end()));
  const int rank = tj.rank();
  std::vector<int> idx(rank + 1, 0);
  for (IndexIter it(n, rank); !it.done(); it.next()) {
    const auto base_idx = *it;
    const Jet& entry = tj.at(base_idx);
    for (int k = 0; k < n; ++k) {
      std::copy(base_idx.begin(), base_idx.end(), idx.begin());
      idx[rank] = k;
      out.at(idx) = entry.derivative(n + k).value();
    }
  }
  return out;
}

// Canned tensor fields.

inline TensorField fundamental_field(MetricPtr m) {
  return [m](std::span<const double> x, std::span<const double> v, int extra) {
    return MetricJets::at(*m, x, v, extra + 2).g;
  };
}

inline TensorField cartan_field(MetricPtr m) {
  return [m](std::span<const double> x, std::span<const double> v, int extra) {
    return detail::cartan_jets(MetricJets::at(*m, x, v, extra + 3));
  };
}

inline TensorField landsberg_field(MetricPtr m) {
  return [m](std::span<const double> x, std::span<const double> v, int extra) {
    const MetricJets mj = MetricJets::at(*m, x, v, extra + 5);
    return detail::landsberg_jets(mj, detail::berwald_tensor_jets(mj));
  };
}

/// Q = f*Landsberg + h*Cartan as a field.
inline TensorField qspec_field(MetricPtr m, const QSpec& q) {
  auto parsed = detail::parse_qspec(q, m->dim());
  const int depth = parsed.f_zero ? 3 : 5;
  return [m, parsed, depth](std::span<const double> x, std::span<const double> v,
                            int extra) {
    return detail::qspec_jets(MetricJets::at(*m, x, v, extra + depth), parsed);
  };
}

/// Christoffel symbols of one connection as a (1,2) field of jets. Not a
/// tensor by itself, but differences of two of these are.
inline TensorField christoffel_jet_field(ChristoffelField c) {
  return [c](std::span<const double> x, std::span<const double> v, int extra) {
    return c.christoffel_jets(x, v, extra);
  };
}

/// Difference tensor Q(u,w) = Gamma_A(u,w) - Gamma_B(u,w) as a field.
inline TensorField difference_field(ChristoffelField a, ChristoffelField b) {
  return [a, b](std::span<const double> x, std::span<const double> v, int extra) {
    JetTensor ga = a.christoffel_jets(x, v, extra);
    const JetTensor gb = b.christoffel_jets(x, v, extra);
    for (std::size_t i = 0; i < ga.data().size(); ++i)
      ga.data()[i] = ga.data()[i] - gb.data()[i];
    return ga;
  };
}

/// Torsion as a field (antisymmetrized Christoffel jets).
inline TensorField torsion_field(ChristoffelField c) {
  return [c](std::span<const double> x, std::span<const double> v, int extra) {
    const JetTensor gamma = c.christoffel_jets(x, v, extra);
    const int n = gamma.dim();
    JetTensor t = gamma;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) t(k, i, j) = gamma(k, i, j) - gamma(k, j, i);
    return t;
  };
}

/// Vertical derivative P of a connection as a (1,3) field.
inline TensorField vertical_P_field(ChristoffelField c) {
  return [c](std::span<const double> x, std::span<const double> v, int extra) {
    const JetTensor gamma = c.christoffel_jets(x, v, extra + 1);
    const int n = gamma.dim();
    JetTensor p(n, {Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower},
                jet_space(2 * n, gamma.order() - 1));
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            p(l, i, j, k) = gamma(l, i, j).derivative(n + k);
    return p;
  };
}

inline TensorField constant_scalar_field(int n, double value) {
  return [n, value](std::span<const double>, std::span<const double>, int extra) {
    JetTensor t(n, {}, jet_space(2 * n, extra));
    t.data()[0] = Jet::constant(jet_space(2 * n, extra), value);
    return t;
  };
}

}  // namespace finsler
