#pragma once

/// \file metric.hpp
/// Pseudo-Finsler metric objects. A Metric evaluates L(x,y) on plain reals or
/// on jets (the same closed form or parsed expression drives both), and owns
/// the admissible-cone predicate. On top of that sit the pointwise tensors:
/// the fundamental tensor g, the Cartan tensor C, and the spray coefficients.
///
/// Built-in families:
///   euclidean(n)            L = sum_i (y^i)^2
///   riemannian_sphere(R)    L = 4R^4/(R^2+|x|^2)^2 |y|^2   (stereographic)
///   randers(a, b)           L = (sqrt(a(y,y)) + b(y))^2, constant a, b
///   minkowski_quartic(n)    L = sqrt(sum_i (y^i)^4), cone: all y^i != 0
///   custom expression       L and cone parsed from strings

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

class Metric {
 public:
  virtual ~Metric() = default;

  int dim() const { return n_; }
  const std::string& family() const { return family_; }

  virtual double lagrangian(std::span<const double> x,
                            std::span<const double> y) const = 0;
  virtual Jet lagrangian(std::span<const Jet> x, std::span<const Jet> y) const = 0;
  virtual bool cone_contains(std::span<const double> x,
                             std::span<const double> y) const = 0;

  void require_cone(std::span<const double> x, std::span<const double> y) const {
    if (!cone_contains(x, y))
      throw cone_error("direction outside the admissible cone of " + family_);
  }

 protected:
  Metric(int n, std::string family) : n_(n), family_(std::move(family)) {}

 private:
  int n_;
  std::string family_;
};

using MetricPtr = std::shared_ptr<const Metric>;

namespace detail {

template <class Derived>
class MetricFacade : public Metric {
 public:
  using Metric::Metric;
  double lagrangian(std::span<const double> x,
                    std::span<const double> y) const override {
    return static_cast<const Derived&>(*this).template eval<double>(x, y);
  }
  Jet lagrangian(std::span<const Jet> x, std::span<const Jet> y) const override {
    return static_cast<const Derived&>(*this).template eval<Jet>(x, y);
  }
};

inline bool all_zero(std::span<const double> y) {
  for (double v : y)
    if (v != 0.0) return false;
  return true;
}

}  // namespace detail

class EuclideanMetric final : public detail::MetricFacade<EuclideanMetric> {
 public:
  explicit EuclideanMetric(int n) : MetricFacade(n, "euclidean") {}
  template <class S>
  S eval(std::span<const S> /*x*/, std::span<const S> y) const {
    S acc = y[0] * y[0];
    for (std::size_t i = 1; i < y.size(); ++i) acc += y[i] * y[i];
    return acc;
  }
  bool cone_contains(std::span<const double>, std::span<const double> y) const override {
    return !detail::all_zero(y);
  }
};

/// Round sphere of radius R in the stereographic chart.
class SphereMetric final : public detail::MetricFacade<SphereMetric> {
 public:
  SphereMetric(int n, double radius)
      : MetricFacade(n, "riemannian_sphere"), radius_(radius) {
    if (radius <= 0) throw std::invalid_argument("sphere radius must be positive");
  }
  double radius() const { return radius_; }
  template <class S>
  S eval(std::span<const S> x, std::span<const S> y) const {
    const double r2 = radius_ * radius_;
    S xx = x[0] * x[0];
    S yy = y[0] * y[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
      xx += x[i] * x[i];
      yy += y[i] * y[i];
    }
    const S denom = (xx + r2) * (xx + r2);
    return (4.0 * r2 * r2) * yy / denom;
  }
  bool cone_contains(std::span<const double>, std::span<const double> y) const override {
    return !detail::all_zero(y);
  }

 private:
  double radius_;
};

/// Randers metric with constant data: L = (alpha + beta)^2 with
/// alpha = sqrt(a_ij y^i y^j) and beta = b_i y^i, requiring |b|_a < 1.
class RandersMetric final : public detail::MetricFacade<RandersMetric> {
 public:
  RandersMetric(std::vector<double> a, std::vector<double> b)
      : MetricFacade(static_cast<int>(b.size()), "randers"),
        a_(std::move(a)),
        b_(std::move(b)) {
    const int n = dim();
    if (static_cast<int>(a_.size()) != n * n)
      throw std::invalid_argument("randers: a must be n x n");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (a_[i * n + j] != a_[j * n + i])
          throw std::invalid_argument("randers: a must be symmetric");
    // |b|_a^2 = a^{ij} b_i b_j < 1
    auto ainv = linalg::inverse(a_, n);
    double norm2 = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) norm2 += ainv[i * n + j] * b_[i] * b_[j];
    if (!(norm2 < 1.0))
      throw std::invalid_argument("randers: |b|_a must be < 1");
  }

  template <class S>
  S eval(std::span<const S> /*x*/, std::span<const S> y) const {
    const int n = dim();
    S quad = y[0] * (a_[0] * y[0]);
    S beta = b_[0] * y[0];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == 0 && j == 0) continue;
        quad += a_[i * n + j] * y[i] * y[j];
      }
    for (int i = 1; i < n; ++i) beta += b_[i] * y[i];
    using std::sqrt;
    const S f = sqrt(quad) + beta;
    return f * f;
  }

  bool cone_contains(std::span<const double>, std::span<const double> y) const override {
    if (detail::all_zero(y)) return false;
    const int n = dim();
    double quad = 0, beta = 0;
    for (int i = 0; i < n; ++i) {
      beta += b_[i] * y[i];
      for (int j = 0; j < n; ++j) quad += a_[i * n + j] * y[i] * y[j];
    }
    return quad > 0 && std::sqrt(quad) + beta > 0;
  }

 private:
  std::vector<double> a_, b_;
};

/// Locally Minkowski non-Riemannian example: L = sqrt(sum (y^i)^4). Its
/// fundamental tensor degenerates on the coordinate hyperplanes, so the cone
/// keeps every component away from zero.
class QuarticMetric final : public detail::MetricFacade<QuarticMetric> {
 public:
  explicit QuarticMetric(int n) : MetricFacade(n, "minkowski_quartic") {}
  template <class S>
  S eval(std::span<const S> /*x*/, std::span<const S> y) const {
    S acc = y[0] * y[0] * y[0] * y[0];
    for (std::size_t i = 1; i < y.size(); ++i) acc += y[i] * y[i] * y[i] * y[i];
    using std::sqrt;
    return sqrt(acc);
  }
  bool cone_contains(std::span<const double>, std::span<const double> y) const override {
    for (double v : y)
      if (v == 0.0) return false;
    return true;
  }
};

/// Metric defined by a parsed expression for L(x,y) and a cone predicate
/// expression (admissible iff cone > 0).
class ExpressionMetric final : public detail::MetricFacade<ExpressionMetric> {
 public:
  ExpressionMetric(int n, std::string l_source, std::string cone_source,
                   expr::Params params = {})
      : MetricFacade(n, "custom"),
        l_source_(std::move(l_source)),
        cone_source_(std::move(cone_source)),
        params_(std::move(params)) {
    l_ast_ = expr::parse_metric_expression(l_source_, n);
    cone_ast_ = expr::parse_metric_expression(cone_source_, n);
  }

  template <class S>
  S eval(std::span<const S> x, std::span<const S> y) const {
    std::vector<S> vars(x.begin(), x.end());
    vars.insert(vars.end(), y.begin(), y.end());
    return expr::evaluate<S>(*l_ast_, vars, params_);
  }

  bool cone_contains(std::span<const double> x,
                     std::span<const double> y) const override {
    std::vector<double> vars(x.begin(), x.end());
    vars.insert(vars.end(), y.begin(), y.end());
    return expr::evaluate(*cone_ast_, std::span<const double>(vars), params_) > 0.0;
  }

  const std::string& lagrangian_source() const { return l_source_; }
  const std::string& cone_source() const { return cone_source_; }

 private:
  std::string l_source_, cone_source_;
  expr::Params params_;
  expr::AstPtr l_ast_, cone_ast_;
};

// ---------------------------------------------------------------------------
// Seeded jet coordinates.
// ---------------------------------------------------------------------------

struct XYJets {
  JetSpacePtr space;
  std::vector<Jet> x, y;
};

/// Full phase-space seeding: x^i on seed i, y^i on seed n+i.
inline XYJets seeded_xy(int n, std::span<const double> x, std::span<const double> v,
                        int order) {
  XYJets j;
  j.space = jet_space(2 * n, order);
  for (int i = 0; i < n; ++i) j.x.push_back(Jet::seeded(j.space, x[i], i));
  for (int i = 0; i < n; ++i) j.y.push_back(Jet::seeded(j.space, v[i], n + i));
  return j;
}

/// Vertical-only seeding (x held constant): y^i on seed i.
inline XYJets seeded_y(int n, std::span<const double> x, std::span<const double> v,
                       int order) {
  XYJets j;
  j.space = jet_space(n, order);
  for (int i = 0; i < n; ++i) j.x.push_back(Jet::constant(j.space, x[i]));
  for (int i = 0; i < n; ++i) j.y.push_back(Jet::seeded(j.space, v[i], i));
  return j;
}

namespace detail {

inline std::vector<int> unit_orders(int seeds, std::initializer_list<int> hits) {
  std::vector<int> o(seeds, 0);
  for (int h : hits) o[h] += 1;
  return o;
}

/// Scale-aware nondegeneracy guard: |det g| >= tol * max|g_ij|^n.
inline void require_nondegenerate(const std::vector<double>& g, int n,
                                  double tol = 1e-12) {
  double scale = 0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw degenerate_metric_error("fundamental tensor vanishes");
  double bound = tol;
  for (int i = 0; i < n; ++i) bound *= scale;
  if (std::abs(linalg::determinant(g, n)) < bound)
    throw degenerate_metric_error("fundamental tensor is degenerate");
}

}  // namespace detail

/// g_v(e_i, e_j) = 1/2 d^2/dt ds L(v + t e_i + s e_j); symmetric by
/// construction since both orderings read the same Taylor coefficient.
inline TensorValue fundamental_tensor(const Metric& m, std::span<const double> x,
                                      std::span<const double> v) {
  m.require_cone(x, v);
  const int n = m.dim();
  const XYJets j = seeded_y(n, x, v, 2);
  const Jet L = m.lagrangian(std::span<const Jet>(j.x), std::span<const Jet>(j.y));
  TensorValue g(n, {Variance::Lower, Variance::Lower},
                std::vector<double>(x.begin(), x.end()),
                std::vector<double>(v.begin(), v.end()));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      g(i, k) = 0.5 * L.derivative_value(detail::unit_orders(n, {i, k}));
  detail::require_nondegenerate(g.data(), n);
  return g;
}

/// C_v(e_i, e_j, e_k) = 1/4 d^3 L(v + sum s e)|_0; totally symmetric.
inline TensorValue cartan_tensor(const Metric& m, std::span<const double> x,
                                 std::span<const double> v) {
  m.require_cone(x, v);
  const int n = m.dim();
  const XYJets j = seeded_y(n, x, v, 3);
  const Jet L = m.lagrangian(std::span<const Jet>(j.x), std::span<const Jet>(j.y));
  TensorValue c(n, {Variance::Lower, Variance::Lower, Variance::Lower},
                std::vector<double>(x.begin(), x.end()),
                std::vector<double>(v.begin(), v.end()));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        c(i, k, l) = 0.25 * L.derivative_value(detail::unit_orders(n, {i, k, l}));
  return c;
}

/// Spray coefficients G^i = 1/4 g^{il} (d^2L/dy^l dx^k v^k - dL/dx^l).
/// Geodesics solve xddot + 2 G(x, xdot) = 0.
inline std::vector<double> spray_coefficients(const Metric& m,
                                              std::span<const double> x,
                                              std::span<const double> v) {
  m.require_cone(x, v);
  const int n = m.dim();
  const XYJets j = seeded_xy(n, x, v, 2);
  const Jet L = m.lagrangian(std::span<const Jet>(j.x), std::span<const Jet>(j.y));

  std::vector<double> g(n * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      g[i * n + k] = 0.5 * L.derivative_value(detail::unit_orders(2 * n, {n + i, n + k}));
  detail::require_nondegenerate(g, n);
  const auto ginv = linalg::inverse(g, n);

  std::vector<double> rhs(n, 0.0);
  for (int l = 0; l < n; ++l) {
    double acc = 0;
    for (int k = 0; k < n; ++k)
      acc += L.derivative_value(detail::unit_orders(2 * n, {n + l, k})) * v[k];
    acc -= L.derivative_value(detail::unit_orders(2 * n, {l}));
    rhs[l] = acc;
  }
  std::vector<double> spray(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0;
    for (int l = 0; l < n; ++l) acc += ginv[i * n + l] * rhs[l];
    spray[i] = 0.25 * acc;
  }
  return spray;
}

inline MetricPtr make_euclidean(int n) { return std::make_shared<EuclideanMetric>(n); }
inline MetricPtr make_sphere(int n, double radius) {
  return std::make_shared<SphereMetric>(n, radius);
}
inline MetricPtr make_randers(std::vector<double> a, std::vector<double> b) {
  return std::make_shared<RandersMetric>(std::move(a), std::move(b));
}
inline MetricPtr make_quartic(int n) { return std::make_shared<QuarticMetric>(n); }
inline MetricPtr make_expression_metric(int n, std::string l_source,
                                        std::string cone_source,
                                        expr::Params params = {}) {
  return std::make_shared<ExpressionMetric>(n, std::move(l_source),
                                            std::move(cone_source), std::move(params));
}

}  // namespace finsler
