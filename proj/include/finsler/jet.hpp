#pragma once

/// \file jet.hpp
/// Truncated multivariate Taylor arithmetic ("jets").
///
/// A Jet carries the value of a scalar expression together with every mixed
/// partial derivative with respect to a set of seed variables, up to a fixed
/// total order. Arithmetic on jets is exact to floating-point roundoff: there
/// is no step-size error, only truncation at the chosen order, which is why
/// all derivatives of the metric pipeline are computed this way.
///
/// Coefficients are stored densely, one per multi-index of total degree
/// <= order, in graded lexicographic order. The coefficient at multi-index
/// alpha is the Taylor coefficient f^(alpha)(0)/alpha!, so mixed partials are
/// recovered by multiplying with alpha!.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

/// Thrown when an elementary operation is evaluated at a singular value part
/// (division by zero, sqrt/log of a non-positive value, fractional powers of
/// non-positive bases). These are hard errors rather than NaN propagation so
/// that admissible-cone violations surface immediately.
class domain_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
constexpr int kMaxSeeds = 15;
constexpr int kMaxOrder = 15;

inline std::uint64_t pack_mono(std::span<const std::uint8_t> e) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < e.size(); ++i)
    key |= static_cast<std::uint64_t>(e[i]) << (4 * i);
  return key;
}
}  // namespace detail

/// Shared descriptor of a jet coefficient layout: the list of multi-indices
/// for (seeds, order), plus precomputed multiplication and differentiation
/// tables. Spaces are cached and immutable; jets of the same seed count but
/// different orders agree on the layout of their common prefix because the
/// ordering is graded.
class JetSpace {
 public:
  JetSpace(int seeds, int order) : seeds_(seeds), order_(order) {
    if (seeds < 0 || seeds > detail::kMaxSeeds)
      throw std::invalid_argument("JetSpace: seed count out of range");
    if (order < 0 || order > detail::kMaxOrder)
      throw std::invalid_argument("JetSpace: order out of range");
    build_monomials();
    build_tables();
  }

  int seeds() const { return seeds_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(size_by_degree_.back()); }

  /// Number of multi-indices with total degree <= d (prefix length).
  int size_at_order(int d) const { return static_cast<int>(size_by_degree_[d]); }

  std::span<const std::uint8_t> mono(int i) const {
    return {monos_.data() + static_cast<std::size_t>(i) * seeds_,
            static_cast<std::size_t>(seeds_)};
  }

  int degree(int i) const { return degrees_[i]; }

  /// Index of the multi-index with the given exponents, or -1.
  int index_of(std::span<const int> exponents) const {
    if (static_cast<int>(exponents.size()) != seeds_) return -1;
    int total = 0;
    std::vector<std::uint8_t> e(seeds_);
    for (int i = 0; i < seeds_; ++i) {
      if (exponents[i] < 0) return -1;
      total += exponents[i];
      e[i] = static_cast<std::uint8_t>(exponents[i]);
    }
    if (total > order_) return -1;
    auto it = lookup_.find(detail::pack_mono(e));
    return it == lookup_.end() ? -1 : it->second;
  }

  double mono_factorial(int i) const { return factorials_[i]; }

  // Multiplication: dst accumulates a[a_idx] * b[b_idx]. Terms are grouped by
  // a_idx so zero coefficients of the left factor can be skipped wholesale.
  struct MulTerm {
    std::int32_t b_idx, dst;
  };
  std::span<const MulTerm> mul_terms_for(int a_idx) const {
    return {mul_terms_.data() + mul_offsets_[a_idx],
            mul_offsets_[a_idx + 1] - mul_offsets_[a_idx]};
  }

  // d/dseed: result[dst] = coeff[src] * factor, result lives one order lower.
  struct DiffTerm {
    std::int32_t src, dst;
    double factor;
  };
  std::span<const DiffTerm> diff_terms(int seed) const {
    return diff_terms_[seed];
  }

 private:
  void build_monomials() {
    size_by_degree_.assign(order_ + 1, 0);
    if (seeds_ == 0) {
      degrees_.push_back(0);
      for (auto& s : size_by_degree_) s = 1;
    } else {
      std::vector<std::uint8_t> current(seeds_, 0);
      for (int d = 0; d <= order_; ++d) {
        emit_degree(current, 0, d);
        size_by_degree_[d] = degrees_.size();
      }
    }
    for (int i = 0; i < static_cast<int>(degrees_.size()); ++i)
      lookup_.emplace(detail::pack_mono(mono(i)), i);
    factorials_.resize(degrees_.size());
    for (std::size_t i = 0; i < degrees_.size(); ++i) {
      double f = 1.0;
      for (auto e : mono(static_cast<int>(i)))
        for (int k = 2; k <= e; ++k) f *= k;
      factorials_[i] = f;
    }
  }

  void emit_degree(std::vector<std::uint8_t>& current, int pos, int remaining) {
    if (pos == seeds_ - 1) {
      current[pos] = static_cast<std::uint8_t>(remaining);
      monos_.insert(monos_.end(), current.begin(), current.end());
      int deg = 0;
      for (auto e : current) deg += e;
      degrees_.push_back(deg);
      current[pos] = 0;
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      current[pos] = static_cast<std::uint8_t>(e);
      emit_degree(current, pos + 1, remaining - e);
    }
    current[pos] = 0;
  }

  void build_tables() {
    const int count = size();
    mul_offsets_.assign(count + 1, 0);
    std::vector<int> sum(seeds_);
    for (int a = 0; a < count; ++a) {
      mul_offsets_[a] = mul_terms_.size();
      const int da = degrees_[a];
      auto ma = mono(a);
      for (int b = 0; b < count; ++b) {
        if (da + degrees_[b] > order_) continue;
        auto mb = mono(b);
        for (int s = 0; s < seeds_; ++s) sum[s] = ma[s] + mb[s];
        const int dst = index_of(sum);
        mul_terms_.push_back({static_cast<std::int32_t>(b),
                              static_cast<std::int32_t>(dst)});
      }
    }
    mul_offsets_[count] = mul_terms_.size();

    diff_terms_.resize(seeds_);
    std::vector<int> reduced(seeds_);
    for (int s = 0; s < seeds_; ++s) {
      for (int src = 0; src < count; ++src) {
        auto m = mono(src);
        if (m[s] == 0) continue;
        for (int k = 0; k < seeds_; ++k) reduced[k] = m[k];
        reduced[s] -= 1;
        const int dst = index_of(reduced);
        diff_terms_[s].push_back({static_cast<std::int32_t>(src),
                                  static_cast<std::int32_t>(dst),
                                  static_cast<double>(m[s])});
      }
    }
  }

  int seeds_, order_;
  std::vector<std::uint8_t> monos_;
  std::vector<int> degrees_;
  std::vector<std::size_t> size_by_degree_;
  std::map<std::uint64_t, int> lookup_;
  std::vector<double> factorials_;
  std::vector<MulTerm> mul_terms_;
  std::vector<std::size_t> mul_offsets_;
  std::vector<std::vector<DiffTerm>> diff_terms_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

/// Cached lookup of jet spaces; safe for concurrent use.
inline JetSpacePtr jet_space(int seeds, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, JetSpacePtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(seeds, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto sp = std::make_shared<JetSpace>(seeds, order);
  cache.emplace(key, sp);
  return sp;
}

/// A truncated Taylor series in the seed variables of its space. Value
/// semantics throughout; binary operations align operands to the smaller of
/// the two orders, which is the order to which the result is exact.
class Jet {
 public:
  Jet() = default;
  Jet(JetSpacePtr sp, double value) : sp_(std::move(sp)), c_(sp_->size(), 0.0) {
    c_[0] = value;
  }

  static Jet constant(const JetSpacePtr& sp, double value) { return Jet(sp, value); }

  /// value + 1 * t_seed (the canonical independent variable).
  static Jet seeded(const JetSpacePtr& sp, double value, int seed) {
    Jet j(sp, value);
    if (sp->order() >= 1) {
      std::vector<int> e(sp->seeds(), 0);
      e[seed] = 1;
      j.c_[sp->index_of(e)] = 1.0;
    }
    return j;
  }

  const JetSpacePtr& space() const { return sp_; }
  int order() const { return sp_->order(); }
  int seeds() const { return sp_->seeds(); }
  double value() const { return c_[0]; }

  bool is_constant() const {
    for (std::size_t i = 1; i < c_.size(); ++i)
      if (c_[i] != 0.0) return false;
    return true;
  }

  double coeff(std::span<const int> exponents) const {
    const int idx = sp_->index_of(exponents);
    if (idx < 0) throw std::out_of_range("Jet::coeff: bad multi-index");
    return c_[idx];
  }
  void set_coeff(std::span<const int> exponents, double v) {
    const int idx = sp_->index_of(exponents);
    if (idx < 0) throw std::out_of_range("Jet::set_coeff: bad multi-index");
    c_[idx] = v;
  }

  /// Mixed partial derivative: coefficient times the multi-index factorial.
  double derivative_value(std::span<const int> exponents) const {
    const int idx = sp_->index_of(exponents);
    if (idx < 0) throw std::out_of_range("Jet::derivative_value: bad multi-index");
    return c_[idx] * sp_->mono_factorial(idx);
  }

  /// Copy truncated to a lower order (same seeds). The graded layout makes
  /// this a prefix copy.
  Jet truncated(int new_order) const {
    if (new_order >= order()) return *this;
    Jet r;
    r.sp_ = jet_space(seeds(), new_order);
    r.c_.assign(c_.begin(), c_.begin() + r.sp_->size());
    return r;
  }

  /// Derivative with respect to one seed, as a jet one order lower.
  Jet derivative(int seed) const {
    if (order() < 1)
      throw std::logic_error("Jet::derivative: order-0 jet has no derivatives");
    Jet r;
    r.sp_ = jet_space(seeds(), order() - 1);
    r.c_.assign(r.sp_->size(), 0.0);
    for (const auto& t : sp_->diff_terms(seed)) {
      if (t.dst < static_cast<std::int32_t>(r.c_.size()))
        r.c_[t.dst] = c_[t.src] * t.factor;
    }
    return r;
  }

  Jet operator-() const {
    Jet r = *this;
    for (auto& v : r.c_) v = -v;
    return r;
  }

  Jet& operator+=(const Jet& o) { return apply(o, [](double& a, double b) { a += b; }); }
  Jet& operator-=(const Jet& o) { return apply(o, [](double& a, double b) { a -= b; }); }
  Jet& operator+=(double v) { c_[0] += v; return *this; }
  Jet& operator-=(double v) { c_[0] -= v; return *this; }
  Jet& operator*=(double v) {
    for (auto& x : c_) x *= v;
    return *this;
  }
  Jet& operator/=(double v) {
    if (v == 0.0) throw domain_error("jet division by zero");
    for (auto& x : c_) x /= v;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { a += b; return a; }
  friend Jet operator-(Jet a, const Jet& b) { a -= b; return a; }
  friend Jet operator+(Jet a, double b) { a += b; return a; }
  friend Jet operator+(double a, Jet b) { b += a; return b; }
  friend Jet operator-(Jet a, double b) { a -= b; return a; }
  friend Jet operator-(double a, const Jet& b) { return -b + a; }
  friend Jet operator*(Jet a, double b) { a *= b; return a; }
  friend Jet operator*(double a, Jet b) { b *= a; return b; }
  friend Jet operator/(Jet a, double b) { a /= b; return a; }
  friend Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    const Jet* pa = &a;
    const Jet* pb = &b;
    Jet ta, tb;
    if (a.order() > b.order()) { ta = a.truncated(b.order()); pa = &ta; }
    if (b.order() > a.order()) { tb = b.truncated(a.order()); pb = &tb; }
    const JetSpace& sp = *pa->sp_;
    Jet r(pa->sp_, 0.0);
    r.c_[0] = 0.0;
    const int count = sp.size();
    for (int i = 0; i < count; ++i) {
      const double ai = pa->c_[i];
      if (ai == 0.0) continue;
      for (const auto& t : sp.mul_terms_for(i)) r.c_[t.dst] += ai * pb->c_[t.b_idx];
    }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  /// Composition with an analytic function given by its Taylor coefficients
  /// d[k] = f^(k)(value)/k! around the value part. Horner on the nilpotent
  /// part, so exactly order()+1 coefficients are consumed.
  friend Jet compose_series(const Jet& u, std::span<const double> d) {
    Jet h = u;
    h.c_[0] = 0.0;
    const int p = u.order();
    Jet r = Jet::constant(u.sp_, d[p]);
    for (int k = p - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += d[k];
    }
    return r;
  }

  friend Jet reciprocal(const Jet& u) {
    const double u0 = u.value();
    if (u0 == 0.0) throw domain_error("jet division by zero value part");
    std::vector<double> d(u.order() + 1);
    double g = 1.0 / u0;
    for (int k = 0; k <= u.order(); ++k) {
      d[k] = g;
      g *= -1.0 / u0;
    }
    return compose_series(u, d);
  }

 private:
  template <class F>
  Jet& apply(const Jet& o, F&& f) {
    if (sp_->seeds() != o.sp_->seeds())
      throw std::logic_error("jet seed count mismatch");
    if (o.order() < order()) *this = truncated(o.order());
    const std::size_t count = std::min(c_.size(), o.c_.size());
    for (std::size_t i = 0; i < count; ++i) f(c_[i], o.c_[i]);
    return *this;
  }

  JetSpacePtr sp_;
  std::vector<double> c_;
};

inline Jet sqrt(const Jet& u) {
  const double u0 = u.value();
  if (u0 <= 0.0) throw domain_error("jet sqrt of non-positive value part");
  std::vector<double> d(u.order() + 1);
  const double root = std::sqrt(u0);
  d[0] = root;
  // d[k] = binom(1/2, k) * u0^(1/2 - k)
  double binom = 1.0;
  double power = root;
  for (int k = 1; k <= u.order(); ++k) {
    binom *= (0.5 - (k - 1)) / k;
    power /= u0;
    d[k] = binom * power;
  }
  return compose_series(u, d);
}

inline Jet exp(const Jet& u) {
  std::vector<double> d(u.order() + 1);
  const double e = std::exp(u.value());
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    d[k] = e / f;
    f *= (k + 1);
  }
  return compose_series(u, d);
}

inline Jet log(const Jet& u) {
  const double u0 = u.value();
  if (u0 <= 0.0) throw domain_error("jet log of non-positive value part");
  std::vector<double> d(u.order() + 1);
  d[0] = std::log(u0);
  double power = 1.0;
  for (int k = 1; k <= u.order(); ++k) {
    power /= u0;
    d[k] = ((k % 2) ? 1.0 : -1.0) * power / k;
  }
  return compose_series(u, d);
}

inline Jet sin(const Jet& u) {
  std::vector<double> d(u.order() + 1);
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cycle[4] = {s, c, -s, -c};
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    d[k] = cycle[k % 4] / f;
    f *= (k + 1);
  }
  return compose_series(u, d);
}

inline Jet cos(const Jet& u) {
  std::vector<double> d(u.order() + 1);
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cycle[4] = {c, -s, -c, s};
  double f = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    d[k] = cycle[k % 4] / f;
    f *= (k + 1);
  }
  return compose_series(u, d);
}

/// Integer powers work for any base (including zero and negative value
/// parts); fractional exponents require a positive value part.
inline Jet pow(const Jet& u, double e) {
  const double rounded = std::nearbyint(e);
  if (rounded == e && std::abs(e) < 1e9) {
    long long n = static_cast<long long>(rounded);
    if (n == 0) return Jet::constant(u.space(), 1.0);
    const bool negative = n < 0;
    unsigned long long m = negative ? -static_cast<unsigned long long>(n) : n;
    Jet base = u;
    Jet result = Jet::constant(u.space(), 1.0);
    while (m > 0) {
      if (m & 1ull) result = result * base;
      m >>= 1;
      if (m) base = base * base;
    }
    return negative ? reciprocal(result) : result;
  }
  const double u0 = u.value();
  if (u0 <= 0.0)
    throw domain_error("jet pow: fractional exponent needs positive base");
  std::vector<double> d(u.order() + 1);
  double binom = 1.0;
  double power = std::pow(u0, e);
  for (int k = 0; k <= u.order(); ++k) {
    d[k] = binom * power;
    binom *= (e - k) / (k + 1);
    power /= u0;
  }
  return compose_series(u, d);
}

inline Jet pow(const Jet& u, const Jet& e) {
  if (e.is_constant()) return pow(u, e.value());
  return exp(e * log(u));
}

/// Mixed directional derivative of a scalar function evaluable on jets:
/// d^orders f(base + sum_i t_i directions[i]) at t = 0. Exact to roundoff.
template <class F>
double derive(F&& f, std::span<const double> base,
              const std::vector<std::vector<double>>& directions,
              std::span<const int> orders) {
  if (directions.size() != orders.size())
    throw std::invalid_argument("derive: directions/orders size mismatch");
  int total = 0;
  for (int k : orders) {
    if (k < 0) throw std::invalid_argument("derive: negative order");
    total += k;
  }
  auto sp = jet_space(static_cast<int>(directions.size()), total);
  std::vector<Jet> u;
  u.reserve(base.size());
  std::vector<int> e(directions.size(), 0);
  for (std::size_t j = 0; j < base.size(); ++j) {
    Jet uj(sp, base[j]);
    if (total >= 1) {
      for (std::size_t i = 0; i < directions.size(); ++i) {
        if (directions[i][j] == 0.0) continue;
        e[i] = 1;
        uj.set_coeff(e, directions[i][j]);
        e[i] = 0;
      }
    }
    u.push_back(std::move(uj));
  }
  Jet result = f(std::span<const Jet>(u));
  return result.derivative_value(orders);
}

}  // namespace finsler
