#pragma once

/// \file tensor.hpp
/// Dense tensor components at a fixed basepoint (x, v), with per-slot variance
/// tags, plus the jet-valued variant used inside the derivative pipelines.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "finsler/jet.hpp"

namespace finsler {

enum class Variance { Upper, Lower };

class degenerate_metric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class cone_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::size_t slot_count(int n, std::size_t rank) {
  std::size_t c = 1;
  for (std::size_t i = 0; i < rank; ++i) c *= n;
  return c;
}

inline std::size_t flat_index(int n, std::span<const int> idx) {
  std::size_t f = 0;
  for (int i : idx) {
    if (i < 0 || i >= n) throw std::out_of_range("tensor index out of range");
    f = f * n + i;
  }
  return f;
}

}  // namespace detail

/// Multi-index walker over {0..n-1}^rank in row-major order.
class IndexIter {
 public:
  IndexIter(int n, int rank) : n_(n), idx_(rank, 0), done_(false) {}
  bool done() const { return done_; }
  std::span<const int> operator*() const { return idx_; }
  void next() {
    for (int i = static_cast<int>(idx_.size()) - 1; i >= 0; --i) {
      if (++idx_[i] < n_) return;
      idx_[i] = 0;
    }
    done_ = true;
  }

 private:
  int n_;
  std::vector<int> idx_;
  bool done_;
};

template <class S>
class BasicTensor {
 public:
  BasicTensor() = default;
  BasicTensor(int n, std::vector<Variance> variances)
      : n_(n),
        variances_(std::move(variances)),
        data_(detail::slot_count(n, variances_.size())) {}
  BasicTensor(int n, std::vector<Variance> variances, S fill)
      : n_(n),
        variances_(std::move(variances)),
        data_(detail::slot_count(n, variances_.size()), fill) {}

  int dim() const { return n_; }
  int rank() const { return static_cast<int>(variances_.size()); }
  const std::vector<Variance>& variances() const { return variances_; }
  std::vector<S>& data() { return data_; }
  const std::vector<S>& data() const { return data_; }

  S& at(std::span<const int> idx) { return data_[detail::flat_index(n_, idx)]; }
  const S& at(std::span<const int> idx) const {
    return data_[detail::flat_index(n_, idx)];
  }

  template <class... I>
  S& operator()(I... i) {
    const int idx[] = {static_cast<int>(i)...};
    return at(std::span<const int>(idx, sizeof...(I)));
  }
  template <class... I>
  const S& operator()(I... i) const {
    const int idx[] = {static_cast<int>(i)...};
    return at(std::span<const int>(idx, sizeof...(I)));
  }

  IndexIter indices() const { return IndexIter(n_, rank()); }

 private:
  int n_ = 0;
  std::vector<Variance> variances_;
  std::vector<S> data_;
};

/// Real components of an anisotropic tensor at one (x, v).
class TensorValue : public BasicTensor<double> {
 public:
  TensorValue() = default;
  TensorValue(int n, std::vector<Variance> variances, std::vector<double> x,
              std::vector<double> v)
      : BasicTensor<double>(n, std::move(variances), 0.0),
        x_(std::move(x)),
        v_(std::move(v)) {}

  const std::vector<double>& base_x() const { return x_; }
  const std::vector<double>& base_v() const { return v_; }

  double max_abs() const {
    double m = 0;
    for (double d : data()) m = std::max(m, std::abs(d));
    return m;
  }

 private:
  std::vector<double> x_, v_;
};

/// Jet-valued tensor components: each entry is a function of (x, y) expanded
/// around the basepoint, with x_i on seed i and y_i on seed n+i.
class JetTensor : public BasicTensor<Jet> {
 public:
  JetTensor() = default;
  JetTensor(int n, std::vector<Variance> variances, const JetSpacePtr& sp)
      : BasicTensor<Jet>(n, std::move(variances), Jet::constant(sp, 0.0)) {}

  int order() const { return data().empty() ? 0 : data()[0].order(); }

  TensorValue value(std::vector<double> x, std::vector<double> v) const {
    TensorValue t(dim(), variances(), std::move(x), std::move(v));
    for (std::size_t i = 0; i < data().size(); ++i) t.data()[i] = data()[i].value();
    return t;
  }

  /// d/dx^k of every component (seed k).
  JetTensor x_derivative(int k) const { return mapped([&](const Jet& j) { return j.derivative(k); }); }
  /// d/dy^k of every component (seed dim()+k).
  JetTensor y_derivative(int k) const {
    return mapped([&](const Jet& j) { return j.derivative(dim() + k); });
  }

  template <class F>
  JetTensor mapped(F&& f) const {
    JetTensor r;
    static_cast<BasicTensor<Jet>&>(r) = BasicTensor<Jet>(dim(), variances());
    for (std::size_t i = 0; i < data().size(); ++i) r.data()[i] = f(data()[i]);
    return r;
  }
};

namespace linalg {

inline double value_of(double x) { return x; }
inline double value_of(const Jet& j) { return j.value(); }

inline bool constant_zero(double x) { return x == 0.0; }
inline bool constant_zero(const Jet& j) { return j.value() == 0.0 && j.is_constant(); }

/// Determinant of an n x n matrix of doubles by LU with partial pivoting.
inline double determinant(std::vector<double> a, int n) {
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    if (a[pivot * n + col] == 0.0) return 0.0;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
      det = -det;
    }
    det *= a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
    }
  }
  return det;
}

/// Gauss-Jordan inverse, generic over double/Jet entries. Pivots are chosen
/// by the magnitude of the value part. Throws degenerate_metric_error when a
/// pivot value vanishes.
template <class S>
std::vector<S> inverse(std::vector<S> a, int n) {
  std::vector<S> inv;
  inv.reserve(a.size());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      S e = a[r * n + c];  // clone shape
      e = e * 0.0;
      if (r == c) e += 1.0;
      inv.push_back(e);
    }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(value_of(a[r * n + col])) > std::abs(value_of(a[pivot * n + col])))
        pivot = r;
    if (value_of(a[pivot * n + col]) == 0.0)
      throw degenerate_metric_error("matrix is singular");
    if (pivot != col)
      for (int c = 0; c < n; ++c) {
        std::swap(a[pivot * n + c], a[col * n + c]);
        std::swap(inv[pivot * n + c], inv[col * n + c]);
      }
    const S d = a[col * n + col];
    for (int c = 0; c < n; ++c) {
      a[col * n + c] = a[col * n + c] / d;
      inv[col * n + c] = inv[col * n + c] / d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const S f = a[r * n + col];
      if (value_of(f) == 0.0 && constant_zero(f)) continue;
      for (int c = 0; c < n; ++c) {
        a[r * n + c] = a[r * n + c] - f * a[col * n + c];
        inv[r * n + c] = inv[r * n + c] - f * inv[col * n + c];
      }
    }
  }
  return inv;
}

}  // namespace linalg
}  // namespace finsler
