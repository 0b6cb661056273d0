#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "finsler/metric.hpp"
#include "oracles.hpp"

using namespace finsler;

namespace {

const expr::Params kNoParams{};

// x-dependent Randers-type fixture; non-Riemannian and genuinely curved.
MetricPtr curved_randers() {
  return make_expression_metric(
      2, "(sqrt((1 + 0.25*x2^2)*y1^2 + y2^2) + (0.2 + 0.1*x1)*y1)^2",
      "y1^2 + y2^2");
}

double metric_L(const Metric& m, std::span<const double> x,
                std::span<const double> v) {
  return m.lagrangian(x, v);
}

}  // namespace

TEST_CASE("euclidean fundamental tensor is the identity") {
  auto m = make_euclidean(2);
  const std::vector<double> x{0.3, -1.0}, v{1.0, 0.0};
  const TensorValue g = fundamental_tensor(*m, x, v);
  CHECK(g(0, 0) == Catch::Approx(1.0));
  CHECK(g(1, 1) == Catch::Approx(1.0));
  CHECK(g(0, 1) == Catch::Approx(0.0).margin(1e-15));
  CHECK(g(1, 0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("g_v(v,v) equals L(v) for every family") {
  oracles::TestRng rng(3);
  std::vector<MetricPtr> metrics{
      make_euclidean(2), make_sphere(2, 1.0),
      make_randers({1, 0, 0, 1}, {0.3, 0.0}), make_quartic(2), curved_randers()};
  for (const auto& m : metrics) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
      std::vector<double> v{rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)};
      if (!m->cone_contains(x, v)) continue;
      const TensorValue g = fundamental_tensor(*m, x, v);
      double gvv = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) gvv += g(i, j) * v[i] * v[j];
      const double L = metric_L(*m, x, v);
      CHECK(std::abs(gvv - L) <= 1e-10 * std::max(1.0, std::abs(L)));
    }
  }
}

TEST_CASE("euler identity for g_v(v,u)") {
  oracles::TestRng rng(5);
  auto m = curved_randers();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    std::vector<double> v{rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)};
    std::vector<double> u{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const TensorValue g = fundamental_tensor(*m, x, v);
    double gvu = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) gvu += g(i, j) * v[i] * u[j];
    // 1/2 d/dt L(x, v + t u) via jets
    auto sp = jet_space(1, 1);
    std::vector<Jet> xj{Jet::constant(sp, x[0]), Jet::constant(sp, x[1])};
    std::vector<Jet> yj{Jet::constant(sp, v[0]) + Jet::seeded(sp, 0.0, 0) * u[0],
                        Jet::constant(sp, v[1]) + Jet::seeded(sp, 0.0, 0) * u[1]};
    const Jet L = m->lagrangian(std::span<const Jet>(xj), std::span<const Jet>(yj));
    std::vector<int> one{1};
    CHECK(gvu == Catch::Approx(0.5 * L.derivative_value(one)).margin(1e-10));
  }
}

TEST_CASE("randers fundamental tensor matches the finite-difference hessian") {
  auto m = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  const std::vector<double> x{0, 0}, v{1.0, 0.0};
  const TensorValue g = fundamental_tensor(*m, x, v);
  oracles::RealFn L = [&](std::span<const double> y) {
    return m->lagrangian(std::span<const double>(x), y);
  };
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<std::vector<double>> dirs{{0.0, 0.0}, {0.0, 0.0}};
      dirs[0][i] = 1;
      dirs[1][j] = 1;
      const std::vector<int> orders{1, 1};
      const double fd = 0.5 * oracles::fd_mixed_derivative(L, v, dirs, orders, 1e-3);
      CHECK(std::abs(g(i, j) - fd) < 1e-8);
    }
}

TEST_CASE("cartan tensor vanishes for riemannian metrics") {
  auto m = make_sphere(2, 1.0);
  const std::vector<double> x{0.2, -0.1}, v{0.7, 0.4};
  const TensorValue c = cartan_tensor(*m, x, v);
  CHECK(c.max_abs() == 0.0);
}

TEST_CASE("cartan tensor annihilates the flag direction") {
  oracles::TestRng rng(9);
  for (const auto& m : {make_randers({1, 0, 0, 1}, {0.3, 0.0}), curved_randers()}) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
      std::vector<double> v{rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)};
      const TensorValue c = cartan_tensor(*m, x, v);
      double scale = std::max(1.0, c.max_abs());
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double cv = 0;
          for (int k = 0; k < 2; ++k) cv += c(k, i, j) * v[k];
          CHECK(std::abs(cv) / scale < 1e-10);
        }
    }
  }
}

TEST_CASE("cartan components match finite differences") {
  auto m = make_randers({1, 0, 0, 1}, {0.3, 0.0});
  const std::vector<double> x{0, 0}, v{0.9, 0.35};
  const TensorValue c = cartan_tensor(*m, x, v);
  oracles::RealFn L = [&](std::span<const double> y) {
    return m->lagrangian(std::span<const double>(x), y);
  };
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j)
      for (int k = j; k < 2; ++k) {
        std::vector<std::vector<double>> dirs{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
        dirs[0][i] = 1;
        dirs[1][j] = 1;
        dirs[2][k] = 1;
        const std::vector<int> orders{1, 1, 1};
        const double fd = 0.25 * oracles::fd_mixed_derivative(L, v, dirs, orders, 2e-3);
        CHECK(std::abs(c(i, j, k) - fd) < 1e-7);
      }
}

TEST_CASE("sprays vanish for x-independent metrics") {
  const std::vector<double> x{0.4, -0.2}, v{0.8, 0.6};
  for (const auto& m : {make_euclidean(2), make_randers({1, 0, 0, 1}, {0.3, 0.0})}) {
    const auto g = spray_coefficients(*m, x, v);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }
  const auto gq = spray_coefficients(*make_quartic(2), std::vector<double>{0, 0},
                                     std::vector<double>{0.7, 0.9});
  CHECK(gq[0] == 0.0);
  CHECK(gq[1] == 0.0);
}

TEST_CASE("sphere spray reproduces the classical geodesic acceleration") {
  auto m = make_sphere(2, 1.0);
  const std::vector<double> x{0.2, 0.0}, v{1.0, 1.0};
  const auto spray = spray_coefficients(*m, x, v);
  const auto gamma = oracles::sphere_levi_civita(x, 1.0);
  for (int k = 0; k < 2; ++k) {
    double acc = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) acc += gamma[(k * 2 + i) * 2 + j] * v[i] * v[j];
    CHECK(std::abs(2 * spray[k] - acc) < 1e-9);
  }
}

TEST_CASE("homogeneity ladder") {
  oracles::TestRng rng(13);
  auto m = curved_randers();
  for (double lambda : {0.5, 2.0, 7.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
      std::vector<double> v{rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.2)};
      std::vector<double> lv{lambda * v[0], lambda * v[1]};

      const TensorValue g = fundamental_tensor(*m, x, v);
      const TensorValue gl = fundamental_tensor(*m, x, lv);
      const TensorValue c = cartan_tensor(*m, x, v);
      const TensorValue cl = cartan_tensor(*m, x, lv);
      const auto s = spray_coefficients(*m, x, v);
      const auto sl = spray_coefficients(*m, x, lv);

      for (std::size_t i = 0; i < g.data().size(); ++i)
        CHECK(gl.data()[i] == Catch::Approx(g.data()[i]).margin(1e-9 * std::max(1.0, g.max_abs())));
      for (std::size_t i = 0; i < c.data().size(); ++i)
        CHECK(cl.data()[i] == Catch::Approx(c.data()[i] / lambda)
                                  .margin(1e-9 * std::max(1.0, c.max_abs())));
      for (int i = 0; i < 2; ++i)
        CHECK(sl[i] == Catch::Approx(lambda * lambda * s[i])
                           .margin(1e-9 * std::max(1.0, std::abs(s[i]))));
    }
  }
}

TEST_CASE("L two-homogeneity by sampling") {
  oracles::TestRng rng(17);
  std::vector<MetricPtr> metrics{make_sphere(2, 2.0), curved_randers(), make_quartic(3)};
  for (const auto& m : metrics) {
    const int n = m->dim();
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x(n), v(n);
      for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform(-0.5, 0.5);
        v[i] = rng.uniform(0.3, 1.2);
      }
      const double lambda = rng.uniform(0.5, 3.0);
      std::vector<double> lv(n);
      for (int i = 0; i < n; ++i) lv[i] = lambda * v[i];
      if (!m->cone_contains(x, v)) continue;
      CHECK(m->cone_contains(x, lv));
      const double L = m->lagrangian(std::span<const double>(x), std::span<const double>(v));
      const double Ll = m->lagrangian(std::span<const double>(x), std::span<const double>(lv));
      CHECK(Ll == Catch::Approx(lambda * lambda * L).epsilon(1e-12));
    }
  }
}

TEST_CASE("cone and degeneracy guards") {
  auto quartic = make_quartic(2);
  const std::vector<double> x{0, 0};
  CHECK_THROWS_AS(fundamental_tensor(*quartic, x, std::vector<double>{1.0, 0.0}),
                  cone_error);
  CHECK_THROWS_AS(fundamental_tensor(*make_euclidean(2), x, std::vector<double>{0, 0}),
                  cone_error);

  // cone(lambda v) == cone(v)
  CHECK(quartic->cone_contains(x, std::vector<double>{0.4, -2.0}));
  CHECK(quartic->cone_contains(x, std::vector<double>{0.04, -0.2}));

  // a custom metric whose g is degenerate at the sample: L linear-squared in
  // one variable only
  auto degenerate = make_expression_metric(2, "y1^2", "y1");
  CHECK_THROWS_AS(fundamental_tensor(*degenerate, x, std::vector<double>{1.0, 0.5}),
                  degenerate_metric_error);
}

TEST_CASE("riemannian family has v-independent g") {
  auto m = make_sphere(2, 1.0);
  const std::vector<double> x{0.3, 0.1};
  const TensorValue g1 = fundamental_tensor(*m, x, std::vector<double>{1.0, 0.2});
  const TensorValue g2 = fundamental_tensor(*m, x, std::vector<double>{-0.4, 0.9});
  for (std::size_t i = 0; i < g1.data().size(); ++i)
    CHECK(g1.data()[i] == Catch::Approx(g2.data()[i]).margin(1e-12));
}
