#include <doctest.h>

#include "c2st/error.hpp"
#include "c2st/gdelta.hpp"
#include "c2st/rng.hpp"

#include <cmath>
#include <vector>

using namespace c2st;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> scaled_direction(std::size_t m, std::uint64_t seed, double radius) {
  CounterRng rng(seed);
  std::vector<double> v(m);
  for (auto& x : v) x = rng.normal();
  const double n = norm(v);
  for (auto& x : v) x *= radius / n;
  return v;
}

}  // namespace

TEST_CASE("construction constants") {
  const GDelta g(0.5, 10);
  CHECK(g.r() == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(g.rho() == doctest::Approx(1.05).epsilon(1e-15));
  CHECK(g.x0() == doctest::Approx(0.025 / std::sqrt(10.0)).epsilon(1e-15));
  CHECK(g.breakpoints().back() > 1.0);
  CHECK(g.breakpoints()[g.depth() - 1] <= 1.0);
  CHECK(g.slopes().size() == g.depth());
  CHECK_THROWS_AS(GDelta(0.0, 2), Error);
  CHECK_THROWS_AS(GDelta(1.5, 2), Error);
  CHECK_THROWS_AS(GDelta(0.5, 0), Error);
}

TEST_CASE("depth and parameter count against the closed forms") {
  struct Row {
    double delta;
    std::size_t m, depth, count;
  };
  // Depth from floor(log(1/x0)/log(rho)) + 1, computed independently in Python.
  const Row rows[] = {{0.1, 2, 568, 9109},   {0.1, 10, 649, 52005},  {0.1, 100, 764, 612005},
                      {0.5, 2, 83, 1349},    {0.5, 10, 100, 8085},   {0.5, 100, 123, 99205},
                      {1.0, 2, 36, 597},     {1.0, 10, 44, 3605},    {1.0, 100, 56, 45605}};
  for (const auto& r : rows) {
    const GDelta g(r.delta, r.m);
    CHECK(g.depth() == r.depth);
    CHECK(g.parameter_count() == r.count);
    CHECK(static_cast<double>(g.depth()) <= GDelta::depth_bound(r.delta, r.m));
    CHECK(static_cast<double>(g.parameter_count()) <= GDelta::parameter_bound(r.delta, r.m));
  }
}

TEST_CASE("y bounds x^2 from above by chords") {
  for (double delta : {0.1, 0.5, 1.0}) {
    const GDelta g(delta, 3);
    const double r = g.r(), x0 = g.x0();
    for (int i = -3000; i <= 3000; ++i) {
      const double x = 1.2 * i / 3000.0;
      const double y = g.y(x);
      CHECK(y == doctest::Approx(g.y_relu(x)).epsilon(1e-13).scale(1.0));
      if (std::abs(x) <= 1.0) {
        CHECK(y >= x * x - 1e-15);
        CHECK(y <= (1.0 + r * r) * x * x + x0 * x0 + 1e-15);
      }
    }
    for (double x : g.breakpoints()) CHECK(g.y(x) == doctest::Approx(x * x).epsilon(1e-13));
    CHECK(g.y(5.0) == g.y(-7.0));
  }
}

TEST_CASE("tube gadget values") {
  for (double delta : {0.1, 0.5, 1.0}) {
    for (std::size_t m : {1u, 2u, 10u}) {
      const GDelta g(delta, m);
      CHECK(g(std::vector<double>(m, 0.0)) == 1.0);
      for (std::uint64_t s = 0; s < 200; ++s) {
        CHECK(g(scaled_direction(m, s, 0.866 * delta * (s % 7) / 6.0)) == 1.0);
        CHECK(g(scaled_direction(m, s, delta * (1.0 + 1e-9 + 0.01 * (s % 50)))) == 0.0);
        const auto v = scaled_direction(m, s, delta * (0.85 + 0.15 * (s % 11) / 10.0));
        const double val = g(v);
        CHECK(val >= 0.0);
        CHECK(val <= 1.0);
        CHECK(g.eval_relu(v) == doctest::Approx(val).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("gradient matches finite differences within the bound") {
  const double h = 1e-9;
  for (double delta : {0.1, 0.5, 1.0}) {
    const std::size_t m = 3;
    const GDelta g(delta, m);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 500; ++s) {
      const auto v = scaled_direction(m, 1000 + s, delta * (0.8 + 0.25 * (s % 101) / 100.0));
      if (!g.differentiable(v, 1e-6)) continue;
      const auto grad = g.gradient(v);
      for (std::size_t j = 0; j < m; ++j) {
        auto vp = v, vm = v;
        vp[j] += h * delta;
        vm[j] -= h * delta;
        const double fd = (g(vp) - g(vm)) / (2 * h * delta);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-4).scale(1.0 / delta));
      }
      worst = std::max(worst, norm(grad));
    }
    CHECK(worst > 0.0);
    CHECK(worst <= GDelta::kGradientConstant / delta);
  }
}
