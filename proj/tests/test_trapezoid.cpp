#include <doctest.h>

#include "c2st/error.hpp"
#include "c2st/rng.hpp"
#include "c2st/trapezoid.hpp"

#include <cmath>
#include <vector>

using namespace c2st;

TEST_CASE("trapezoid values") {
  CHECK(trapezoid_t(0.0) == 2.0);
  CHECK(trapezoid_t(3.0) == 0.0);
  CHECK(trapezoid_t(-3.0) == 0.0);
  CHECK(trapezoid_t(2.0) == 1.0);
  CHECK(trapezoid_t(-1.5) == 1.5);
  CHECK(trapezoid_t(7.0) == 0.0);
}

TEST_CASE("four-ReLU form matches the piecewise form") {
  CounterRng rng(31);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = -5.0 + 10.0 * rng.uniform();
    worst = std::max(worst, std::abs(trapezoid_t(x) - trapezoid_t_relu(x)));
  }
  CHECK(worst <= 1e-15);
  for (double x : {-3.0, -1.0, 1.0, 3.0}) CHECK(trapezoid_t(x) == trapezoid_t_relu(x));
}

TEST_CASE("trapezoid slope") {
  CHECK(trapezoid_slope(-2.0) == 1.0);
  CHECK(trapezoid_slope(2.5) == -1.0);
  CHECK(trapezoid_slope(0.3) == 0.0);
  CHECK(trapezoid_slope(4.0) == 0.0);
}

TEST_CASE("phi and psi at simple points") {
  TrapezoidBasis b{0, {0.0}, 1.0};
  const std::vector<double> zero{0.0};
  CHECK(phi_kb(zero, b) == 2.0);
  b.c_d = 2.5;
  CHECK(phi_kb(zero, b) == 5.0);
  b.c_d = 1.0;
  CHECK(psi_kb(zero, b) == 2.0);

  // Level 2 in d = 1: spacing 1/4, support radius 3/4.
  TrapezoidBasis b2{2, {0.25}, 1.0};
  const std::vector<double> edge{0.25 + 0.75};
  CHECK(phi_kb(edge, b2) == 0.0);
  const std::vector<double> at{0.25};
  // psi = 2 (phi_2 - phi_1 / 2) = 2 (2 - 1) at the center.
  CHECK(psi_kb(at, b2) == doctest::Approx(2.0).epsilon(1e-15));

  // d = 2: one coordinate outside the support kills phi.
  TrapezoidBasis b3{0, {0.0, 0.0}, 1.0};
  const std::vector<double> out{3.0, 0.0};
  CHECK(phi_kb(out, b3) == 0.0);
  const std::vector<double> in{0.0, 0.0};
  CHECK(phi_kb(in, b3) == 2.0);

  CHECK_THROWS_AS(phi_kb(in, b), Error);
  TrapezoidBasis bad{-1, {0.0}, 1.0};
  CHECK_THROWS_AS(phi_kb(zero, bad), Error);
}

TEST_CASE("support of phi is the sup-norm ball of radius 3 * 2^{-k/d}") {
  CounterRng rng(5);
  for (std::size_t d : {1u, 2u, 3u}) {
    for (int k = 0; k <= 4; ++k) {
      TrapezoidBasis b{k, std::vector<double>(d, 0.1), 1.0};
      const double radius = 3.0 / b.scale();
      for (int i = 0; i < 2000; ++i) {
        std::vector<double> u(d);
        double sup = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          u[j] = 0.1 + 2.0 * radius * (2.0 * rng.uniform() - 1.0);
          sup = std::max(sup, std::abs(u[j] - 0.1));
        }
        if (sup >= radius) CHECK(phi_kb(u, b) == 0.0);
      }
    }
  }
}

TEST_CASE("at most 12^d offsets are active at any point") {
  for (std::size_t d : {1u, 2u}) {
    const double cap = std::pow(12.0, static_cast<double>(d));
    for (int k = 0; k <= 3; ++k) {
      std::size_t worst = 0;
      const int n = d == 1 ? 400 : 40;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < (d == 1 ? 1 : n); ++j) {
          std::vector<double> u{-1.0 + 2.0 * i / n};
          if (d == 2) u.push_back(-1.0 + 2.0 * j / n + 0.013);
          worst = std::max(worst, active_offsets(u, k).size());
        }
      }
      CHECK(static_cast<double>(worst) <= cap);
      CHECK(worst >= 1);
    }
  }
}

TEST_CASE("gradients match finite differences and respect the bounds") {
  CounterRng rng(77);
  const double h = 1e-7;
  for (std::size_t d : {1u, 2u}) {
    for (int k = 0; k <= 5; ++k) {
      TrapezoidBasis b{k, std::vector<double>(d, 0.0), 1.3};
      const double radius = 3.0 / b.scale() * 2.0;
      double worst_phi = 0.0, worst_psi = 0.0;
      for (int i = 0; i < 3000; ++i) {
        std::vector<double> u(d);
        for (auto& x : u) x = radius * (2.0 * rng.uniform() - 1.0);
        if (!psi_differentiable(u, b, 1e-6)) continue;
        const auto gp = phi_gradient(u, b);
        const auto gs = psi_gradient(u, b);
        double np = 0.0, ns = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          auto up = u, um = u;
          up[j] += h;
          um[j] -= h;
          const double fd_phi = (phi_kb(up, b) - phi_kb(um, b)) / (2 * h);
          const double fd_psi = (psi_kb(up, b) - psi_kb(um, b)) / (2 * h);
          CHECK(gp[j] == doctest::Approx(fd_phi).epsilon(1e-5).scale(1.0));
          CHECK(gs[j] == doctest::Approx(fd_psi).epsilon(1e-5).scale(1.0));
          np += gp[j] * gp[j];
          ns += gs[j] * gs[j];
        }
        worst_phi = std::max(worst_phi, std::sqrt(np));
        worst_psi = std::max(worst_psi, std::sqrt(ns));
      }
      CHECK(worst_phi <= phi_gradient_bound(k, d, 1.3) + 1e-12);
      CHECK(worst_psi <= psi_gradient_bound(k, d, 1.3) + 1e-12);
    }
  }
}
