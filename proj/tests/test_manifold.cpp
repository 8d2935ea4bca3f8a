#include <doctest.h>

#include "c2st/error.hpp"
#include "c2st/manifold.hpp"
#include "c2st/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

using namespace c2st;

namespace {

const AmbientFunction kCosine = [](const Eigen::VectorXd& x) { return x[0]; };  // cos(theta) on the circle
const AmbientFunction kZero = [](const Eigen::VectorXd&) { return 0.0; };
const AmbientFunction kWave = [](const Eigen::VectorXd& x) { return std::cos(2.0 * x[0]) + x[1]; };

const Atlas& circle_atlas() {
  static const Atlas atlas = build_atlas(Manifold::circle(), 0.3);
  return atlas;
}

const ConstructedNet& circle_net(int k_max) {
  static std::map<int, ConstructedNet> cache;
  auto it = cache.find(k_max);
  if (it == cache.end()) {
    FitOptions o;
    o.k_max = k_max;
    it = cache.emplace(k_max, construct_net(kCosine, Manifold::circle(), circle_atlas(), o)).first;
  }
  return it->second;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

TEST_CASE("manifold geometry") {
  const auto circle = Manifold::circle();
  const double t = 0.7;
  const auto p = circle.point(std::span<const double>(&t, 1));
  CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-15));
  const auto f = circle.tangent_frame(std::span<const double>(&t, 1));
  CHECK(std::abs(f.row(0).dot(p)) < 1e-15);
  const double a[] = {0.1}, b[] = {6.2};
  CHECK(circle.geodesic(a, b) == doctest::Approx(2.0 * std::numbers::pi - 6.1).epsilon(1e-13));

  // Arclength of (x, sigmoid(4x)) from -1 to 1.5 by adaptive quadrature.
  const auto curve = Manifold::curve();
  const double c0[] = {-1.0}, c1[] = {1.5};
  CHECK(curve.geodesic(c0, c1) == doctest::Approx(2.791182828393624).epsilon(1e-8));

  const auto sphere = Manifold::sphere_patch();
  const Samples s = sphere.sample_params(500, 4);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const auto x = sphere.point(row_span(s, i));
    CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x.z() >= std::cos(sphere.extent()) - 1e-14);
    const auto fr = sphere.tangent_frame(row_span(s, i));
    CHECK((fr * fr.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-14);
    CHECK((fr * x).norm() < 1e-14);
  }
}

TEST_CASE("lift inverts the tangent projection") {
  for (const auto& m : {Manifold::circle(), Manifold::curve(), Manifold::sphere_patch()}) {
    const Samples s = m.sample_params(50, 9);
    const double c_par[] = {0.3, 0.4};
    const std::span<const double> cp(c_par, m.intrinsic_dim());
    const Eigen::VectorXd c = m.point(cp);
    const Eigen::MatrixXd f = m.tangent_frame(cp);
    Chart chart{c, {cp.begin(), cp.end()}, f, 0.3, 1.0, 1.0};
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const auto x = m.point(row_span(s, i));
      if ((x - c).norm() > 0.5) continue;
      const Eigen::VectorXd u = chart.local_u(x);
      const auto back = m.lift(c, cp, f, as_span(u));
      REQUIRE(back.has_value());
      CHECK((*back - x).norm() < 1e-9);
    }
  }
  const auto circle = Manifold::circle();
  const double t = 0.0, far = 1.2;
  CHECK_FALSE(circle.lift(circle.point(std::span<const double>(&t, 1)), std::span<const double>(&t, 1),
                          circle.tangent_frame(std::span<const double>(&t, 1)), std::span<const double>(&far, 1))
                  .has_value());
}

TEST_CASE("circle atlas distortion and chart coordinates") {
  const Atlas& atlas = circle_atlas();
  CHECK(atlas.delta == 0.3);
  CHECK(atlas.halvings == 0);
  // Pairs within the chart ball span at most 2 asin(delta/2) on each side, where the
  // ratio of arc to tangent projection peaks at 1 / cos of that angle.
  for (const auto& c : atlas.charts) {
    CHECK(c.alpha == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(c.beta <= 1.0471204188481675 + 1e-9);
    CHECK(c.beta > 1.03);
    CHECK(c.local_u(c.center).norm() == 0.0);
    CHECK(c.local_v(c.center).norm() == 0.0);
  }
  // Centers form a delta/2-net of the circle.
  const auto circle = Manifold::circle();
  const Samples s = circle.sample_params(2000, 1);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const auto x = circle.point(row_span(s, i));
    double nearest = 1e9;
    for (const auto& c : atlas.charts) nearest = std::min(nearest, (x - c.center).norm());
    CHECK(nearest <= 0.15 + 1e-3);
  }
  CHECK(code_of([] {
          AtlasOptions o;
          o.delta_floor = 0.5;
          build_atlas(Manifold::circle(), 0.3, o);
        }) == ErrorCode::kAtlasConstruction);
  CHECK_THROWS_AS(build_atlas(Manifold::circle(), 1.5), Error);
}

TEST_CASE("partition of unity") {
  for (const auto& m : {Manifold::circle(), Manifold::curve(), Manifold::sphere_patch()}) {
    const Atlas atlas = build_atlas(m, 0.4);
    const Samples s = m.sample_params(1000, 2);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const auto x = m.point(row_span(s, i));
      const auto w = atlas.partition.weights(x);
      double total = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c) {
        CHECK(w[c] >= 0.0);
        if ((x - atlas.charts[c].center).norm() >= atlas.delta) CHECK(w[c] == 0.0);
        total += w[c];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
  CHECK(PartitionOfUnity::bump(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(PartitionOfUnity::bump(1.0) == 0.0);
}

TEST_CASE("zero target gives a zero network") {
  FitOptions o;
  o.k_max = 3;
  const auto net = construct_net(kZero, Manifold::circle(), circle_atlas(), o);
  for (const auto& c : net.coefficients()) {
    for (const auto& l : c.levels) CHECK(l.coeffs.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(net.f0() == 1.0);
  CHECK(measure_manifold_error(net, kZero, Manifold::circle(), 500, 3).linf == 0.0);
}

TEST_CASE("fit residual is nonincreasing in k_max") {
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 5; ++k) {
    FitOptions o;
    o.k_max = k;
    const auto fit = fit_coefficients(kCosine, Manifold::circle(), circle_atlas(), 0, o);
    CHECK(fit.residual_rms <= prev * (1.0 + 1e-6) + 1e-12);
    CHECK(fit.levels.size() == static_cast<std::size_t>(k + 1));
    prev = fit.residual_rms;
  }
  CHECK(prev < 5e-3);
}

TEST_CASE("gating passes the local expansion inside the tube and blocks it outside") {
  const auto& net = circle_net(3);
  const auto circle = Manifold::circle();
  const Samples s = circle.sample_params(300, 5);
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const auto x = circle.point(row_span(s, i));
    for (std::size_t c = 0; c < net.atlas().charts.size(); ++c) {
      const auto v = net.atlas().charts[c].local_v(x);
      if (net.tube()(as_span(v)) == 1.0) {
        CHECK(net.chart_output(c, x) == net.local_expansion(c, x));
        ++inside;
      } else if (v.norm() >= net.atlas().delta) {
        CHECK(std::abs(net.local_expansion(c, x)) <= net.f0());
        CHECK(net.chart_output(c, x) == 0.0);
      }
    }
  }
  CHECK(inside >= 300);
  // Off the manifold along the normal, beyond the tube.
  const auto& chart = net.atlas().charts.front();
  const Eigen::VectorXd x = chart.center * (1.0 + 1.01 * net.atlas().delta);
  CHECK(net.chart_output(0, x) == 0.0);
}

TEST_CASE("circle error, parameter growth and Lipschitz stability") {
  const auto circle = Manifold::circle();
  double prev_err = 1e9;
  std::size_t prev_wavelet = 0;
  for (int k : {2, 4, 6}) {
    const auto& net = circle_net(k);
    const double err = measure_manifold_error(net, kCosine, circle, 10000, 7).linf;
    CHECK(err < prev_err);
    prev_err = err;
    const auto& a = net.audit();
    CHECK(a.total == a.projection + a.wavelet + a.tube + a.gating + a.output);
    CHECK(a.tube == net.atlas().charts.size() * net.tube().parameter_count());
    CHECK(a.wavelet > prev_wavelet);
    if (prev_wavelet > 0) {
      // Two extra levels roughly quadruple the finest level at d = 1.
      const double ratio = static_cast<double>(a.wavelet) / static_cast<double>(prev_wavelet);
      CHECK(ratio > 1.5);
      CHECK(ratio < 4.5);
    }
    prev_wavelet = a.wavelet;
  }
  CHECK(prev_err < 0.05);
  const double l3 = lipschitz_estimate(circle_net(4), 2000, 1.3, 11);
  const double l6 = lipschitz_estimate(circle_net(6), 2000, 1.3, 11);
  CHECK(l3 > 0.0);
  CHECK(l6 <= 1.5 * l3);
}

TEST_CASE("coefficient decay fit on planted levels") {
  // max |c_k| = 2^{-2.5 k} gives a slope of exactly -2.5.
  const Atlas& atlas = circle_atlas();
  std::vector<ChartCoefficients> coeffs(atlas.charts.size());
  for (auto& c : coeffs) {
    for (int k = 0; k <= 4; ++k) {
      LevelCoefficients l;
      l.k = k;
      l.lo = -2;
      l.hi = 2;
      l.coeffs = Eigen::VectorXd::Constant(5, 0.25 * std::exp2(-2.5 * k));
      l.coeffs[2] = std::exp2(-2.5 * k);
      c.levels.push_back(l);
    }
  }
  const ConstructedNet net(ManifoldKind::kCircle, atlas, coeffs, 4, 1.0, 2.0);
  const auto fit = coefficient_decay(net);
  CHECK(fit.slope == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(fit.target == -2.5);
  CHECK(fit.level_max.size() == 5);
  CHECK(kmax_for_tolerance(0.01, 1) == 4);
  CHECK(kmax_for_tolerance(0.01, 2) == 7);
  CHECK(kmax_for_tolerance(2.0, 1) == 0);
}

TEST_CASE("ill-conditioned fit is reported") {
  FitOptions o;
  o.k_max = 3;
  o.condition_limit = 10.0;
  CHECK(code_of([&] { fit_coefficients(kCosine, Manifold::circle(), circle_atlas(), 0, o); }) ==
        ErrorCode::kFitting);
  o.condition_limit = 1e12;
  o.ridge = -1.0;
  CHECK_THROWS_AS(fit_coefficients(kCosine, Manifold::circle(), circle_atlas(), 0, o), Error);
}

TEST_CASE("save and load round trip") {
  const auto& net = circle_net(2);
  const std::string bin = "manifold_roundtrip.bin", side = "manifold_roundtrip.json";
  save_constructed(net, bin, side);
  const auto back = load_constructed(bin, side);
  CHECK(back.parameter_count() == net.parameter_count());
  const Samples s = Manifold::circle().sample_params(200, 8);
  Samples x(s.rows(), 2);
  for (Eigen::Index i = 0; i < s.rows(); ++i) x.row(i) = Manifold::circle().point(row_span(s, i)).transpose();
  CHECK((back.evaluate(x) - net.evaluate(x)).cwiseAbs().maxCoeff() == 0.0);

  // A sidecar that disagrees with the binary is rejected.
  std::ifstream in(side);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  const auto pos = text.find("\"hi\": ");
  REQUIRE(pos != std::string::npos);
  text.insert(pos + 6, "1");
  std::ofstream(side) << text;
  CHECK(code_of([&] { load_constructed(bin, side); }) == ErrorCode::kFormat);
  std::remove(bin.c_str());
  std::remove(side.c_str());
}

TEST_CASE("curve and sphere patch constructions improve with k_max") {
  for (const auto& m : {Manifold::curve(), Manifold::sphere_patch()}) {
    const Atlas atlas = build_atlas(m, m.intrinsic_dim() == 1 ? 0.4 : 0.5);
    double prev = 1e9;
    for (int k : {0, 2}) {
      FitOptions o;
      o.k_max = k;
      const auto net = construct_net(kWave, m, atlas, o);
      const double err = measure_manifold_error(net, kWave, m, 500, 6).linf;
      CHECK(std::isfinite(err));
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev < 0.3);
  }
}
