#include "c2st/quadrature.hpp"

#include "c2st/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace c2st {

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  static std::mutex mutex;
  static std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) {
      nodes = it->second.first;
      weights = it->second.second;
      return;
    }
  }
  std::vector<double> x(n), w(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0, p1 = z;
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute derivative at the converged root.
    double p0 = 1.0, p1 = z;
    for (std::size_t k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / static_cast<double>(k);
      p0 = p1;
      p1 = pk;
    }
    dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  {
    std::lock_guard lock(mutex);
    cache.emplace(n, std::make_pair(x, w));
  }
  nodes = std::move(x);
  weights = std::move(w);
}

namespace {

void axis_rule(const Interval& iv, std::size_t n, QuadratureRule rule, std::vector<double>& x,
               std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  if (rule == QuadratureRule::kTrapezoid) {
    const double h = iv.width() / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = iv.lo + h * static_cast<double>(i);
      w[i] = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    }
    return;
  }
  std::vector<double> t, tw;
  gauss_legendre(n, t, tw);
  const double mid = 0.5 * (iv.lo + iv.hi);
  const double half = 0.5 * iv.width();
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = mid + half * t[i];
    w[i] = half * tw[i];
  }
}

}  // namespace

QuadratureGrid::QuadratureGrid(std::vector<Interval> bounds, std::size_t nodes_per_axis, QuadratureRule rule)
    : bounds_(std::move(bounds)), nodes_per_axis_(nodes_per_axis), rule_(rule) {
  require(dim() == 1 || dim() == 2, "quadrature grid must be 1D or 2D, got dim " + std::to_string(dim()));
  require(nodes_per_axis_ >= kMinNodes,
          "nodes_per_axis must be >= " + std::to_string(kMinNodes) + ", got " + std::to_string(nodes_per_axis_));
  for (const auto& iv : bounds_) {
    require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.hi > iv.lo, "quadrature bounds must be finite with lo < hi");
  }
  std::vector<double> x0, w0;
  axis_rule(bounds_[0], nodes_per_axis_, rule_, x0, w0);
  if (dim() == 1) {
    nodes_ = std::move(x0);
    weights_ = std::move(w0);
    return;
  }
  std::vector<double> x1, w1;
  axis_rule(bounds_[1], nodes_per_axis_, rule_, x1, w1);
  const std::size_t n = nodes_per_axis_;
  nodes_.resize(2 * n * n);
  weights_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i * n + j;
      nodes_[2 * k] = x0[i];
      nodes_[2 * k + 1] = x1[j];
      weights_[k] = w0[i] * w1[j];
    }
  }
}

double QuadratureGrid::volume() const {
  double v = 1.0;
  for (const auto& iv : bounds_) v *= iv.width();
  return v;
}

QuadratureGrid QuadratureGrid::refined() const { return QuadratureGrid(bounds_, 2 * nodes_per_axis_, rule_); }

}  // namespace c2st
