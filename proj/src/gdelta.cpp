#include "c2st/gdelta.hpp"

#include "c2st/error.hpp"

#include <algorithm>
#include <cmath>

namespace c2st {

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

GDelta::GDelta(double delta, std::size_t m) : delta_(delta), m_(m) {
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(m >= 1, "dimension must be at least 1");
  r_ = delta / 20.0;
  rho_ = 1.0 + 2.0 * r_;
  x_.push_back(r_ / std::sqrt(static_cast<double>(m)));
  while (x_.back() <= 1.0) x_.push_back(x_.back() * rho_);
  for (std::size_t l = 1; l < x_.size(); ++l) a_.push_back(x_[l - 1] + x_[l]);
  const std::size_t L = a_.size();
  hinge_w_.assign(L + 1, 0.0);
  hinge_w_[0] = a_[0];
  for (std::size_t l = 1; l < L; ++l) hinge_w_[l] = a_[l] - a_[l - 1];
  hinge_w_[L] = -a_[L - 1];
}

double GDelta::y(double x) const {
  const double ax = std::abs(x);
  if (ax <= x_.front()) return x_.front() * x_.front();
  if (ax >= x_.back()) return x_.back() * x_.back();
  const auto it = std::lower_bound(x_.begin(), x_.end(), ax);
  const auto l = static_cast<std::size_t>(it - x_.begin());
  return x_[l - 1] * x_[l - 1] + a_[l - 1] * (ax - x_[l - 1]);
}

double GDelta::y_relu(double x) const {
  const double x0sq = x_.front() * x_.front();
  double plus = x0sq, minus = x0sq;
  for (std::size_t l = 0; l < x_.size(); ++l) {
    plus += hinge_w_[l] * relu(x - x_[l]);
    minus += hinge_w_[l] * relu(-x - x_[l]);
  }
  return plus + minus - x0sq;
}

double GDelta::y_slope(double x) const {
  const double ax = std::abs(x);
  if (ax <= x_.front() || ax >= x_.back()) return 0.0;
  const auto it = std::lower_bound(x_.begin(), x_.end(), ax);
  const double a = a_[static_cast<std::size_t>(it - x_.begin()) - 1];
  return x > 0.0 ? a : -a;
}

double GDelta::tube(double s) const {
  const double d2 = delta_ * delta_;
  return std::min(1.0, std::max(0.0, (d2 - s) / (0.2 * d2)));
}

double GDelta::sum_y(std::span<const double> v) const {
  require(v.size() == m_, "g_delta input has the wrong dimension");
  double s = 0.0;
  for (double x : v) s += y(x);
  return s;
}

double GDelta::operator()(std::span<const double> v) const { return tube(sum_y(v)); }

double GDelta::eval_relu(std::span<const double> v) const {
  require(v.size() == m_, "g_delta input has the wrong dimension");
  // Hidden layer 1: ReLU(+-v_j - x_l); layer 2: ReLU(5 - 5S/d^2) and ReLU(4 - 5S/d^2).
  const double x0sq = x_.front() * x_.front();
  double s = static_cast<double>(m_) * x0sq;
  for (double vj : v) {
    for (std::size_t l = 0; l < x_.size(); ++l) s += hinge_w_[l] * (relu(vj - x_[l]) + relu(-vj - x_[l]));
  }
  const double z = 5.0 - 5.0 * s / (delta_ * delta_);
  return relu(z) - relu(z - 1.0);
}

bool GDelta::differentiable(std::span<const double> v, double tol) const {
  const double s = sum_y(v);
  const double d2 = delta_ * delta_;
  if (std::abs(s - d2) <= tol * d2 || std::abs(s - 0.8 * d2) <= tol * d2) return false;
  if (s >= d2 || s <= 0.8 * d2) return true;
  for (double vj : v) {
    const double a = std::abs(vj);
    const auto it = std::lower_bound(x_.begin(), x_.end(), a);
    if (it != x_.end() && std::abs(*it - a) <= tol) return false;
    if (it != x_.begin() && std::abs(*(it - 1) - a) <= tol) return false;
  }
  return true;
}

std::vector<double> GDelta::gradient(std::span<const double> v) const {
  const double s = sum_y(v);
  const double d2 = delta_ * delta_;
  std::vector<double> g(m_, 0.0);
  if (s <= 0.8 * d2 || s >= d2) return g;
  for (std::size_t j = 0; j < m_; ++j) g[j] = -5.0 / d2 * y_slope(v[j]);
  return g;
}

std::size_t GDelta::parameter_count() const {
  const std::size_t hidden = 2 * m_ * x_.size();
  // layer 1: one weight and one bias per unit; layer 2: two units over all hidden
  // units plus biases; output: two weights and a bias.
  return 2 * hidden + 2 * (hidden + 1) + 3;
}

double GDelta::depth_bound(double delta, std::size_t m) {
  return 1.0 + (0.5 * std::log(static_cast<double>(m)) + std::log(20.0 / delta)) / (0.05 * delta);
}

double GDelta::parameter_bound(double delta, std::size_t m) {
  return kParameterConstant * static_cast<double>(m) * (1.0 + depth_bound(delta, m));
}

}  // namespace c2st
