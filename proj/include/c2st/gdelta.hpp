#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace c2st {

// Piecewise-linear tube gadget on R^m: equal to 1 for |v| <= (sqrt3/2) delta,
// 0 for |v| >= delta, gradient norm below 10.5 / delta.
//
// y approximates x^2 from above by chords on the geometric breakpoints
// x_l = x0 rho^l (x0 = r / sqrt m, rho = 1 + 2r, r = delta / 20), flat beyond x_L > 1;
// g(v) = t_delta(sum_j y(v_j)) with t_delta(s) = clamp((delta^2 - s) / (0.2 delta^2), 0, 1).
class GDelta {
 public:
  static constexpr double kGradientConstant = 10.5;
  static constexpr double kParameterConstant = 9.0;

  GDelta(double delta, std::size_t m);

  double delta() const { return delta_; }
  std::size_t dim() const { return m_; }
  double r() const { return r_; }
  double x0() const { return x_.front(); }
  double rho() const { return rho_; }
  // L: the smallest integer with x0 rho^L > 1.
  std::size_t depth() const { return x_.size() - 1; }
  const std::vector<double>& breakpoints() const { return x_; }
  // a_l = x_{l-1} + x_l, l = 1..L.
  const std::vector<double>& slopes() const { return a_; }

  double y(double x) const;
  double y_relu(double x) const;
  double y_slope(double x) const;
  double tube(double s) const;

  double operator()(std::span<const double> v) const;
  // The explicit three-layer ReLU realization.
  double eval_relu(std::span<const double> v) const;
  bool differentiable(std::span<const double> v, double tol = 1e-12) const;
  std::vector<double> gradient(std::span<const double> v) const;

  // Weights and biases of the realization evaluated by eval_relu: 8 m (L + 1) + 5.
  std::size_t parameter_count() const;
  // 1 + (log(m) / 2 + log(20 / delta)) / (0.05 delta)
  static double depth_bound(double delta, std::size_t m);
  // kParameterConstant * m * (1 + depth_bound)
  static double parameter_bound(double delta, std::size_t m);

 private:
  double sum_y(std::span<const double> v) const;

  double delta_;
  std::size_t m_;
  double r_, rho_;
  std::vector<double> x_;
  std::vector<double> a_;
  // ReLU form of y_+: x0^2 + sum_l hinge_w_[l] ReLU(x - x_l), l = 0..L.
  std::vector<double> hinge_w_;
};

}  // namespace c2st
