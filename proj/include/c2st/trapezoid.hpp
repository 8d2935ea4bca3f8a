#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace c2st {

// t = 2 on [-1, 1], 0 outside [-3, 3], linear in between.
double trapezoid_t(double x);
// Same function as ReLU(x+3) - ReLU(x+1) - ReLU(x-1) + ReLU(x-3).
double trapezoid_t_relu(double x);
// dt/dx away from the kinks at -3, -1, 1, 3.
double trapezoid_slope(double x);

struct TrapezoidBasis {
  int k = 0;
  std::vector<double> offset;  // b, a point on the 2^{-k/d} grid
  double c_d = 1.0;

  std::size_t dim() const { return offset.size(); }
  // 2^{k/d}
  double scale() const;
  void validate() const;
};

// c_d ReLU(sum_j t(2^{k/d}(u_j - b_j)) - 2(d - 1)).
double phi_kb(std::span<const double> u, const TrapezoidBasis& basis);
// 2^{k/2} (phi_{k,b} - phi_{k-1,b} / 2), with phi_{-1,b} = 0.
double psi_kb(std::span<const double> u, const TrapezoidBasis& basis);
// psi without argument checks, for inner loops.
double psi_value(std::span<const double> u, std::span<const double> b, int k, double c_d);

// False on a kink of phi (or, for psi, of either phi term).
bool phi_differentiable(std::span<const double> u, const TrapezoidBasis& basis, double tol = 1e-12);
bool psi_differentiable(std::span<const double> u, const TrapezoidBasis& basis, double tol = 1e-12);
std::vector<double> phi_gradient(std::span<const double> u, const TrapezoidBasis& basis);
std::vector<double> psi_gradient(std::span<const double> u, const TrapezoidBasis& basis);

// c_d sqrt(d) 2^{k/d}
double phi_gradient_bound(int k, std::size_t d, double c_d);
// (3/2) c_d sqrt(d) 2^{k/2} 2^{k/d}
double psi_gradient_bound(int k, std::size_t d, double c_d);

// Offsets b on the level-k grid with phi_{k,b}(u) != 0.
std::vector<std::vector<double>> active_offsets(std::span<const double> u, int k, double c_d = 1.0);

}  // namespace c2st
