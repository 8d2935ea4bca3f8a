#include "c2st/trapezoid.hpp"

#include "c2st/error.hpp"

#include <algorithm>
#include <cmath>

namespace c2st {

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

bool near_kink(double x, double tol) {
  for (double k : {-3.0, -1.0, 1.0, 3.0}) {
    if (std::abs(x - k) <= tol) return true;
  }
  return false;
}

double level_scale(int k, std::size_t d) { return std::exp2(static_cast<double>(k) / static_cast<double>(d)); }

// Inner sum of phi before the outer ReLU.
double phi_argument(std::span<const double> u, std::span<const double> b, double scale) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += trapezoid_t(scale * (u[j] - b[j]));
  return s - 2.0 * static_cast<double>(u.size() - 1);
}

void check_dims(std::span<const double> u, const TrapezoidBasis& basis) {
  basis.validate();
  require(u.size() == basis.dim(), "point and offset dimensions differ");
}

bool phi_level_differentiable(std::span<const double> u, std::span<const double> b, int k, double tol) {
  const double sc = level_scale(k, u.size());
  const double arg = phi_argument(u, b, sc);
  if (std::abs(arg) <= tol) return false;
  if (arg < 0.0) return true;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (near_kink(sc * (u[j] - b[j]), tol)) return false;
  }
  return true;
}

void add_phi_gradient(std::span<const double> u, std::span<const double> b, int k, double weight,
                      std::vector<double>& g) {
  const double sc = level_scale(k, u.size());
  if (phi_argument(u, b, sc) <= 0.0) return;
  for (std::size_t j = 0; j < u.size(); ++j) g[j] += weight * sc * trapezoid_slope(sc * (u[j] - b[j]));
}

}  // namespace

double trapezoid_t(double x) {
  const double a = std::abs(x);
  if (a <= 1.0) return 2.0;
  if (a >= 3.0) return 0.0;
  return 3.0 - a;
}

double trapezoid_t_relu(double x) { return relu(x + 3.0) - relu(x + 1.0) - relu(x - 1.0) + relu(x - 3.0); }

double trapezoid_slope(double x) {
  if (x > -3.0 && x < -1.0) return 1.0;
  if (x > 1.0 && x < 3.0) return -1.0;
  return 0.0;
}

double TrapezoidBasis::scale() const { return level_scale(k, dim()); }

void TrapezoidBasis::validate() const {
  require(k >= 0, "scale index k must be nonnegative");
  require(!offset.empty(), "offset must have at least one coordinate");
  require(c_d > 0.0 && std::isfinite(c_d), "c_d must be positive");
}

double phi_kb(std::span<const double> u, const TrapezoidBasis& basis) {
  check_dims(u, basis);
  return basis.c_d * relu(phi_argument(u, basis.offset, basis.scale()));
}

double psi_kb(std::span<const double> u, const TrapezoidBasis& basis) {
  check_dims(u, basis);
  return psi_value(u, basis.offset, basis.k, basis.c_d);
}

double psi_value(std::span<const double> u, std::span<const double> b, int k, double c_d) {
  const std::size_t d = u.size();
  const double fine = relu(phi_argument(u, b, level_scale(k, d)));
  const double coarse = k > 0 ? relu(phi_argument(u, b, level_scale(k - 1, d))) : 0.0;
  return c_d * std::exp2(0.5 * k) * (fine - 0.5 * coarse);
}

bool phi_differentiable(std::span<const double> u, const TrapezoidBasis& basis, double tol) {
  check_dims(u, basis);
  return phi_level_differentiable(u, basis.offset, basis.k, tol);
}

bool psi_differentiable(std::span<const double> u, const TrapezoidBasis& basis, double tol) {
  check_dims(u, basis);
  if (!phi_level_differentiable(u, basis.offset, basis.k, tol)) return false;
  return basis.k == 0 || phi_level_differentiable(u, basis.offset, basis.k - 1, tol);
}

std::vector<double> phi_gradient(std::span<const double> u, const TrapezoidBasis& basis) {
  check_dims(u, basis);
  std::vector<double> g(u.size(), 0.0);
  add_phi_gradient(u, basis.offset, basis.k, basis.c_d, g);
  return g;
}

std::vector<double> psi_gradient(std::span<const double> u, const TrapezoidBasis& basis) {
  check_dims(u, basis);
  std::vector<double> g(u.size(), 0.0);
  const double w = std::exp2(0.5 * basis.k) * basis.c_d;
  add_phi_gradient(u, basis.offset, basis.k, w, g);
  if (basis.k > 0) add_phi_gradient(u, basis.offset, basis.k - 1, -0.5 * w, g);
  return g;
}

double phi_gradient_bound(int k, std::size_t d, double c_d) {
  return c_d * std::sqrt(static_cast<double>(d)) * level_scale(k, d);
}

double psi_gradient_bound(int k, std::size_t d, double c_d) {
  return 1.5 * c_d * std::sqrt(static_cast<double>(d)) * std::exp2(0.5 * k) * level_scale(k, d);
}

std::vector<std::vector<double>> active_offsets(std::span<const double> u, int k, double c_d) {
  require(!u.empty(), "point must have at least one coordinate");
  const std::size_t d = u.size();
  const double h = 1.0 / level_scale(k, d);
  std::vector<long> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = static_cast<long>(std::floor(u[j] / h)) - 3;
    hi[j] = static_cast<long>(std::ceil(u[j] / h)) + 3;
  }
  std::vector<std::vector<double>> out;
  std::vector<long> idx = lo;
  TrapezoidBasis basis{k, std::vector<double>(d), c_d};
  for (;;) {
    for (std::size_t j = 0; j < d; ++j) basis.offset[j] = static_cast<double>(idx[j]) * h;
    if (phi_kb(u, basis) != 0.0) out.push_back(basis.offset);
    std::size_t j = 0;
    while (j < d && ++idx[j] > hi[j]) {
      idx[j] = lo[j];
      ++j;
    }
    if (j == d) break;
  }
  return out;
}

}  // namespace c2st
