#pragma once

#include "c2st/quadrature.hpp"
#include "c2st/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace c2st {

enum class DensityKind {
  kGaussianMixture1d,
  kPushforwardCurve2d,
  kPushforwardSphere3d,
  kProductExtension,
};

const char* density_kind_name(DensityKind kind) noexcept;
DensityKind parse_density_kind(const std::string& name);

// Diagonal Gaussian component. `var` holds per-axis variances.
struct Component {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> var;
};

// Extra parameters of the two pushforward families.
//
// Curve: t ~ the 1D mixture in `components`, x = t/2, y = sigmoid(2t) + s with
// s ~ N(0, noise_sd^2). Sphere: t uniform on the unit quarter circle, rotated by
// `rotation` about (1/sqrt2, 1/sqrt2); u = t + N(0, noise_sd^2 I);
// x = (u1, u2, sqrt(R^2 - |u|^2)) / R.
struct PushforwardParams {
  double noise_sd = 0.05;
  double rotation = 0.0;
  double sphere_radius = 1.5;
};

class AnalyticDensity {
 public:
  static constexpr std::size_t kArcNodes = 192;

  AnalyticDensity(DensityKind kind, std::vector<Component> components, std::size_t ambient_dim,
                  PushforwardParams push = {});

  DensityKind kind() const { return kind_; }
  const std::vector<Component>& components() const { return components_; }
  std::size_t ambient_dim() const { return ambient_dim_; }
  const PushforwardParams& push() const { return push_; }
  double support_radius() const { return support_radius_; }

  // Coordinates the density is integrated in: the ambient space, except for
  // the curve, which uses (x, y - sigmoid(4x)), and the sphere, which uses the
  // parameter plane u.
  std::size_t quadrature_dim() const;
  std::vector<Interval> support_box() const;
  void to_ambient(std::span<const double> z, std::span<double> x) const;

  double pdf(std::span<const double> x) const;
  double log_pdf(std::span<const double> x) const;
  // Density in quadrature coordinates.
  double quadrature_pdf(std::span<const double> z) const;
  double quadrature_log_pdf(std::span<const double> z) const;

  Samples sample(std::size_t n, std::uint64_t seed) const;

  // Gaussian-kernel mean embedding x -> E k_sigma(x, X); mixture kinds only.
  double kernel_embedding(std::span<const double> x, double sigma) const;

 private:
  double mixture_log_pdf(std::span<const double> x) const;
  double arc_log_pdf(double u1, double u2) const;

  DensityKind kind_;
  std::vector<Component> components_;
  std::size_t ambient_dim_;
  PushforwardParams push_;
  double support_radius_ = 0.0;
  std::vector<double> arc_nodes_;
  std::vector<double> arc_weights_;
};

struct DensityPair {
  AnalyticDensity p;
  AnalyticDensity q;
};

AnalyticDensity gaussian_1d(double mean, double sd);

// Loss-curve data: p = 1/5 sum_{j=-2..2} N(j, 0.8^2); q = (1-d) N(0,1) + d/2 N(-3, 0.25) + d/2 N(4, 0.25).
DensityPair example1_pair(double delta = 0.1);
// Pushforward of example1_pair through (t/2, sigmoid(2t) + noise).
DensityPair example2_pair(double delta = 0.1, double noise_sd = 0.05);
// p = N(0,1) against a mean shift, a variance dilation, or a tail bump.
DensityPair mean_shift_pair(double delta);
DensityPair dilation_pair(double delta);
DensityPair tail_bump_pair(double delta);
DensityPair sphere_pair(double delta, double noise_sd = 0.05);

// Names: "example1", "example2", "eg1", "eg2", "eg3", "sphere".
DensityPair named_pair(const std::string& family, double delta);

// Raises kSingularity when q vanishes at x.
double log_ratio(const AnalyticDensity& p, const AnalyticDensity& q, std::span<const double> x);

// Union of both supports.
std::vector<Interval> joint_support(const AnalyticDensity& p, const AnalyticDensity& q);
QuadratureGrid default_grid(const AnalyticDensity& p, const AnalyticDensity& q);

}  // namespace c2st
