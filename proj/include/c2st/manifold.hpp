#pragma once

#include "c2st/gdelta.hpp"
#include "c2st/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace c2st {

enum class ManifoldKind { kCircle, kCurve, kSpherePatch };

const char* manifold_kind_name(ManifoldKind kind) noexcept;
ManifoldKind parse_manifold_kind(const std::string& name);

// Analytic embedded manifolds with exact tangents.
//   circle: theta -> (cos theta, sin theta)
//   curve: x -> (x, sigmoid(4x)) on [-half_width, half_width], the noiseless Example 2 curve
//   sphere patch: unit-sphere cap around the north pole, (polar, azimuth) -> R^3
class Manifold {
 public:
  static constexpr std::size_t kArclengthNodes = 10000;

  static Manifold circle();
  static Manifold curve(double half_width = 2.0);
  static Manifold sphere_patch(double cap_angle = 1.0471975511965976);

  ManifoldKind kind() const { return kind_; }
  std::size_t intrinsic_dim() const { return kind_ == ManifoldKind::kSpherePatch ? 2 : 1; }
  std::size_t ambient_dim() const { return kind_ == ManifoldKind::kSpherePatch ? 3 : 2; }
  double extent() const { return extent_; }

  Eigen::VectorXd point(std::span<const double> param) const;
  // d x D with orthonormal rows spanning the tangent space.
  Eigen::MatrixXd tangent_frame(std::span<const double> param) const;
  double geodesic(std::span<const double> a, std::span<const double> b) const;

  // Uniform with respect to arclength or area.
  Samples sample_params(std::size_t n, std::uint64_t seed) const;
  // Deterministic, roughly evenly spread parameter set.
  Samples dense_params(std::size_t n) const;

  // The manifold point near `center` whose tangent projection is `u`, if any.
  std::optional<Eigen::VectorXd> lift(const Eigen::VectorXd& center, std::span<const double> center_param,
                                      const Eigen::MatrixXd& frame, std::span<const double> u) const;

 private:
  Manifold(ManifoldKind kind, double extent);
  double arclength(double x) const;
  double arclength_inverse(double s) const;

  ManifoldKind kind_;
  double extent_;
  std::vector<double> arc_;  // cumulative curve arclength on a uniform grid
};

struct Chart {
  Eigen::VectorXd center;
  std::vector<double> center_param;
  Eigen::MatrixXd frame;  // d x D
  double radius = 0.0;
  double alpha = 1.0;
  double beta = 1.0;

  // (u, v): u = F (x - c), v = x - c - F^T u.
  Eigen::VectorXd local_u(const Eigen::VectorXd& x) const;
  Eigen::VectorXd local_v(const Eigen::VectorXd& x) const;
};

// eta_i = b_i / sum_j b_j with b_i = exp(-1 / (1 - s^2)) for s = |x - c_i| / delta < 1.
class PartitionOfUnity {
 public:
  PartitionOfUnity() = default;
  PartitionOfUnity(std::vector<Eigen::VectorXd> centers, double delta);

  std::size_t size() const { return centers_.size(); }
  std::vector<double> weights(const Eigen::VectorXd& x) const;
  double weight(std::size_t i, const Eigen::VectorXd& x) const;
  static double bump(double s);

 private:
  std::vector<Eigen::VectorXd> centers_;
  double delta_ = 0.0;
};

struct AtlasOptions {
  std::size_t dense_points = 4096;
  std::size_t distortion_pairs = 10000;
  double tolerance = 1e-9;
  double delta_floor = 1e-3;
  std::uint64_t seed = 0;
};

struct Atlas {
  std::vector<Chart> charts;
  PartitionOfUnity partition;
  double delta = 0.0;
  std::size_t halvings = 0;
};

// Greedy delta/2-net of a dense sample; alpha_i, beta_i measured over sampled pairs
// in each chart; delta halves until every chart has alpha >= 1/2 and beta <= 2.
Atlas build_atlas(const Manifold& manifold, double delta, const AtlasOptions& options = {});

using AmbientFunction = std::function<double(const Eigen::VectorXd&)>;

struct FitOptions {
  int k_max = 4;
  // Ridge relative to the largest eigenvalue of the normal matrix.
  double ridge = 1e-10;
  std::size_t grid_points = 2048;
  // Fitting box half-width: margin * delta, widened to cover every manifold point
  // with normal offset below delta.
  double margin = 1.5;
  double c_d = 1.0;
  double condition_limit = 1e12;

  void validate() const;
};

// Offsets b = j * 2^{-k/d} with lo <= j <= hi on every axis.
struct LevelCoefficients {
  int k = 0;
  long lo = 0;
  long hi = 0;
  Eigen::VectorXd coeffs;  // axis 0 fastest
};

struct ChartCoefficients {
  std::vector<LevelCoefficients> levels;
  double residual_rms = 0.0;
  double residual_max = 0.0;
  double condition = 0.0;
};

// Sum over levels and offsets of c_{k,b} psi_{k,b}(u).
double evaluate_expansion(const ChartCoefficients& coeffs, std::span<const double> u, double c_d);

ChartCoefficients fit_coefficients(const AmbientFunction& f, const Manifold& manifold, const Atlas& atlas,
                                   std::size_t chart, const FitOptions& options);

struct ParameterAudit {
  std::size_t projection = 0;
  std::size_t wavelet = 0;
  std::size_t tube = 0;
  std::size_t gating = 0;
  std::size_t output = 0;
  std::size_t total = 0;
};

class ConstructedNet {
 public:
  ConstructedNet(ManifoldKind kind, Atlas atlas, std::vector<ChartCoefficients> coeffs, int k_max, double c_d,
                 double f0);

  ManifoldKind kind() const { return kind_; }
  const Atlas& atlas() const { return atlas_; }
  const std::vector<ChartCoefficients>& coefficients() const { return coeffs_; }
  int k_max() const { return k_max_; }
  double c_d() const { return c_d_; }
  double f0() const { return f0_; }
  const GDelta& tube() const { return g_; }
  const ParameterAudit& audit() const { return audit_; }
  std::size_t parameter_count() const { return audit_.total; }

  double local_expansion(std::size_t chart, const Eigen::VectorXd& x) const;
  // ReLU(ReLU(fhat) + F0 (g(v) - 1)) - ReLU(ReLU(-fhat) + F0 (g(v) - 1)).
  double chart_output(std::size_t chart, const Eigen::VectorXd& x) const;
  double operator()(const Eigen::VectorXd& x) const;
  Eigen::VectorXd evaluate(const Samples& x) const;

 private:
  ManifoldKind kind_;
  Atlas atlas_;
  std::vector<ChartCoefficients> coeffs_;
  int k_max_;
  double c_d_;
  double f0_;
  GDelta g_;
  ParameterAudit audit_;
};

// Fits every chart and assembles; F0 = max |f| over a dense manifold sample + 1.
ConstructedNet construct_net(const AmbientFunction& f, const Manifold& manifold, const Atlas& atlas,
                             const FitOptions& options);

struct ManifoldError {
  double linf = 0.0;
  std::vector<double> errors;
};

ManifoldError measure_manifold_error(const ConstructedNet& net, const AmbientFunction& f, const Manifold& manifold,
                                     std::size_t n_eval, std::uint64_t seed);

struct DecayFit {
  std::vector<double> level_max;  // max_b |c_{k,b}| over all charts, k = 0..k_max
  double slope = 0.0;             // least-squares slope of log2(level_max) against k
  double target = 0.0;            // -(2/d + 1/2)
};

DecayFit coefficient_decay(const ConstructedNet& net);

// max |f_N(a) - f_N(b)| / |a - b| over random nearby pairs in the box [-radius, radius]^D.
double lipschitz_estimate(const ConstructedNet& net, std::size_t pairs, double radius, std::uint64_t seed);

// ceil(d/2 * log2(C / eps)) from the truncation error C 2^{-2k/d}; reported only.
int kmax_for_tolerance(double eps, std::size_t d, double constant = 1.0);

// Binary block container plus a JSON sidecar with the atlas and level layout.
void save_constructed(const ConstructedNet& net, const std::string& binary_path, const std::string& json_path);
ConstructedNet load_constructed(const std::string& binary_path, const std::string& json_path);

}  // namespace c2st
