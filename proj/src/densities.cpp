#include "c2st/densities.hpp"

#include "c2st/error.hpp"
#include "c2st/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace c2st {

namespace {

constexpr double kTruncationSds = 8.0;
constexpr double kLog2Pi = 1.8378770664093454836;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sum_exp(std::span<const double> terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

std::size_t component_dim(DensityKind kind, std::size_t ambient_dim) {
  switch (kind) {
    case DensityKind::kGaussianMixture1d:
    case DensityKind::kPushforwardCurve2d:
      return 1;
    case DensityKind::kProductExtension:
      return ambient_dim;
    case DensityKind::kPushforwardSphere3d:
      return 0;
  }
  return 0;
}

std::size_t expected_ambient(DensityKind kind) {
  switch (kind) {
    case DensityKind::kGaussianMixture1d: return 1;
    case DensityKind::kPushforwardCurve2d: return 2;
    case DensityKind::kPushforwardSphere3d: return 3;
    case DensityKind::kProductExtension: return 0;
  }
  return 0;
}

std::string point_string(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

// Arc point s in [0, pi/2], rotated about the quarter-circle midpoint.
void arc_point(double s, double rotation, double& a, double& b) {
  const double c = std::numbers::sqrt2 / 2.0;
  const double x = std::cos(s) - c;
  const double y = std::sin(s) - c;
  a = c + std::cos(rotation) * x - std::sin(rotation) * y;
  b = c + std::sin(rotation) * x + std::cos(rotation) * y;
}

}  // namespace

const char* density_kind_name(DensityKind kind) noexcept {
  switch (kind) {
    case DensityKind::kGaussianMixture1d: return "gaussian_mixture_1d";
    case DensityKind::kPushforwardCurve2d: return "pushforward_curve_2d";
    case DensityKind::kPushforwardSphere3d: return "pushforward_sphere_3d";
    case DensityKind::kProductExtension: return "product_extension";
  }
  return "unknown";
}

DensityKind parse_density_kind(const std::string& name) {
  for (auto k : {DensityKind::kGaussianMixture1d, DensityKind::kPushforwardCurve2d,
                 DensityKind::kPushforwardSphere3d, DensityKind::kProductExtension}) {
    if (name == density_kind_name(k)) return k;
  }
  fail(ErrorCode::kInvalidInput, "unknown density kind '" + name + "'");
}

AnalyticDensity::AnalyticDensity(DensityKind kind, std::vector<Component> components, std::size_t ambient_dim,
                                 PushforwardParams push)
    : kind_(kind), components_(std::move(components)), ambient_dim_(ambient_dim), push_(push) {
  require(ambient_dim_ >= 1, "ambient_dim must be positive");
  if (const auto e = expected_ambient(kind_); e != 0) {
    require(ambient_dim_ == e, std::string(density_kind_name(kind_)) + " requires ambient_dim " + std::to_string(e));
  }
  const std::size_t cd = component_dim(kind_, ambient_dim_);
  if (kind_ == DensityKind::kPushforwardSphere3d) {
    require(components_.empty(), "sphere density takes no mixture components");
    require(push_.noise_sd > 0.0, "sphere noise_sd must be positive");
    require(push_.sphere_radius > std::numbers::sqrt2, "sphere_radius must exceed sqrt(2)");
  } else {
    require(!components_.empty(), "mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
      require(c.weight >= 0.0 && std::isfinite(c.weight), "component weights must be nonnegative");
      require(c.mean.size() == cd && c.var.size() == cd,
              "component mean/var must have length " + std::to_string(cd));
      for (std::size_t j = 0; j < cd; ++j) {
        require(std::isfinite(c.mean[j]), "component means must be finite");
        require(c.var[j] > 0.0 && std::isfinite(c.var[j]), "component variances must be positive and finite");
      }
      total += c.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12, "component weights must sum to 1 within 1e-12");
  }
  if (kind_ == DensityKind::kPushforwardCurve2d) require(push_.noise_sd > 0.0, "curve noise_sd must be positive");

  if (kind_ == DensityKind::kPushforwardSphere3d) {
    std::vector<double> t, w;
    gauss_legendre(kArcNodes, t, w);
    arc_nodes_.resize(kArcNodes);
    arc_weights_.resize(kArcNodes);
    const double half = std::numbers::pi / 4.0;
    for (std::size_t i = 0; i < kArcNodes; ++i) {
      arc_nodes_[i] = half * (1.0 + t[i]);
      // Uniform arc density 2/pi times the Jacobian pi/4.
      arc_weights_[i] = 0.5 * w[i];
    }
  }
  double r = 0.0;
  for (const auto& iv : support_box()) r = std::max({r, std::abs(iv.lo), std::abs(iv.hi)});
  support_radius_ = r;
}

std::size_t AnalyticDensity::quadrature_dim() const {
  return kind_ == DensityKind::kPushforwardSphere3d ? 2 : ambient_dim_;
}

std::vector<Interval> AnalyticDensity::support_box() const {
  if (kind_ == DensityKind::kPushforwardSphere3d) {
    double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
    for (int i = 0; i <= 1000; ++i) {
      double a, b;
      arc_point(std::numbers::pi / 2.0 * i / 1000.0, push_.rotation, a, b);
      lo1 = std::min(lo1, a), hi1 = std::max(hi1, a);
      lo2 = std::min(lo2, b), hi2 = std::max(hi2, b);
    }
    const double pad = kTruncationSds * push_.noise_sd;
    return {{lo1 - pad, hi1 + pad}, {lo2 - pad, hi2 + pad}};
  }
  const std::size_t cd = component_dim(kind_, ambient_dim_);
  double max_mean = 0.0, max_sd = 0.0;
  for (const auto& c : components_) {
    for (std::size_t j = 0; j < cd; ++j) {
      max_mean = std::max(max_mean, std::abs(c.mean[j]));
      max_sd = std::max(max_sd, std::sqrt(c.var[j]));
    }
  }
  const double r = max_mean + kTruncationSds * max_sd;
  if (kind_ == DensityKind::kPushforwardCurve2d) {
    const double pad = kTruncationSds * push_.noise_sd;
    return {{-r / 2.0, r / 2.0}, {-pad, pad}};
  }
  return std::vector<Interval>(ambient_dim_, Interval{-r, r});
}

void AnalyticDensity::to_ambient(std::span<const double> z, std::span<double> x) const {
  require(z.size() == quadrature_dim() && x.size() == ambient_dim_, "to_ambient: dimension mismatch");
  if (kind_ == DensityKind::kPushforwardCurve2d) {
    x[0] = z[0];
    x[1] = sigmoid(4.0 * z[0]) + z[1];
    return;
  }
  if (kind_ != DensityKind::kPushforwardSphere3d) {
    std::copy(z.begin(), z.end(), x.begin());
    return;
  }
  const double R = push_.sphere_radius;
  double u1 = z[0], u2 = z[1];
  const double n2 = u1 * u1 + u2 * u2;
  if (n2 > R * R) {
    const double s = R / std::sqrt(n2);
    u1 *= s, u2 *= s;
  }
  x[0] = u1 / R;
  x[1] = u2 / R;
  x[2] = std::sqrt(std::max(0.0, R * R - u1 * u1 - u2 * u2)) / R;
}

double AnalyticDensity::mixture_log_pdf(std::span<const double> x) const {
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.weight == 0.0) continue;
    double t = std::log(c.weight);
    for (std::size_t j = 0; j < c.mean.size(); ++j) {
      const double d = x[j] - c.mean[j];
      t += -0.5 * (kLog2Pi + std::log(c.var[j])) - d * d / (2.0 * c.var[j]);
    }
    terms.push_back(t);
  }
  return log_sum_exp(terms);
}

double AnalyticDensity::arc_log_pdf(double u1, double u2) const {
  const double v = push_.noise_sd * push_.noise_sd;
  std::vector<double> terms(arc_nodes_.size());
  for (std::size_t i = 0; i < arc_nodes_.size(); ++i) {
    double a, b;
    arc_point(arc_nodes_[i], push_.rotation, a, b);
    const double d2 = (u1 - a) * (u1 - a) + (u2 - b) * (u2 - b);
    terms[i] = std::log(arc_weights_[i]) - kLog2Pi - std::log(v) - d2 / (2.0 * v);
  }
  return log_sum_exp(terms);
}

double AnalyticDensity::quadrature_log_pdf(std::span<const double> z) const {
  require(z.size() == quadrature_dim(), "density evaluation: expected " + std::to_string(quadrature_dim()) +
                                            " coordinates, got " + std::to_string(z.size()));
  switch (kind_) {
    case DensityKind::kGaussianMixture1d:
    case DensityKind::kProductExtension:
      return mixture_log_pdf(z);
    case DensityKind::kPushforwardCurve2d: {
      // (x, s) coordinates: the map to (x, y) has unit Jacobian.
      const double t = 2.0 * z[0];
      const double s = z[1];
      const double v = push_.noise_sd * push_.noise_sd;
      return std::numbers::ln2 + mixture_log_pdf(std::span<const double>(&t, 1)) - 0.5 * (kLog2Pi + std::log(v)) -
             s * s / (2.0 * v);
    }
    case DensityKind::kPushforwardSphere3d:
      return arc_log_pdf(z[0], z[1]);
  }
  return -std::numeric_limits<double>::infinity();
}

double AnalyticDensity::quadrature_pdf(std::span<const double> z) const { return std::exp(quadrature_log_pdf(z)); }

double AnalyticDensity::log_pdf(std::span<const double> x) const {
  require(x.size() == ambient_dim_, "pdf: expected " + std::to_string(ambient_dim_) + " coordinates, got " +
                                        std::to_string(x.size()));
  if (kind_ == DensityKind::kPushforwardSphere3d) {
    const double R = push_.sphere_radius;
    return arc_log_pdf(R * x[0], R * x[1]);
  }
  if (kind_ == DensityKind::kPushforwardCurve2d) {
    const double z[2] = {x[0], x[1] - sigmoid(4.0 * x[0])};
    return quadrature_log_pdf(z);
  }
  return quadrature_log_pdf(x);
}

double AnalyticDensity::pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

Samples AnalyticDensity::sample(std::size_t n, std::uint64_t seed) const {
  require(n >= 1, "sample count must be at least 1");
  CounterRng rng(seed);
  Samples out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ambient_dim_));
  auto pick = [&]() -> const Component& {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& c : components_) {
      acc += c.weight;
      if (u < acc) return c;
    }
    return components_.back();
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    switch (kind_) {
      case DensityKind::kGaussianMixture1d:
      case DensityKind::kProductExtension: {
        const auto& c = pick();
        for (std::size_t j = 0; j < ambient_dim_; ++j) {
          out(r, static_cast<Eigen::Index>(j)) = c.mean[j] + std::sqrt(c.var[j]) * rng.normal();
        }
        break;
      }
      case DensityKind::kPushforwardCurve2d: {
        const auto& c = pick();
        const double t = c.mean[0] + std::sqrt(c.var[0]) * rng.normal();
        out(r, 0) = t / 2.0;
        out(r, 1) = sigmoid(2.0 * t) + push_.noise_sd * rng.normal();
        break;
      }
      case DensityKind::kPushforwardSphere3d: {
        double a, b;
        arc_point(std::numbers::pi / 2.0 * rng.uniform(), push_.rotation, a, b);
        const double u[2] = {a + push_.noise_sd * rng.normal(), b + push_.noise_sd * rng.normal()};
        double x[3];
        to_ambient(u, x);
        out(r, 0) = x[0], out(r, 1) = x[1], out(r, 2) = x[2];
        break;
      }
    }
  }
  return out;
}

double AnalyticDensity::kernel_embedding(std::span<const double> x, double sigma) const {
  require(kind_ == DensityKind::kGaussianMixture1d || kind_ == DensityKind::kProductExtension,
          "kernel embedding is closed-form only for Gaussian mixtures");
  require(sigma > 0.0, "kernel bandwidth must be positive");
  require(x.size() == ambient_dim_, "kernel embedding: dimension mismatch");
  const double s2 = sigma * sigma;
  double total = 0.0;
  for (const auto& c : components_) {
    double term = c.weight;
    for (std::size_t j = 0; j < ambient_dim_; ++j) {
      const double d = x[j] - c.mean[j];
      term *= sigma / std::sqrt(s2 + c.var[j]) * std::exp(-d * d / (2.0 * (s2 + c.var[j])));
    }
    total += term;
  }
  return total;
}

AnalyticDensity gaussian_1d(double mean, double sd) {
  return AnalyticDensity(DensityKind::kGaussianMixture1d, {{1.0, {mean}, {sd * sd}}}, 1);
}

namespace {

std::vector<Component> example1_p_components() {
  std::vector<Component> c;
  for (int j = -2; j <= 2; ++j) c.push_back({0.2, {static_cast<double>(j)}, {0.64}});
  return c;
}

std::vector<Component> example1_q_components(double delta) {
  return {{1.0 - delta, {0.0}, {1.0}}, {delta / 2.0, {-3.0}, {0.25}}, {delta / 2.0, {4.0}, {0.25}}};
}

std::vector<Component> drop_empty(std::vector<Component> c) {
  if (c.size() > 1) {
    std::erase_if(c, [](const Component& x) { return x.weight == 0.0; });
  }
  return c;
}

}  // namespace

DensityPair example1_pair(double delta) {
  require(delta >= 0.0 && delta <= 1.0, "example1 delta must lie in [0, 1]");
  return {AnalyticDensity(DensityKind::kGaussianMixture1d, example1_p_components(), 1),
          AnalyticDensity(DensityKind::kGaussianMixture1d, drop_empty(example1_q_components(delta)), 1)};
}

DensityPair example2_pair(double delta, double noise_sd) {
  require(delta >= 0.0 && delta <= 1.0, "example2 delta must lie in [0, 1]");
  PushforwardParams push{noise_sd, 0.0, 1.5};
  return {AnalyticDensity(DensityKind::kPushforwardCurve2d, example1_p_components(), 2, push),
          AnalyticDensity(DensityKind::kPushforwardCurve2d, drop_empty(example1_q_components(delta)), 2, push)};
}

DensityPair mean_shift_pair(double delta) { return {gaussian_1d(0.0, 1.0), gaussian_1d(delta, 1.0)}; }

DensityPair dilation_pair(double delta) {
  require(delta > -1.0, "dilation delta must exceed -1");
  return {gaussian_1d(0.0, 1.0), gaussian_1d(0.0, 1.0 + delta)};
}

DensityPair tail_bump_pair(double delta) {
  require(delta >= 0.0 && delta <= 1.0, "tail-bump delta must lie in [0, 1]");
  return {gaussian_1d(0.0, 1.0),
          AnalyticDensity(DensityKind::kGaussianMixture1d,
                          drop_empty({{1.0 - delta, {0.0}, {1.0}}, {delta, {3.0}, {1.0 / 16.0}}}), 1)};
}

DensityPair sphere_pair(double delta, double noise_sd) {
  return {AnalyticDensity(DensityKind::kPushforwardSphere3d, {}, 3, {noise_sd, 0.0, 1.5}),
          AnalyticDensity(DensityKind::kPushforwardSphere3d, {}, 3, {noise_sd, delta, 1.5})};
}

DensityPair named_pair(const std::string& family, double delta) {
  if (family == "example1") return example1_pair(delta);
  if (family == "example2") return example2_pair(delta);
  if (family == "eg1") return mean_shift_pair(delta);
  if (family == "eg2") return dilation_pair(delta);
  if (family == "eg3") return tail_bump_pair(delta);
  if (family == "sphere") return sphere_pair(delta);
  fail(ErrorCode::kInvalidInput,
       "unknown density family '" + family + "' (expected example1, example2, eg1, eg2, eg3 or sphere)");
}

double log_ratio(const AnalyticDensity& p, const AnalyticDensity& q, std::span<const double> x) {
  const double lq = q.log_pdf(x);
  if (std::exp(lq) == 0.0) {
    fail(ErrorCode::kSingularity, "log_ratio: q vanishes at x = " + point_string(x));
  }
  return p.log_pdf(x) - lq;
}

std::vector<Interval> joint_support(const AnalyticDensity& p, const AnalyticDensity& q) {
  require(p.ambient_dim() == q.ambient_dim() && p.quadrature_dim() == q.quadrature_dim(),
          "density pair must share dimensions");
  auto a = p.support_box();
  const auto b = q.support_box();
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].lo = std::min(a[i].lo, b[i].lo);
    a[i].hi = std::max(a[i].hi, b[i].hi);
  }
  return a;
}

QuadratureGrid default_grid(const AnalyticDensity& p, const AnalyticDensity& q) {
  auto box = joint_support(p, q);
  require(box.size() <= 2, "quadrature is available for 1D and 2D supports only");
  const std::size_t n = box.size() == 1 ? QuadratureGrid::kDefaultNodes1d : QuadratureGrid::kDefaultNodes2d;
  return QuadratureGrid(std::move(box), n);
}

}  // namespace c2st
