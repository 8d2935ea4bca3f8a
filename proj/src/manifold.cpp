#include "c2st/manifold.hpp"

#include "c2st/error.hpp"
#include "c2st/nn.hpp"
#include "c2st/parallel.hpp"
#include "c2st/rng.hpp"
#include "c2st/trapezoid.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace c2st {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double curve_speed(double x) {
  const double s = sigmoid(4.0 * x);
  const double dy = 4.0 * s * (1.0 - s);
  return std::sqrt(1.0 + dy * dy);
}

Eigen::VectorXd to_vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Frame of the unit sphere's tangent plane at n.
Eigen::MatrixXd sphere_frame(const Eigen::Vector3d& n) {
  Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  Eigen::Vector3d e1 = (a - a.dot(n) * n).normalized();
  Eigen::Vector3d e2 = n.cross(e1);
  Eigen::MatrixXd f(2, 3);
  f.row(0) = e1.transpose();
  f.row(1) = e2.transpose();
  return f;
}

std::size_t axis_points(std::size_t total, std::size_t d) {
  return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(total), 1.0 / static_cast<double>(d)) - 1e-9));
}

double level_spacing(int k, std::size_t d) { return std::exp2(-static_cast<double>(k) / static_cast<double>(d)); }

std::size_t level_size(const LevelCoefficients& l, std::size_t d) {
  std::size_t n = 1;
  for (std::size_t a = 0; a < d; ++a) n *= static_cast<std::size_t>(l.hi - l.lo + 1);
  return n;
}

// Calls fn(flat index, offset) for every grid offset of a level within the index box [from, to].
template <class Fn>
void for_each_offset(const LevelCoefficients& l, std::size_t d, const std::vector<long>& from,
                     const std::vector<long>& to, Fn&& fn) {
  for (std::size_t a = 0; a < d; ++a) {
    if (from[a] > to[a]) return;
  }
  const double h = level_spacing(l.k, d);
  const long width = l.hi - l.lo + 1;
  std::vector<long> idx = from;
  std::vector<double> b(d);
  for (;;) {
    std::size_t flat = 0, stride = 1;
    for (std::size_t a = 0; a < d; ++a) {
      b[a] = static_cast<double>(idx[a]) * h;
      flat += static_cast<std::size_t>(idx[a] - l.lo) * stride;
      stride *= static_cast<std::size_t>(width);
    }
    fn(flat, b);
    std::size_t a = 0;
    while (a < d && ++idx[a] > to[a]) {
      idx[a] = from[a];
      ++a;
    }
    if (a == d) return;
  }
}

// 1.05 x the largest |u|_inf over manifold points whose normal offset |v| is below
// delta, where the tube gadget can pass the local expansion through.
double tube_reach(const Manifold& manifold, const Chart& chart, double delta) {
  const Samples dense = manifold.dense_params(4096);
  double reach = 0.0;
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    const Eigen::VectorXd x = manifold.point(row_span(dense, i));
    if (chart.local_v(x).norm() < delta) reach = std::max(reach, chart.local_u(x).cwiseAbs().maxCoeff());
  }
  return 1.05 * reach;
}

}  // namespace

const char* manifold_kind_name(ManifoldKind kind) noexcept {
  switch (kind) {
    case ManifoldKind::kCircle:
      return "circle";
    case ManifoldKind::kCurve:
      return "curve";
    case ManifoldKind::kSpherePatch:
      return "sphere-patch";
  }
  return "unknown";
}

ManifoldKind parse_manifold_kind(const std::string& name) {
  if (name == "circle") return ManifoldKind::kCircle;
  if (name == "curve") return ManifoldKind::kCurve;
  if (name == "sphere-patch") return ManifoldKind::kSpherePatch;
  fail(ErrorCode::kInvalidInput, "unknown manifold '" + name + "' (expected circle, curve or sphere-patch)");
}

Manifold::Manifold(ManifoldKind kind, double extent) : kind_(kind), extent_(extent) {
  if (kind_ != ManifoldKind::kCurve) return;
  const std::size_t n = kArclengthNodes;
  arc_.assign(n, 0.0);
  const double h = 2.0 * extent_ / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const double a = -extent_ + h * static_cast<double>(i - 1);
    // Simpson on each cell.
    arc_[i] = arc_[i - 1] + h / 6.0 * (curve_speed(a) + 4.0 * curve_speed(a + 0.5 * h) + curve_speed(a + h));
  }
}

Manifold Manifold::circle() { return Manifold(ManifoldKind::kCircle, kTwoPi); }

Manifold Manifold::curve(double half_width) {
  require(half_width > 0.0 && std::isfinite(half_width), "curve half-width must be positive");
  return Manifold(ManifoldKind::kCurve, half_width);
}

Manifold Manifold::sphere_patch(double cap_angle) {
  require(cap_angle > 0.0 && cap_angle < std::numbers::pi, "cap angle must lie in (0, pi)");
  return Manifold(ManifoldKind::kSpherePatch, cap_angle);
}

double Manifold::arclength(double x) const {
  const double t = (x + extent_) / (2.0 * extent_) * static_cast<double>(arc_.size() - 1);
  const double c = std::clamp(t, 0.0, static_cast<double>(arc_.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(c), arc_.size() - 2);
  const double w = c - static_cast<double>(i);
  return (1.0 - w) * arc_[i] + w * arc_[i + 1];
}

double Manifold::arclength_inverse(double s) const {
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  std::size_t i = it == arc_.begin() ? 0 : static_cast<std::size_t>(it - arc_.begin()) - 1;
  i = std::min(i, arc_.size() - 2);
  const double w = std::clamp((s - arc_[i]) / (arc_[i + 1] - arc_[i]), 0.0, 1.0);
  const double h = 2.0 * extent_ / static_cast<double>(arc_.size() - 1);
  return -extent_ + h * (static_cast<double>(i) + w);
}

Eigen::VectorXd Manifold::point(std::span<const double> p) const {
  switch (kind_) {
    case ManifoldKind::kCircle:
      return Eigen::Vector2d(std::cos(p[0]), std::sin(p[0]));
    case ManifoldKind::kCurve:
      return Eigen::Vector2d(p[0], sigmoid(4.0 * p[0]));
    case ManifoldKind::kSpherePatch:
      return Eigen::Vector3d(std::sin(p[0]) * std::cos(p[1]), std::sin(p[0]) * std::sin(p[1]), std::cos(p[0]));
  }
  fail(ErrorCode::kInternal, "unknown manifold");
}

Eigen::MatrixXd Manifold::tangent_frame(std::span<const double> p) const {
  switch (kind_) {
    case ManifoldKind::kCircle: {
      Eigen::MatrixXd f(1, 2);
      f << -std::sin(p[0]), std::cos(p[0]);
      return f;
    }
    case ManifoldKind::kCurve: {
      const double s = sigmoid(4.0 * p[0]);
      Eigen::MatrixXd f(1, 2);
      f << 1.0, 4.0 * s * (1.0 - s);
      return f / f.norm();
    }
    case ManifoldKind::kSpherePatch:
      return sphere_frame(point(p));
  }
  fail(ErrorCode::kInternal, "unknown manifold");
}

double Manifold::geodesic(std::span<const double> a, std::span<const double> b) const {
  switch (kind_) {
    case ManifoldKind::kCircle: {
      const double d = std::fmod(std::abs(a[0] - b[0]), kTwoPi);
      return std::min(d, kTwoPi - d);
    }
    case ManifoldKind::kCurve:
      return std::abs(arclength(a[0]) - arclength(b[0]));
    case ManifoldKind::kSpherePatch:
      return std::acos(std::clamp(point(a).dot(point(b)), -1.0, 1.0));
  }
  fail(ErrorCode::kInternal, "unknown manifold");
}

Samples Manifold::sample_params(std::size_t n, std::uint64_t seed) const {
  CounterRng rng(seed, tag_hash("manifold"));
  Samples out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(intrinsic_dim()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    switch (kind_) {
      case ManifoldKind::kCircle:
        out(i, 0) = kTwoPi * rng.uniform();
        break;
      case ManifoldKind::kCurve:
        out(i, 0) = arclength_inverse(arc_.back() * rng.uniform());
        break;
      case ManifoldKind::kSpherePatch: {
        const double z = 1.0 - (1.0 - std::cos(extent_)) * rng.uniform();
        out(i, 0) = std::acos(z);
        out(i, 1) = kTwoPi * rng.uniform();
        break;
      }
    }
  }
  return out;
}

Samples Manifold::dense_params(std::size_t n) const {
  require(n >= 2, "need at least two dense points");
  Samples out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(intrinsic_dim()));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    switch (kind_) {
      case ManifoldKind::kCircle:
        out(r, 0) = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
        break;
      case ManifoldKind::kCurve:
        out(r, 0) = arclength_inverse(arc_.back() * static_cast<double>(i) / static_cast<double>(n - 1));
        break;
      case ManifoldKind::kSpherePatch:
        out(r, 0) = std::acos(1.0 - (1.0 - std::cos(extent_)) * t);
        out(r, 1) = std::fmod(golden * static_cast<double>(i), kTwoPi);
        break;
    }
  }
  return out;
}

std::optional<Eigen::VectorXd> Manifold::lift(const Eigen::VectorXd& center, std::span<const double> center_param,
                                              const Eigen::MatrixXd& frame, std::span<const double> u) const {
  (void)center_param;
  const Eigen::VectorXd uv = to_vec(u);
  switch (kind_) {
    case ManifoldKind::kCircle:
    case ManifoldKind::kSpherePatch: {
      // Unit circle and sphere: the center is its own normal.
      const double n2 = uv.squaredNorm();
      if (n2 >= 1.0) return std::nullopt;
      Eigen::VectorXd x = frame.transpose() * uv + std::sqrt(1.0 - n2) * center;
      if (kind_ == ManifoldKind::kSpherePatch && x.z() < std::cos(extent_)) return std::nullopt;
      return x;
    }
    case ManifoldKind::kCurve: {
      // The projection onto the tangent is increasing along the curve.
      auto proj = [&](double x) { return frame.row(0).dot(point(std::span<const double>(&x, 1)) - center); };
      double lo = -extent_, hi = extent_;
      if (uv[0] < proj(lo) || uv[0] > proj(hi)) return std::nullopt;
      for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (proj(mid) < uv[0] ? lo : hi) = mid;
      }
      const double x = 0.5 * (lo + hi);
      return point(std::span<const double>(&x, 1));
    }
  }
  fail(ErrorCode::kInternal, "unknown manifold");
}

Eigen::VectorXd Chart::local_u(const Eigen::VectorXd& x) const { return frame * (x - center); }

Eigen::VectorXd Chart::local_v(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd xc = x - center;
  return xc - frame.transpose() * (frame * xc);
}

PartitionOfUnity::PartitionOfUnity(std::vector<Eigen::VectorXd> centers, double delta)
    : centers_(std::move(centers)), delta_(delta) {
  require(delta > 0.0, "partition radius must be positive");
}

double PartitionOfUnity::bump(double s) {
  if (s >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

std::vector<double> PartitionOfUnity::weights(const Eigen::VectorXd& x) const {
  std::vector<double> w(centers_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    w[i] = bump((x - centers_[i]).norm() / delta_);
    total += w[i];
  }
  if (total > 0.0) {
    for (auto& v : w) v /= total;
  }
  return w;
}

double PartitionOfUnity::weight(std::size_t i, const Eigen::VectorXd& x) const {
  const double own = bump((x - centers_.at(i)).norm() / delta_);
  if (own == 0.0) return 0.0;
  double total = 0.0;
  for (const auto& c : centers_) total += bump((x - c).norm() / delta_);
  return own / total;
}

Atlas build_atlas(const Manifold& manifold, double delta, const AtlasOptions& options) {
  require(delta > 0.0 && delta < 1.0, "chart radius must lie in (0, 1)");
  require(options.dense_points >= 16, "dense_points must be at least 16");
  require(options.distortion_pairs >= 1, "distortion_pairs must be at least 1");
  const std::size_t d = manifold.intrinsic_dim();
  std::size_t halvings = 0;
  for (;;) {
    if (delta < options.delta_floor) {
      fail(ErrorCode::kAtlasConstruction, "chart radius fell below " + std::to_string(options.delta_floor) +
                                              " without meeting the distortion bounds alpha >= 1/2, beta <= 2");
    }
    // Keep the dense sample much finer than the chart radius.
    std::size_t n = options.dense_points;
    if (d == 1) n = std::max(n, static_cast<std::size_t>(std::ceil(40.0 * manifold.extent() / delta)));
    const Samples params = manifold.dense_params(n);
    std::vector<Eigen::VectorXd> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = manifold.point(row_span(params, static_cast<Eigen::Index>(i)));

    Atlas atlas;
    atlas.delta = delta;
    atlas.halvings = halvings;
    std::vector<Eigen::VectorXd> centers;
    for (std::size_t i = 0; i < n; ++i) {
      bool covered = false;
      for (const auto& c : centers) {
        if ((pts[i] - c).norm() <= 0.5 * delta) {
          covered = true;
          break;
        }
      }
      if (covered) continue;
      centers.push_back(pts[i]);
      const auto p = row_span(params, static_cast<Eigen::Index>(i));
      Chart chart;
      chart.center = pts[i];
      chart.center_param.assign(p.begin(), p.end());
      chart.frame = manifold.tangent_frame(p);
      chart.radius = delta;
      atlas.charts.push_back(std::move(chart));
    }

    bool ok = true;
    for (std::size_t ci = 0; ci < atlas.charts.size(); ++ci) {
      Chart& chart = atlas.charts[ci];
      std::vector<std::size_t> inside;
      for (std::size_t i = 0; i < n; ++i) {
        if ((pts[i] - chart.center).norm() < delta) inside.push_back(i);
      }
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      auto visit = [&](std::size_t a, std::size_t b) {
        const double proj = (chart.frame * (pts[a] - pts[b])).norm();
        if (proj < 1e-12) return;
        const double ratio = manifold.geodesic(row_span(params, static_cast<Eigen::Index>(a)),
                                               row_span(params, static_cast<Eigen::Index>(b))) /
                             proj;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      };
      const std::size_t m = inside.size();
      if (m * (m - 1) / 2 <= options.distortion_pairs) {
        for (std::size_t a = 0; a < m; ++a) {
          for (std::size_t b = a + 1; b < m; ++b) visit(inside[a], inside[b]);
        }
      } else {
        CounterRng rng(derive_seed(options.seed, {ci, tag_hash("distortion")}));
        for (std::size_t r = 0; r < options.distortion_pairs; ++r) {
          const auto a = static_cast<std::size_t>(rng.below(m));
          const auto b = static_cast<std::size_t>(rng.below(m));
          if (a != b) visit(inside[a], inside[b]);
        }
      }
      chart.alpha = std::isfinite(lo) ? lo : 1.0;
      chart.beta = hi > 0.0 ? hi : 1.0;
      if (chart.alpha < 0.5 - options.tolerance || chart.beta > 2.0 + options.tolerance) ok = false;
    }
    if (ok) {
      atlas.partition = PartitionOfUnity(std::move(centers), delta);
      return atlas;
    }
    delta *= 0.5;
    ++halvings;
  }
}

void FitOptions::validate() const {
  require(k_max >= 0, "k_max must be nonnegative");
  require(ridge >= 0.0 && std::isfinite(ridge), "ridge must be nonnegative");
  require(grid_points >= 16, "grid_points must be at least 16");
  require(margin >= 1.0, "fit margin must be at least 1 (in units of delta)");
  require(c_d > 0.0 && std::isfinite(c_d), "c_d must be positive");
  require(condition_limit > 1.0, "condition_limit must exceed 1");
}

double evaluate_expansion(const ChartCoefficients& coeffs, std::span<const double> u, double c_d) {
  const std::size_t d = u.size();
  double total = 0.0;
  std::vector<long> from(d), to(d);
  for (const auto& level : coeffs.levels) {
    const double h = level_spacing(level.k, d);
    // psi_{k,b} reaches as far as the coarser phi_{k-1,b}: 3 * 2^{1/d} spacings.
    const long reach = level.k == 0 ? 3 : static_cast<long>(std::ceil(3.0 * std::exp2(1.0 / static_cast<double>(d))));
    for (std::size_t a = 0; a < d; ++a) {
      from[a] = std::max(level.lo, static_cast<long>(std::floor(u[a] / h)) - reach);
      to[a] = std::min(level.hi, static_cast<long>(std::ceil(u[a] / h)) + reach);
    }
    for_each_offset(level, d, from, to, [&](std::size_t flat, const std::vector<double>& b) {
      const double c = level.coeffs[static_cast<Eigen::Index>(flat)];
      if (c != 0.0) total += c * psi_value(u, b, level.k, c_d);
    });
  }
  return total;
}

ChartCoefficients fit_coefficients(const AmbientFunction& f, const Manifold& manifold, const Atlas& atlas,
                                   std::size_t chart_index, const FitOptions& options) {
  options.validate();
  require(chart_index < atlas.charts.size(), "chart index out of range");
  const Chart& chart = atlas.charts[chart_index];
  const std::size_t d = manifold.intrinsic_dim();
  const double delta = atlas.delta;
  const double half = std::max(options.margin * delta, tube_reach(manifold, chart, delta));

  // Tensor grid on [-half, half]^d, axis 0 fastest.
  const std::size_t per_axis = axis_points(options.grid_points, d);
  std::size_t rows = 1;
  for (std::size_t a = 0; a < d; ++a) rows *= per_axis;
  Samples grid(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t rem = r;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t i = rem % per_axis;
      rem /= per_axis;
      grid(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) =
          -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(per_axis - 1);
    }
  }

  // Grid points with no manifold point above them are left unconstrained.
  std::vector<Eigen::Index> kept;
  std::vector<double> values;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto u = row_span(grid, static_cast<Eigen::Index>(r));
    const auto x = manifold.lift(chart.center, chart.center_param, chart.frame, u);
    if (!x) continue;
    double value = 0.0;
    if (chart.local_v(*x).norm() < delta && (*x - chart.center).norm() < delta) {
      const double eta = atlas.partition.weight(chart_index, *x);
      if (eta > 0.0) {
        const double fx = f(*x);
        if (!std::isfinite(fx)) fail(ErrorCode::kEvaluation, "target function is not finite on the manifold");
        value = fx * eta;
      }
    }
    kept.push_back(static_cast<Eigen::Index>(r));
    values.push_back(value);
  }
  if (kept.empty()) fail(ErrorCode::kFitting, "no fitting grid point lifts to the manifold");
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));

  ChartCoefficients out;
  std::size_t cols = 0;
  for (int k = 0; k <= options.k_max; ++k) {
    const double h = level_spacing(k, d);
    // Offsets with |b|_inf < half + 3h.
    const long j = static_cast<long>(std::ceil((half + 3.0 * h) / h)) - 1;
    LevelCoefficients level;
    level.k = k;
    level.lo = -j;
    level.hi = j;
    cols += level_size(level, d);
    out.levels.push_back(std::move(level));
  }

  Eigen::MatrixXd dict(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(cols));
  {
    std::size_t col0 = 0;
    for (const auto& level : out.levels) {
      const std::vector<long> from(d, level.lo), to(d, level.hi);
      for_each_offset(level, d, from, to, [&](std::size_t flat, const std::vector<double>& b) {
        const auto c = static_cast<Eigen::Index>(col0 + flat);
        for (std::size_t r = 0; r < kept.size(); ++r) {
          dict(static_cast<Eigen::Index>(r), c) = psi_value(row_span(grid, kept[r]), b, level.k, options.c_d);
        }
      });
      col0 += level_size(level, d);
    }
  }

  const Eigen::MatrixXd gram = dict.transpose() * dict;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) fail(ErrorCode::kFitting, "eigendecomposition of the normal matrix failed");
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (!(lmax > 0.0)) fail(ErrorCode::kFitting, "wavelet dictionary vanishes on the fitting grid");
  const double ridge = options.ridge * lmax;
  const double lmin = std::max(0.0, lam.minCoeff());
  out.condition = (lmax + ridge) / (lmin + ridge);
  if (!std::isfinite(out.condition) || out.condition > options.condition_limit) {
    std::ostringstream msg;
    msg << "wavelet dictionary is ill-conditioned (condition estimate " << out.condition << " > "
        << options.condition_limit << "); use a larger ridge, a denser grid or a smaller k_max";
    fail(ErrorCode::kFitting, msg.str());
  }
  const Eigen::VectorXd rhs = eig.eigenvectors().transpose() * (dict.transpose() * target);
  const Eigen::VectorXd sol = eig.eigenvectors() * (rhs.array() / (lam.array() + ridge)).matrix();

  const Eigen::VectorXd resid = dict * sol - target;
  out.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(kept.size()));
  out.residual_max = resid.cwiseAbs().maxCoeff();
  std::size_t col0 = 0;
  for (auto& level : out.levels) {
    const auto n = static_cast<Eigen::Index>(level_size(level, d));
    level.coeffs = sol.segment(static_cast<Eigen::Index>(col0), n);
    col0 += static_cast<std::size_t>(n);
  }
  return out;
}

ConstructedNet::ConstructedNet(ManifoldKind kind, Atlas atlas, std::vector<ChartCoefficients> coeffs, int k_max,
                               double c_d, double f0)
    : kind_(kind),
      atlas_(std::move(atlas)),
      coeffs_(std::move(coeffs)),
      k_max_(k_max),
      c_d_(c_d),
      f0_(f0),
      g_(atlas_.delta, atlas_.charts.empty() ? 1 : static_cast<std::size_t>(atlas_.charts.front().center.size())) {
  require(!atlas_.charts.empty(), "constructed net needs at least one chart");
  require(coeffs_.size() == atlas_.charts.size(), "one coefficient set per chart is required");
  require(f0_ >= 1.0, "F0 must be at least 1");
  const auto D = static_cast<std::size_t>(atlas_.charts.front().center.size());
  const auto d = static_cast<std::size_t>(atlas_.charts.front().frame.rows());
  for (const auto& c : coeffs_) {
    for (const auto& l : c.levels) {
      require(static_cast<std::size_t>(l.coeffs.size()) == level_size(l, d), "level coefficient count mismatch");
      const std::size_t n_phi = l.k == 0 ? 1 : 2;
      // Per phi: 4d trapezoid units (weight, bias), 4d weights and a bias into the phi unit,
      // one output weight.
      audit_.wavelet += static_cast<std::size_t>(l.coeffs.size()) * n_phi * (12 * d + 2);
    }
  }
  const std::size_t K = atlas_.charts.size();
  audit_.projection = K * (d * D + d + D * D + D);
  audit_.tube = K * g_.parameter_count();
  // ReLU(+-fhat): 2 weights, 2 biases; two gates with 2 weights and a bias; 2 output weights.
  audit_.gating = K * 12;
  audit_.output = 1;
  audit_.total = audit_.projection + audit_.wavelet + audit_.tube + audit_.gating + audit_.output;
}

double ConstructedNet::local_expansion(std::size_t chart, const Eigen::VectorXd& x) const {
  const Eigen::VectorXd u = atlas_.charts.at(chart).local_u(x);
  return evaluate_expansion(coeffs_[chart], std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                            c_d_);
}

double ConstructedNet::chart_output(std::size_t chart, const Eigen::VectorXd& x) const {
  const Eigen::VectorXd v = atlas_.charts.at(chart).local_v(x);
  const double gv = g_(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  const double fh = local_expansion(chart, x);
  auto relu = [](double z) { return z > 0.0 ? z : 0.0; };
  const double gate = f0_ * (gv - 1.0);
  return relu(relu(fh) + gate) - relu(relu(-fh) + gate);
}

double ConstructedNet::operator()(const Eigen::VectorXd& x) const {
  require(static_cast<std::size_t>(x.size()) == g_.dim(), "input has the wrong ambient dimension");
  double total = 0.0;
  for (std::size_t i = 0; i < atlas_.charts.size(); ++i) total += chart_output(i, x);
  return total;
}

Eigen::VectorXd ConstructedNet::evaluate(const Samples& x) const {
  Eigen::VectorXd out(x.rows());
  parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[r] = (*this)(x.row(r).transpose());
  });
  return out;
}

ConstructedNet construct_net(const AmbientFunction& f, const Manifold& manifold, const Atlas& atlas,
                             const FitOptions& options) {
  options.validate();
  require(!atlas.charts.empty(), "atlas has no charts");
  const Samples dense = manifold.dense_params(4096);
  double sup = 0.0;
  for (Eigen::Index i = 0; i < dense.rows(); ++i) sup = std::max(sup, std::abs(f(manifold.point(row_span(dense, i)))));
  std::vector<ChartCoefficients> coeffs(atlas.charts.size());
  parallel_for(coeffs.size(), [&](std::size_t i) { coeffs[i] = fit_coefficients(f, manifold, atlas, i, options); });
  return ConstructedNet(manifold.kind(), atlas, std::move(coeffs), options.k_max, options.c_d, sup + 1.0);
}

ManifoldError measure_manifold_error(const ConstructedNet& net, const AmbientFunction& f, const Manifold& manifold,
                                     std::size_t n_eval, std::uint64_t seed) {
  require(n_eval >= 100, "n_eval must be at least 100");
  const Samples params = manifold.sample_params(n_eval, seed);
  ManifoldError out;
  out.errors.resize(n_eval);
  parallel_for(n_eval, [&](std::size_t i) {
    const Eigen::VectorXd x = manifold.point(row_span(params, static_cast<Eigen::Index>(i)));
    out.errors[i] = std::abs(net(x) - f(x));
  });
  out.linf = *std::max_element(out.errors.begin(), out.errors.end());
  return out;
}

DecayFit coefficient_decay(const ConstructedNet& net) {
  DecayFit fit;
  const auto d = static_cast<double>(net.atlas().charts.front().frame.rows());
  fit.target = -(2.0 / d + 0.5);
  fit.level_max.assign(static_cast<std::size_t>(net.k_max() + 1), 0.0);
  for (const auto& c : net.coefficients()) {
    for (const auto& l : c.levels) {
      auto& m = fit.level_max[static_cast<std::size_t>(l.k)];
      m = std::max(m, l.coeffs.cwiseAbs().maxCoeff());
    }
  }
  double sk = 0, sy = 0, skk = 0, sky = 0, n = 0;
  for (std::size_t k = 0; k < fit.level_max.size(); ++k) {
    if (!(fit.level_max[k] > 0.0)) continue;
    const double y = std::log2(fit.level_max[k]);
    const auto kk = static_cast<double>(k);
    sk += kk;
    sy += y;
    skk += kk * kk;
    sky += kk * y;
    n += 1;
  }
  const double den = n * skk - sk * sk;
  fit.slope = n >= 2 && den > 0.0 ? (n * sky - sk * sy) / den : 0.0;
  return fit;
}

double lipschitz_estimate(const ConstructedNet& net, std::size_t pairs, double radius, std::uint64_t seed) {
  require(pairs >= 1 && radius > 0.0, "need at least one pair and a positive radius");
  const std::size_t D = net.tube().dim();
  const double step = 1e-3 * radius;
  std::vector<double> best(pairs, 0.0);
  parallel_for(pairs, [&](std::size_t i) {
    CounterRng rng(derive_seed(seed, {i, tag_hash("lipschitz")}));
    Eigen::VectorXd a(static_cast<Eigen::Index>(D)), dir(static_cast<Eigen::Index>(D));
    for (auto& v : a) v = radius * (2.0 * rng.uniform() - 1.0);
    for (auto& v : dir) v = rng.normal();
    const Eigen::VectorXd b = a + step * dir.normalized();
    best[i] = std::abs(net(a) - net(b)) / (a - b).norm();
  });
  return *std::max_element(best.begin(), best.end());
}

int kmax_for_tolerance(double eps, std::size_t d, double constant) {
  require(eps > 0.0 && constant > 0.0 && d >= 1, "tolerance and constant must be positive");
  if (eps >= constant) return 0;
  return static_cast<int>(std::ceil(0.5 * static_cast<double>(d) * std::log2(constant / eps)));
}

void save_constructed(const ConstructedNet& net, const std::string& binary_path, const std::string& json_path) {
  using nlohmann::json;
  std::vector<DenseLayer> blocks;
  json charts = json::array();
  for (std::size_t i = 0; i < net.atlas().charts.size(); ++i) {
    const Chart& c = net.atlas().charts[i];
    blocks.push_back({c.frame, -(c.frame * c.center)});
    json levels = json::array();
    for (const auto& l : net.coefficients()[i].levels) {
      blocks.push_back({l.coeffs.transpose(), Eigen::VectorXd::Zero(1)});
      levels.push_back({{"k", l.k}, {"lo", l.lo}, {"hi", l.hi}});
    }
    const auto& fit = net.coefficients()[i];
    charts.push_back({{"center", std::vector<double>(c.center.data(), c.center.data() + c.center.size())},
                      {"center_param", c.center_param},
                      {"alpha", c.alpha},
                      {"beta", c.beta},
                      {"residual_rms", fit.residual_rms},
                      {"residual_max", fit.residual_max},
                      {"condition", fit.condition},
                      {"levels", levels}});
  }
  const auto& a = net.audit();
  const json doc{{"format", "c2st-constructed-net"},
                 {"manifold", manifold_kind_name(net.kind())},
                 {"delta", net.atlas().delta},
                 {"halvings", net.atlas().halvings},
                 {"k_max", net.k_max()},
                 {"c_d", net.c_d()},
                 {"f0", net.f0()},
                 {"parameter_count", net.parameter_count()},
                 {"audit",
                  {{"projection", a.projection},
                   {"wavelet", a.wavelet},
                   {"tube", a.tube},
                   {"gating", a.gating},
                   {"output", a.output}}},
                 {"charts", charts}};
  std::ostringstream bin(std::ios::binary);
  save_blocks(blocks, bin);
  const std::string text = doc.dump(2) + "\n";
  std::ofstream bout(binary_path, std::ios::binary);
  if (!bout) fail(ErrorCode::kIo, "cannot open '" + binary_path + "' for writing");
  bout << bin.str();
  std::ofstream jout(json_path);
  if (!jout) fail(ErrorCode::kIo, "cannot open '" + json_path + "' for writing");
  jout << text;
  if (!bout || !jout) fail(ErrorCode::kIo, "failed writing constructed net");
}

ConstructedNet load_constructed(const std::string& binary_path, const std::string& json_path) {
  using nlohmann::json;
  std::ifstream jin(json_path);
  if (!jin) fail(ErrorCode::kIo, "cannot open '" + json_path + "'");
  json doc;
  try {
    doc = json::parse(jin);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("constructed-net sidecar is not valid JSON: ") + e.what());
  }
  std::ifstream bin(binary_path, std::ios::binary);
  if (!bin) fail(ErrorCode::kIo, "cannot open '" + binary_path + "'");
  const auto blocks = load_blocks(bin);
  try {
    if (doc.at("format") != "c2st-constructed-net") fail(ErrorCode::kFormat, "sidecar is not a constructed-net file");
    Atlas atlas;
    atlas.delta = doc.at("delta").get<double>();
    atlas.halvings = doc.at("halvings").get<std::size_t>();
    std::vector<ChartCoefficients> coeffs;
    std::vector<Eigen::VectorXd> centers;
    std::size_t bi = 0;
    auto next = [&]() -> const DenseLayer& {
      if (bi >= blocks.size()) fail(ErrorCode::kFormat, "binary file has fewer blocks than the sidecar lists");
      return blocks[bi++];
    };
    for (const auto& jc : doc.at("charts")) {
      Chart c;
      const auto center = jc.at("center").get<std::vector<double>>();
      c.center = Eigen::Map<const Eigen::VectorXd>(center.data(), static_cast<Eigen::Index>(center.size()));
      c.center_param = jc.at("center_param").get<std::vector<double>>();
      c.alpha = jc.at("alpha").get<double>();
      c.beta = jc.at("beta").get<double>();
      c.radius = atlas.delta;
      const DenseLayer& proj = next();
      if (proj.weight.cols() != c.center.size()) fail(ErrorCode::kFormat, "chart frame has the wrong width");
      c.frame = proj.weight;
      ChartCoefficients cc;
      cc.residual_rms = jc.at("residual_rms").get<double>();
      cc.residual_max = jc.at("residual_max").get<double>();
      cc.condition = jc.at("condition").get<double>();
      for (const auto& jl : jc.at("levels")) {
        LevelCoefficients l;
        l.k = jl.at("k").get<int>();
        l.lo = jl.at("lo").get<long>();
        l.hi = jl.at("hi").get<long>();
        const DenseLayer& blk = next();
        if (blk.weight.rows() != 1) fail(ErrorCode::kFormat, "coefficient block must have one row");
        if (l.hi < l.lo || static_cast<std::size_t>(blk.weight.cols()) != level_size(l, static_cast<std::size_t>(c.frame.rows()))) {
          fail(ErrorCode::kFormat, "coefficient block size disagrees with the level offsets");
        }
        l.coeffs = blk.weight.row(0).transpose();
        cc.levels.push_back(std::move(l));
      }
      centers.push_back(c.center);
      atlas.charts.push_back(std::move(c));
      coeffs.push_back(std::move(cc));
    }
    if (bi != blocks.size()) fail(ErrorCode::kFormat, "binary file has more blocks than the sidecar lists");
    atlas.partition = PartitionOfUnity(std::move(centers), atlas.delta);
    ConstructedNet net(parse_manifold_kind(doc.at("manifold").get<std::string>()), std::move(atlas),
                       std::move(coeffs), doc.at("k_max").get<int>(), doc.at("c_d").get<double>(),
                       doc.at("f0").get<double>());
    if (net.parameter_count() != doc.at("parameter_count").get<std::size_t>()) {
      fail(ErrorCode::kFormat, "audited parameter count disagrees with the sidecar");
    }
    return net;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("constructed-net sidecar is malformed: ") + e.what());
  }
}

}  // namespace c2st
