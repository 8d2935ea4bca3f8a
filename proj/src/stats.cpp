#include "c2st/stats.hpp"

#include "c2st/error.hpp"
#include "c2st/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c2st {

namespace {

constexpr std::uint64_t kPermStream = 0x7065726DULL;

void require_alpha(double alpha) { require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)"); }

double sign(double z) { return z >= 0.0 ? 1.0 : -1.0; }

double score_stat(const double* z, std::size_t nx, std::size_t n, ScoreStatistic stat) {
  double sx = 0.0, sy = 0.0;
  if (stat == ScoreStatistic::kLogit) {
    for (std::size_t i = 0; i < nx; ++i) sx += z[i];
    for (std::size_t i = nx; i < n; ++i) sy += z[i];
    return sx / static_cast<double>(nx) - sy / static_cast<double>(n - nx);
  }
  for (std::size_t i = 0; i < nx; ++i) sx += sign(z[i]);
  for (std::size_t i = nx; i < n; ++i) sy += sign(z[i]);
  return 0.5 + 0.25 * (sx / static_cast<double>(nx) - sy / static_cast<double>(n - nx));
}

TestOutcome finish(double statistic, std::vector<double> nulls, double alpha, Method method) {
  TestOutcome out;
  out.statistic = statistic;
  out.method = method;
  const auto at_least = std::count_if(nulls.begin(), nulls.end(), [&](double v) { return v >= statistic; });
  out.p_value = (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(nulls.size()));
  out.threshold = permutation_threshold(nulls, alpha);
  out.reject = statistic > out.threshold;
  out.null_samples = std::move(nulls);
  return out;
}

}  // namespace

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::kNetLogit: return "net-logit";
    case Method::kNetAcc: return "net-acc";
    case Method::kGmmd: return "gmmd";
    case Method::kGmmdAd: return "gmmd-ad";
    case Method::kGmmdPlus: return "gmmd+";
    case Method::kGmmdPlusPlus: return "gmmd++";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::kNetLogit, Method::kNetAcc, Method::kGmmd, Method::kGmmdAd, Method::kGmmdPlus,
                 Method::kGmmdPlusPlus}) {
    if (name == method_name(m)) return m;
  }
  fail(ErrorCode::kInvalidInput,
       "unknown method '" + name + "' (expected net-logit, net-acc, gmmd, gmmd-ad, gmmd+ or gmmd++)");
}

bool is_network_method(Method m) noexcept { return m == Method::kNetLogit || m == Method::kNetAcc; }

void ScoredSamples::validate() const {
  require(x_scores.size() >= 1 && y_scores.size() >= 1, "scored samples must be nonempty on both sides");
  require(x_scores.allFinite() && y_scores.allFinite(), "scores must be finite");
}

double logit_stat(const ScoredSamples& s) {
  s.validate();
  return s.x_scores.mean() - s.y_scores.mean();
}

double acc_stat(const ScoredSamples& s) {
  s.validate();
  require(s.x_scores.size() == s.y_scores.size(), "acc_stat requires equal sample sizes");
  double sx = 0.0, sy = 0.0;
  for (double v : s.x_scores) sx += sign(v);
  for (double v : s.y_scores) sy += sign(v);
  return 0.5 + 0.25 * (sx / static_cast<double>(s.x_scores.size()) - sy / static_cast<double>(s.y_scores.size()));
}

ScoredSamples sign_scores(const ScoredSamples& s) {
  return {s.x_scores.unaryExpr([](double v) { return sign(v); }), s.y_scores.unaryExpr([](double v) { return sign(v); })};
}

Samples pool(const Samples& x, const Samples& y) {
  require(x.cols() == y.cols(), "samples must share a dimension");
  Samples z(x.rows() + y.rows(), x.cols());
  z << x, y;
  return z;
}

Eigen::MatrixXd gaussian_gram(const Samples& pooled, double sigma) {
  require(sigma > 0.0, "kernel bandwidth must be positive");
  const Eigen::Index n = pooled.rows();
  const Eigen::VectorXd sq = pooled.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (pooled * pooled.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  Eigen::MatrixXd k(n, n);
  const double c = -1.0 / (2.0 * sigma * sigma);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) k(i, j) = i == j ? 1.0 : std::exp(c * std::max(0.0, d2(i, j)));
  }
  return k;
}

double gram_mmd(const Eigen::MatrixXd& gram, std::size_t nx) {
  const auto n = static_cast<std::size_t>(gram.rows());
  require(nx >= 1 && nx < n, "gram_mmd needs both samples nonempty");
  const auto a = static_cast<Eigen::Index>(nx);
  const auto b = static_cast<Eigen::Index>(n - nx);
  const double kxx = gram.topLeftCorner(a, a).sum();
  const double kyy = gram.bottomRightCorner(b, b).sum();
  const double kxy = gram.topRightCorner(a, b).sum();
  return kxx / static_cast<double>(a * a) + kyy / static_cast<double>(b * b) - 2.0 * kxy / static_cast<double>(a * b);
}

double gmmd_stat(const Samples& x, const Samples& y, double sigma) {
  require(sigma > 0.0, "kernel bandwidth must be positive, got " + std::to_string(sigma));
  require(x.rows() >= 1 && y.rows() >= 1, "gmmd_stat needs both samples nonempty");
  return gram_mmd(gaussian_gram(pool(x, y), sigma), static_cast<std::size_t>(x.rows()));
}

double median_bandwidth(const Samples& z) {
  const Eigen::Index n = z.rows();
  require(n >= 2, "median bandwidth needs at least two points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((z.row(i) - z.row(j)).norm());
  }
  const std::size_t m = d.size();
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (m % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  if (!(med > 0.0)) fail(ErrorCode::kZeroBandwidth, "median pairwise distance is zero; points are (mostly) identical");
  return med;
}

std::vector<double> default_bandwidth_grid() {
  std::vector<double> g;
  for (int k = -3; k <= 3; ++k) g.push_back(std::ldexp(1.0, k));
  return g;
}

BandwidthSelection select_bandwidth_ad(const Samples& x, const Samples& y, const std::vector<double>& grid) {
  require(!grid.empty(), "bandwidth grid must be nonempty");
  BandwidthSelection sel;
  sel.grid = grid;
  double best = -std::numeric_limits<double>::infinity();
  for (double s : grid) {
    const double v = gmmd_stat(x, y, s);
    sel.scores.push_back(v);
    if (v > best || (v == best && s < sel.chosen)) {
      best = v;
      sel.chosen = s;
    }
  }
  return sel;
}

double permutation_threshold(std::vector<double> nulls, double alpha) {
  require_alpha(alpha);
  require(!nulls.empty(), "need at least one null replicate");
  const auto m = static_cast<double>(nulls.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * m - 1e-9));
  k = std::clamp<std::size_t>(k, 1, nulls.size());
  std::nth_element(nulls.begin(), nulls.begin() + static_cast<std::ptrdiff_t>(k - 1), nulls.end());
  return nulls[k - 1];
}

TestOutcome permutation_calibrate(const ScoredSamples& s, ScoreStatistic stat, std::size_t m_perm, double alpha,
                                  std::uint64_t seed, Method method) {
  s.validate();
  require(m_perm >= 1, "m_perm must be at least 1");
  require_alpha(alpha);
  const auto nx = static_cast<std::size_t>(s.x_scores.size());
  const std::size_t n = nx + static_cast<std::size_t>(s.y_scores.size());
  if (stat == ScoreStatistic::kAcc) require(s.x_scores.size() == s.y_scores.size(), "acc_stat requires equal sample sizes");
  std::vector<double> pooled(n);
  std::copy(s.x_scores.begin(), s.x_scores.end(), pooled.begin());
  std::copy(s.y_scores.begin(), s.y_scores.end(), pooled.begin() + static_cast<std::ptrdiff_t>(nx));
  const double observed = score_stat(pooled.data(), nx, n, stat);
  std::vector<double> nulls(m_perm);
  std::vector<double> perm(n);
  for (std::size_t r = 0; r < m_perm; ++r) {
    CounterRng rng(derive_seed(seed, {kPermStream}), r);
    perm = pooled;
    shuffle(std::span<double>(perm), rng);
    nulls[r] = score_stat(perm.data(), nx, n, stat);
  }
  return finish(observed, std::move(nulls), alpha, method);
}

TestOutcome permutation_calibrate_gram(const Eigen::MatrixXd& gram, std::size_t nx, std::size_t m_perm, double alpha,
                                       std::uint64_t seed, Method method) {
  require(gram.rows() == gram.cols(), "gram matrix must be square");
  require(m_perm >= 1, "m_perm must be at least 1");
  require_alpha(alpha);
  const auto n = static_cast<std::size_t>(gram.rows());
  require(nx >= 1 && nx < n, "both samples must be nonempty");
  const double observed = gram_mmd(gram, nx);
  const double wx = 1.0 / static_cast<double>(nx), wy = -1.0 / static_cast<double>(n - nx);
  std::vector<double> nulls(m_perm);
  std::vector<std::size_t> idx(n);
  Eigen::VectorXd a(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < m_perm; ++r) {
    CounterRng rng(derive_seed(seed, {kPermStream}), r);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(std::span<std::size_t>(idx), rng);
    for (std::size_t i = 0; i < n; ++i) a[static_cast<Eigen::Index>(idx[i])] = i < nx ? wx : wy;
    // a^T K a with a = 1/nx on permuted X, -1/ny on permuted Y.
    nulls[r] = a.dot(gram.selfadjointView<Eigen::Lower>() * a);
  }
  return finish(observed, std::move(nulls), alpha, method);
}

double normal_upper_quantile(double alpha) {
  require_alpha(alpha);
  // Acklam's approximation of the lower quantile at p = 1 - alpha.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double p = 1.0 - alpha;
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(alpha));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the survival function, computed with erfc so
  // that small alpha keeps full relative accuracy.
  const double e = 0.5 * std::erfc(x / std::sqrt(2.0)) - alpha;
  const double u = -e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

double asymptotic_threshold(double null_sd, std::size_t n, double alpha) {
  require(null_sd >= 0.0, "null standard deviation must be nonnegative");
  require(n >= 1, "n must be at least 1");
  return null_sd / std::sqrt(static_cast<double>(n)) * normal_upper_quantile(alpha);
}

double estimate_null_sd(const ScoredSamples& s) {
  const Eigen::Index n = s.x_scores.size() + s.y_scores.size();
  require(n >= 2, "need at least two pooled scores");
  Eigen::VectorXd z(n);
  z << s.x_scores, s.y_scores;
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(n - 1);
  return std::sqrt(2.0 * var);
}

}  // namespace c2st
