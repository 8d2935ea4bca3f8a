#include "c2st/functionals.hpp"

#include "c2st/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace c2st {

namespace {

constexpr double kSoftplusBranch = 30.0;
constexpr double kMinSpread = 1e-14;

}  // namespace

double softplus(double f) {
  if (f > kSoftplusBranch) return f + std::log1p(std::exp(-f));
  if (f < -kSoftplusBranch) return std::exp(f);
  return std::log1p(std::exp(f));
}

double log_two_sigmoid(double f) { return std::numbers::ln2 + f - softplus(f); }

double log_two_sigmoid_complement(double f) { return std::numbers::ln2 - softplus(f); }

PairQuadrature::PairQuadrature(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid) {
  build(p, q, grid);
}

PairQuadrature::PairQuadrature(const AnalyticDensity& p, const AnalyticDensity& q) { build(p, q, default_grid(p, q)); }

void PairQuadrature::build(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid) {
  require(p.ambient_dim() == q.ambient_dim() && p.quadrature_dim() == q.quadrature_dim() &&
              p.kind() == q.kind(),
          "density pair must be of the same kind and dimension");
  require(grid.dim() == p.quadrature_dim(), "grid dimension does not match the densities");
  const auto n = static_cast<Eigen::Index>(grid.size());
  const std::size_t qd = grid.dim();
  const auto D = static_cast<Eigen::Index>(p.ambient_dim());
  points_.resize(n, D);
  weights_.resize(n);
  p_.resize(n), q_.resize(n), log_p_.resize(n), log_q_.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::span<const double> z(grid.nodes().data() + static_cast<std::size_t>(j) * qd, qd);
    p.to_ambient(z, std::span<double>(points_.data() + j * D, static_cast<std::size_t>(D)));
    weights_[j] = grid.weights()[static_cast<std::size_t>(j)];
    log_p_[j] = p.quadrature_log_pdf(z);
    log_q_[j] = q.quadrature_log_pdf(z);
    p_[j] = std::exp(log_p_[j]);
    q_[j] = std::exp(log_q_[j]);
  }
}

Eigen::VectorXd PairQuadrature::evaluate(const BatchWitness& f) const {
  Eigen::VectorXd v = f(points_);
  require(v.size() == points_.rows(), "witness returned the wrong number of values");
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!std::isfinite(v[j])) {
      std::ostringstream os;
      os.precision(17);
      os << "witness is not finite at grid point (";
      for (Eigen::Index c = 0; c < points_.cols(); ++c) os << (c ? ", " : "") << points_(j, c);
      os << ")";
      fail(ErrorCode::kEvaluation, os.str());
    }
  }
  return v;
}

double population_loss_values(const Eigen::VectorXd& f, const PairQuadrature& pq) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) {
    const double sp = softplus(f[j]);
    const double a = std::numbers::ln2 + f[j] - sp;
    const double b = std::numbers::ln2 - sp;
    acc += pq.weights()[j] * (pq.p()[j] * a + pq.q()[j] * b);
  }
  return 0.5 * acc;
}

double population_stat_values(const Eigen::VectorXd& f, const PairQuadrature& pq) {
  return (pq.weights().array() * f.array() * (pq.p() - pq.q()).array()).sum();
}

WitnessSummary mean_std_summary_values(const Eigen::VectorXd& w, const PairQuadrature& pq) {
  const auto& wt = pq.weights().array();
  const double mp = (wt * pq.p().array() * w.array()).sum();
  const double mq = (wt * pq.q().array() * w.array()).sum();
  const double vp = (wt * pq.p().array() * (w.array() - mp).square()).sum();
  const double vq = (wt * pq.q().array() * (w.array() - mq).square()).sum();
  WitnessSummary s;
  s.mean_gap = mp - mq;
  s.spread = std::sqrt(std::max(0.0, vp + vq));
  if (s.spread < kMinSpread) {
    fail(ErrorCode::kDegenerateWitness, "witness spread below 1e-14; Mean/Std ratio undefined");
  }
  s.ratio = s.mean_gap / s.spread;
  return s;
}

LemmaReport lemma_bounds_values(const Eigen::VectorXd& f, const PairQuadrature& pq) {
  LemmaReport r;
  r.stat = population_stat_values(f, pq);
  r.loss = population_loss_values(f, pq);
  r.gap_lemma1 = r.stat - 4.0 * r.loss;
  r.gap_lemma2_low = 0.5 * r.stat - 2.0 * r.loss;
  r.gap_lemma2_high = 0.5 * (pq.weights().array() * (pq.p() + pq.q()).array() * f.array().square()).sum();
  return r;
}

double population_loss(const BatchWitness& f, const PairQuadrature& pq) {
  return population_loss_values(pq.evaluate(f), pq);
}

double population_stat(const BatchWitness& f, const PairQuadrature& pq) {
  return population_stat_values(pq.evaluate(f), pq);
}

WitnessSummary mean_std_summary(const BatchWitness& w, const PairQuadrature& pq) {
  return mean_std_summary_values(pq.evaluate(w), pq);
}

LemmaReport lemma_bounds_report(const BatchWitness& f, const PairQuadrature& pq) {
  return lemma_bounds_values(pq.evaluate(f), pq);
}

double jsd(const PairQuadrature& pq) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < pq.weights().size(); ++j) {
    const double lp = pq.log_p()[j], lq = pq.log_q()[j];
    // log((p + q) / 2) via log-sum-exp.
    const double m = std::max(lp, lq);
    if (!std::isfinite(m)) continue;
    const double lmid = m + std::log(0.5 * (std::exp(lp - m) + std::exp(lq - m)));
    double term = 0.0;
    if (pq.p()[j] > 0.0) term += pq.p()[j] * (lp - lmid);
    if (pq.q()[j] > 0.0) term += pq.q()[j] * (lq - lmid);
    acc += pq.weights()[j] * term;
  }
  return 0.5 * acc;
}

double skl(const PairQuadrature& pq) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < pq.weights().size(); ++j) {
    const double p = pq.p()[j], q = pq.q()[j];
    if (p == 0.0 && q == 0.0) continue;
    if (p == 0.0 || q == 0.0) return std::numeric_limits<double>::infinity();
    acc += pq.weights()[j] * (p - q) * (pq.log_p()[j] - pq.log_q()[j]);
  }
  return acc;
}

double population_loss(const BatchWitness& f, const AnalyticDensity& p, const AnalyticDensity& q,
                       const QuadratureGrid& grid) {
  return population_loss(f, PairQuadrature(p, q, grid));
}

double population_stat(const BatchWitness& f, const AnalyticDensity& p, const AnalyticDensity& q,
                       const QuadratureGrid& grid) {
  return population_stat(f, PairQuadrature(p, q, grid));
}

double jsd(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid) {
  return jsd(PairQuadrature(p, q, grid));
}

double skl(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid) {
  return skl(PairQuadrature(p, q, grid));
}

double jsd_refined(const AnalyticDensity& p, const AnalyticDensity& q, double tol) {
  QuadratureGrid grid(joint_support(p, q), QuadratureGrid::kMinNodes * 2);
  double prev = jsd(p, q, grid);
  for (int level = 0; level < 12; ++level) {
    grid = grid.refined();
    const double cur = jsd(p, q, grid);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

BatchWitness log_ratio_witness(const AnalyticDensity& p, const AnalyticDensity& q) {
  return [p, q](const Samples& x) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = log_ratio(p, q, row_span(x, i));
    return out;
  };
}

BatchWitness sign_witness(BatchWitness f) {
  return [f = std::move(f)](const Samples& x) {
    Eigen::VectorXd v = f(x);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = v[i] >= 0.0 ? 1.0 : -1.0;
    return v;
  };
}

BatchWitness kernel_witness(const AnalyticDensity& p, const AnalyticDensity& q, double sigma) {
  require(sigma > 0.0, "kernel bandwidth must be positive");
  return [p, q, sigma](const Samples& x) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out[i] = p.kernel_embedding(row_span(x, i), sigma) - q.kernel_embedding(row_span(x, i), sigma);
    }
    return out;
  };
}

BatchWitness clipped_witness(BatchWitness f, double level) {
  require(level > 0.0, "clip level must be positive");
  return [f = std::move(f), level](const Samples& x) {
    Eigen::VectorXd v = f(x);
    return Eigen::VectorXd(v.array().max(-level).min(level));
  };
}

}  // namespace c2st
