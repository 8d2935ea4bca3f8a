#pragma once

#include "c2st/densities.hpp"
#include "c2st/quadrature.hpp"
#include "c2st/types.hpp"

#include <vector>

namespace c2st {

// Quadrature nodes of a density pair mapped to ambient space, with both
// densities tabulated once. Immutable after construction.
class PairQuadrature {
 public:
  PairQuadrature(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid);
  PairQuadrature(const AnalyticDensity& p, const AnalyticDensity& q);

  const Samples& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& p() const { return p_; }
  const Eigen::VectorXd& q() const { return q_; }
  const Eigen::VectorXd& log_p() const { return log_p_; }
  const Eigen::VectorXd& log_q() const { return log_q_; }

  // Witness values at every node; non-finite values raise kEvaluation naming the node.
  Eigen::VectorXd evaluate(const BatchWitness& f) const;

 private:
  void build(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid);

  Samples points_;
  Eigen::VectorXd weights_, p_, q_, log_p_, log_q_;
};

struct WitnessSummary {
  double mean_gap = 0.0;
  double spread = 0.0;
  double ratio = 0.0;
};

struct LemmaReport {
  double stat = 0.0;
  double loss = 0.0;
  double gap_lemma1 = 0.0;       // T - 4L
  double gap_lemma2_low = 0.0;   // T/2 - 2L
  double gap_lemma2_high = 0.0;  // integral of (p + q) f^2 / 2
};

// log(2 e^f / (1 + e^f)) and log(2 / (1 + e^f)) without overflow.
double softplus(double f);
double log_two_sigmoid(double f);
double log_two_sigmoid_complement(double f);

// L[f] = 1/2 (int p log(2D) + int q log(2(1 - D))), D = sigmoid(f).
double population_loss(const BatchWitness& f, const PairQuadrature& pq);
// T[f] = int f (p - q).
double population_stat(const BatchWitness& f, const PairQuadrature& pq);
double jsd(const PairQuadrature& pq);
// KL(p||q) + KL(q||p); +inf when one density vanishes where the other does not.
double skl(const PairQuadrature& pq);
WitnessSummary mean_std_summary(const BatchWitness& w, const PairQuadrature& pq);
LemmaReport lemma_bounds_report(const BatchWitness& f, const PairQuadrature& pq);

// Value-level forms over precomputed node values.
double population_loss_values(const Eigen::VectorXd& f, const PairQuadrature& pq);
double population_stat_values(const Eigen::VectorXd& f, const PairQuadrature& pq);
WitnessSummary mean_std_summary_values(const Eigen::VectorXd& w, const PairQuadrature& pq);
LemmaReport lemma_bounds_values(const Eigen::VectorXd& f, const PairQuadrature& pq);

// Grid-taking conveniences.
double population_loss(const BatchWitness& f, const AnalyticDensity& p, const AnalyticDensity& q,
                       const QuadratureGrid& grid);
double population_stat(const BatchWitness& f, const AnalyticDensity& p, const AnalyticDensity& q,
                       const QuadratureGrid& grid);
double jsd(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid);
double skl(const AnalyticDensity& p, const AnalyticDensity& q, const QuadratureGrid& grid);

// JSD with the grid refined until successive values differ by less than tol.
double jsd_refined(const AnalyticDensity& p, const AnalyticDensity& q, double tol = 1e-6);

// f* = log p/q.
BatchWitness log_ratio_witness(const AnalyticDensity& p, const AnalyticDensity& q);
// Sign(f*), with Sign(0) = +1.
BatchWitness sign_witness(BatchWitness f);
// Population Gaussian-kernel MMD witness E_p k(x, .) - E_q k(x, .).
BatchWitness kernel_witness(const AnalyticDensity& p, const AnalyticDensity& q, double sigma);
BatchWitness clipped_witness(BatchWitness f, double level);

}  // namespace c2st
