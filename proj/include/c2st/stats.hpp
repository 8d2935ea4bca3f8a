#pragma once

#include "c2st/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace c2st {

enum class Method { kNetLogit, kNetAcc, kGmmd, kGmmdAd, kGmmdPlus, kGmmdPlusPlus };

const char* method_name(Method m) noexcept;
Method parse_method(const std::string& name);
bool is_network_method(Method m) noexcept;

struct ScoredSamples {
  Eigen::VectorXd x_scores;
  Eigen::VectorXd y_scores;

  void validate() const;
};

struct TestOutcome {
  double statistic = 0.0;
  double threshold = 0.0;
  double p_value = 1.0;
  bool reject = false;
  std::vector<double> null_samples;
  Method method = Method::kNetLogit;
};

struct BandwidthSelection {
  std::vector<double> grid;
  std::vector<double> scores;
  double chosen = 1.0;
};

double logit_stat(const ScoredSamples& s);
// 1/2 + 1/4 (mean Sign(x) - mean Sign(y)), Sign(0) = +1; requires equal sizes.
double acc_stat(const ScoredSamples& s);
ScoredSamples sign_scores(const ScoredSamples& s);

// Biased (V-statistic) Gaussian-kernel MMD^2, diagonal terms included.
double gmmd_stat(const Samples& x, const Samples& y, double sigma);
Eigen::MatrixXd gaussian_gram(const Samples& pooled, double sigma);
// Same statistic from a pooled Gram matrix where rows [0, nx) are X.
double gram_mmd(const Eigen::MatrixXd& gram, std::size_t nx);

// Median of pairwise Euclidean distances; even counts average the middle pair.
double median_bandwidth(const Samples& pooled);
Samples pool(const Samples& x, const Samples& y);

// {2^-3, ..., 2^3}.
std::vector<double> default_bandwidth_grid();
BandwidthSelection select_bandwidth_ad(const Samples& x_train, const Samples& y_train, const std::vector<double>& grid);

enum class ScoreStatistic { kLogit, kAcc };

// Label permutations on fixed scores. Replicate i draws from stream (seed, i),
// so the null vector does not depend on evaluation order.
TestOutcome permutation_calibrate(const ScoredSamples& s, ScoreStatistic stat, std::size_t m_perm, double alpha,
                                  std::uint64_t seed, Method method);
// Label permutations on a precomputed pooled Gram matrix.
TestOutcome permutation_calibrate_gram(const Eigen::MatrixXd& gram, std::size_t nx, std::size_t m_perm, double alpha,
                                       std::uint64_t seed, Method method);
// tau: the ceil((1 - alpha) m)-th order statistic of the null replicates.
double permutation_threshold(std::vector<double> null_samples, double alpha);

// z with P(N(0,1) > z) = alpha: Acklam's rational approximation refined by one Halley step.
double normal_upper_quantile(double alpha);
double asymptotic_threshold(double null_sd, std::size_t n, double alpha);
// sqrt(2 * pooled sample variance), denominator count - 1.
double estimate_null_sd(const ScoredSamples& s);

}  // namespace c2st
