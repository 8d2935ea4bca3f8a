#include <doctest.h>

#include "c2st/error.hpp"
#include "c2st/rng.hpp"
#include "c2st/stats.hpp"

#include <algorithm>
#include <cmath>

using namespace c2st;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

Eigen::VectorXd normals(std::size_t n, std::uint64_t seed, double shift = 0.0, double sd = 1.0) {
  CounterRng rng(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = shift + sd * rng.normal();
  return v;
}

Samples column(std::initializer_list<double> v) {
  Samples s(static_cast<Eigen::Index>(v.size()), 1);
  std::copy(v.begin(), v.end(), s.data());
  return s;
}

}  // namespace

TEST_CASE("logit statistic") {
  CHECK(logit_stat({vec({0, 0}), vec({0, 0, 0})}) == 0.0);
  CHECK(logit_stat({vec({1, 3}), vec({2, 4})}) == -1.0);
  CHECK(logit_stat({vec({1, 5, 2}), vec({2, 1, 5})}) == doctest::Approx(0.0));
}

TEST_CASE("accuracy statistic") {
  CHECK(acc_stat({vec({0.5, 2, 0}), vec({-1, -0.1, -3})}) == 1.0);
  CHECK(acc_stat({vec({0, 0}), vec({0, 0})}) == 0.5);
  CHECK_THROWS_AS(acc_stat({vec({1, 2}), vec({1})}), Error);
}

TEST_CASE("accuracy statistic equals the logit statistic of sign scores") {
  CounterRng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    ScoredSamples s{normals(n, rng.next_u64()), normals(n, rng.next_u64(), 0.3)};
    if (trial % 5 == 0) s.x_scores[0] = 0.0;
    const double a = acc_stat(s);
    CHECK(a == 0.5 + 0.25 * logit_stat(sign_scores(s)));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("gaussian MMD closed forms") {
  auto x = column({0.0, 1.0, 2.5});
  CHECK(std::abs(gmmd_stat(x, x, 0.7)) < 1e-12);
  auto a = column({0.2}), b = column({1.7});
  CHECK(gmmd_stat(a, b, 0.9) == doctest::Approx(2.0 - 2.0 * std::exp(-1.5 * 1.5 / (2 * 0.81))).epsilon(1e-14));
  CHECK(gmmd_stat(column({0, 1, 2}), column({5, 6}), 1e6) < 1e-10);
  CHECK_THROWS_AS(gmmd_stat(a, b, 0.0), Error);
}

TEST_CASE("gaussian MMD is nonnegative") {
  CounterRng rng(1);
  for (int t = 0; t < 50; ++t) {
    Samples x(7, 2), y(9, 2);
    for (auto& v : x.reshaped()) v = rng.normal();
    for (auto& v : y.reshaped()) v = rng.normal() + 0.2;
    CHECK(gmmd_stat(x, y, 0.25 + rng.uniform()) >= -1e-14);
  }
}

TEST_CASE("median bandwidth") {
  CHECK(median_bandwidth(column({0, 1, 3})) == 2.0);
  CHECK(median_bandwidth(column({0, 1})) == 1.0);
  Samples sq(4, 2);
  sq << 0, 0, 1, 0, 0, 1, 1, 1;
  CHECK(median_bandwidth(sq) == 1.0);
  // Distances {1, 2, 3, 1, 2, 1}: sorted 1 1 1 2 2 3, middle pair (1, 2).
  CHECK(median_bandwidth(column({0, 1, 2, 3})) == 1.5);
  try {
    median_bandwidth(column({4, 4, 4}));
    FAIL("expected zero bandwidth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroBandwidth);
  }
}

TEST_CASE("bandwidth selection picks the grid argmax") {
  // Two tight pairs three apart: sigma = 1 correlates within a pair and not across.
  auto x = column({0.0, 0.5}), y = column({3.0, 3.5});
  CHECK(select_bandwidth_ad(x, y, {0.5}).chosen == 0.5);
  auto grid = default_bandwidth_grid();
  CHECK(grid.size() == 7);
  CHECK(grid.front() == 0.125);
  CHECK(grid.back() == 8.0);
  auto sel = select_bandwidth_ad(x, y, grid);
  const auto best = std::max_element(sel.scores.begin(), sel.scores.end()) - sel.scores.begin();
  CHECK(sel.chosen == grid[static_cast<std::size_t>(best)]);
  CHECK(sel.chosen == 1.0);
  CHECK(select_bandwidth_ad(x, y, grid).chosen == sel.chosen);
}

TEST_CASE("bandwidth ties go to the smaller sigma") {
  auto x = column({0.0}), y = column({0.0});
  CHECK(select_bandwidth_ad(x, y, {2.0, 1.0, 4.0}).chosen == 1.0);
}

TEST_CASE("single-replicate permutation threshold is that replicate") {
  auto out = permutation_calibrate({vec({1, 2, 3}), vec({0, 1, 2})}, ScoreStatistic::kLogit, 1, 0.05, 7,
                                   Method::kNetLogit);
  REQUIRE(out.null_samples.size() == 1);
  CHECK(out.threshold == out.null_samples[0]);
  CHECK(out.reject == (out.statistic > out.threshold));
}

TEST_CASE("threshold uses the ceiling order statistic") {
  std::vector<double> v;
  for (int i = 1; i <= 200; ++i) v.push_back(i);
  CHECK(permutation_threshold(v, 0.05) == 190.0);
  CHECK(permutation_threshold(v, 0.01) == 198.0);
  CHECK(permutation_threshold({3.0, 1.0, 2.0}, 0.5) == 2.0);
}

TEST_CASE("p-value follows the add-one convention") {
  ScoredSamples s{normals(50, 1, 0.5), normals(50, 2)};
  auto out = permutation_calibrate(s, ScoreStatistic::kLogit, 300, 0.05, 9, Method::kNetLogit);
  const auto ge = std::count_if(out.null_samples.begin(), out.null_samples.end(), [&](double v) { return v >= out.statistic; });
  CHECK(out.p_value == (1.0 + static_cast<double>(ge)) / 301.0);
  CHECK(out.reject == (out.statistic > out.threshold));
}

TEST_CASE("null replicates of the logit statistic are centred") {
  ScoredSamples s{normals(100, 3), normals(100, 4)};
  auto out = permutation_calibrate(s, ScoreStatistic::kLogit, 2000, 0.05, 1, Method::kNetLogit);
  Eigen::Map<Eigen::VectorXd> nulls(out.null_samples.data(), static_cast<Eigen::Index>(out.null_samples.size()));
  const double mean = nulls.mean();
  const double sd = std::sqrt((nulls.array() - mean).square().sum() / (nulls.size() - 1.0));
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(nulls.size())));
}

TEST_CASE("permutation test has nominal size under the null") {
  int rejections = 0;
  for (std::uint64_t rep = 0; rep < 400; ++rep) {
    ScoredSamples s{normals(50, 1000 + rep), normals(50, 5000 + rep)};
    rejections += permutation_calibrate(s, ScoreStatistic::kLogit, 1000, 0.05, rep, Method::kNetLogit).reject;
  }
  const double rate = rejections / 400.0;
  CHECK(rate >= 0.02);
  CHECK(rate <= 0.08);
}

TEST_CASE("null distribution depends only on the pooled multiset") {
  ScoredSamples s{vec({1, 2, 3, 4}), vec({5, 6, 7, 8})};
  ScoredSamples reordered{vec({4, 3, 2, 1}), vec({8, 7, 6, 5})};
  auto a = permutation_calibrate(s, ScoreStatistic::kLogit, 500, 0.05, 3, Method::kNetLogit);
  auto b = permutation_calibrate(reordered, ScoreStatistic::kLogit, 500, 0.05, 3, Method::kNetLogit);
  auto sa = a.null_samples, sb = b.null_samples;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double mean_a = 0, mean_b = 0;
  for (double v : sa) mean_a += v / 500;
  for (double v : sb) mean_b += v / 500;
  CHECK(a.statistic == b.statistic);
  CHECK(std::abs(mean_a - mean_b) < 0.3);
}

TEST_CASE("swapping labels negates the logit statistic") {
  ScoredSamples s{normals(30, 1, 1.0), normals(30, 2)};
  CHECK(logit_stat({s.y_scores, s.x_scores}) == -logit_stat(s));
}

TEST_CASE("thresholds are monotone in alpha") {
  ScoredSamples s{normals(40, 1), normals(40, 2)};
  auto lo = permutation_calibrate(s, ScoreStatistic::kLogit, 400, 0.01, 5, Method::kNetLogit);
  auto hi = permutation_calibrate(s, ScoreStatistic::kLogit, 400, 0.10, 5, Method::kNetLogit);
  CHECK(lo.threshold >= hi.threshold);
  CHECK(asymptotic_threshold(1.0, 10, 0.01) >= asymptotic_threshold(1.0, 10, 0.10));
}

TEST_CASE("gram permutation reproduces the direct statistic") {
  CounterRng rng(2);
  Samples x(20, 2), y(25, 2);
  for (auto& v : x.reshaped()) v = rng.normal();
  for (auto& v : y.reshaped()) v = rng.normal() + 0.5;
  const double sigma = median_bandwidth(pool(x, y));
  auto gram = gaussian_gram(pool(x, y), sigma);
  auto out = permutation_calibrate_gram(gram, 20, 200, 0.05, 1, Method::kGmmd);
  CHECK(out.statistic == doctest::Approx(gmmd_stat(x, y, sigma)).epsilon(1e-13));
  CHECK(out.null_samples.size() == 200);
  for (double v : out.null_samples) CHECK(v >= -1e-14);
}

TEST_CASE("gram permutation has nominal size under the null") {
  int rejections = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    CounterRng rng(rep + 77);
    Samples z(60, 1);
    for (auto& v : z.reshaped()) v = rng.normal();
    auto gram = gaussian_gram(z, median_bandwidth(z));
    rejections += permutation_calibrate_gram(gram, 30, 200, 0.05, rep, Method::kGmmd).reject;
  }
  CHECK(rejections / 200.0 <= 0.10);
  CHECK(rejections / 200.0 >= 0.01);
}

TEST_CASE("normal quantile and asymptotic threshold") {
  CHECK(normal_upper_quantile(0.05) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_upper_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_upper_quantile(1e-6) == doctest::Approx(4.753424308822899).epsilon(1e-10));
  CHECK(normal_upper_quantile(0.975) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(asymptotic_threshold(1.0, 1, 0.05) == doctest::Approx(1.6448536));
  CHECK(asymptotic_threshold(0.0, 10, 0.05) == 0.0);
  CHECK(asymptotic_threshold(2.0, 400, 0.05) == asymptotic_threshold(2.0, 100, 0.05) / 2.0);
}

TEST_CASE("null standard deviation estimate") {
  CHECK(estimate_null_sd({vec({3, 3}), vec({3, 3, 3})}) == 0.0);
  CHECK(estimate_null_sd({vec({-1}), vec({1})}) == doctest::Approx(2.0));
  ScoredSamples s{normals(20000, 1, 0.0, 1.5), normals(20000, 2, 0.0, 1.5)};
  CHECK(std::abs(estimate_null_sd(s) / (1.5 * std::sqrt(2.0)) - 1.0) < 0.05);
}
