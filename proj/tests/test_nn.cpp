#include <doctest.h>

#include "c2st/densities.hpp"
#include "c2st/error.hpp"
#include "c2st/nn.hpp"
#include "c2st/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace c2st;

namespace {

Samples random_samples(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
  CounterRng rng(seed);
  Samples s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) s(i, j) = rng.normal() + shift;
  }
  return s;
}

double& coordinate(MlpParams& p, std::size_t layer, bool bias, Eigen::Index r, Eigen::Index c) {
  return bias ? p.layers[layer].bias[r] : p.layers[layer].weight(r, c);
}

}  // namespace

TEST_CASE("initialization is deterministic per seed") {
  MlpSpec spec{3, {16, 8}, 2};
  auto a = init_mlp(spec, 5), b = init_mlp(spec, 5), c = init_mlp(spec, 6);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].bias.isZero());
  }
  CHECK(a.layers[0].weight != c.layers[0].weight);
}

TEST_CASE("he initialization has the fan-in scaled spread") {
  MlpSpec spec{512, {512}, 2};
  auto p = init_mlp(spec, 1);
  const auto& w = p.layers[0].weight;
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().mean());
  CHECK(std::abs(sd / std::sqrt(2.0 / 512.0) - 1.0) < 0.1);
}

TEST_CASE("uniform fan-in initialization stays inside its bound") {
  auto p = init_mlp(MlpSpec{4, {64}, 2}, 2, InitScheme::kUniformFanIn);
  CHECK(p.layers[0].weight.cwiseAbs().maxCoeff() <= 0.5);
  CHECK(p.layers[0].bias.cwiseAbs().maxCoeff() <= 0.5);
  CHECK(!p.layers[0].bias.isZero());
}

TEST_CASE("zero parameters give a zero logit and zero loss") {
  auto p = zeros_like(init_mlp(MlpSpec{2, {4}, 2}, 0));
  const double x[2] = {0.3, -1.0};
  CHECK(forward_logit(p, x) == 0.0);
  auto X = random_samples(10, 2, 1), Y = random_samples(12, 2, 2);
  CHECK(std::abs(empirical_loss(p, X, Y)) < 1e-15);
}

TEST_CASE("single hidden identity layer reduces to a linear logit") {
  MlpParams p = zeros_like(init_mlp(MlpSpec{2, {2}, 2}, 0));
  // Hidden layer passes positive inputs through unchanged.
  p.layers[0].weight = Eigen::MatrixXd::Identity(2, 2);
  p.layers[1].weight << 1.5, -2.0, 0.5, 1.0;
  p.layers[1].bias << 0.25, -0.5;
  const double x[2] = {0.7, 1.9};
  CHECK(forward_logit(p, x) == doctest::Approx((1.5 - 0.5) * 0.7 + (-2.0 - 1.0) * 1.9 + 0.75).epsilon(1e-15));
}

TEST_CASE("batched and pointwise logits agree") {
  auto p = init_mlp(MlpSpec{3, {7, 5}, 2}, 9);
  auto X = random_samples(20, 3, 3);
  auto f = logits(p, X);
  for (Eigen::Index i = 0; i < X.rows(); ++i) CHECK(f[i] == doctest::Approx(forward_logit(p, row_span(X, i))).epsilon(1e-13));
}

TEST_CASE("dimension mismatch is rejected") {
  auto p = init_mlp(MlpSpec{3, {4}, 2}, 0);
  const double x[2] = {0, 0};
  CHECK_THROWS_AS(forward_logit(p, x), Error);
  CHECK_THROWS_AS(MlpSpec({1, {}, 2}).validate(), Error);
  CHECK_THROWS_AS(MlpSpec({1, {3}, 3}).validate(), Error);
}

TEST_CASE("loss on identical samples is at most zero") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = init_mlp(MlpSpec{2, {8}, 2}, seed);
    auto X = random_samples(30, 2, seed + 100);
    CHECK(empirical_loss(p, X, X) <= 1e-12);
  }
}

TEST_CASE("loss approaches log 2 on separated data with a large logit") {
  MlpParams p = zeros_like(init_mlp(MlpSpec{1, {1}, 2}, 0));
  p.layers[0].weight(0, 0) = 1.0;
  p.layers[0].bias[0] = 0.0;
  p.layers[1].weight(0, 0) = 100.0;
  p.layers[1].bias[0] = -50.0;
  Samples X(3, 1), Y(3, 1);
  X << 1.0, 2.0, 3.0;
  Y << -1.0, -2.0, 0.0;
  const double L = empirical_loss(p, X, Y);
  CHECK(L <= std::numbers::ln2);
  CHECK(L > std::numbers::ln2 - 1e-12);
  p.layers[1].weight(0, 0) = 10.0;
  p.layers[1].bias[0] = -5.0;
  const double moderate = empirical_loss(p, X, Y);
  CHECK(moderate < std::numbers::ln2);
  CHECK(moderate > std::numbers::ln2 - 0.01);
}

TEST_CASE("loss never exceeds log 2") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = init_mlp(MlpSpec{1, {8}, 2}, seed);
    for (auto& l : p.layers) l.weight *= 10.0;
    CHECK(empirical_loss(p, random_samples(40, 1, seed, 1.0), random_samples(40, 1, seed + 1, -1.0)) <= std::numbers::ln2);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto p = init_mlp(MlpSpec{2, {6, 5}, 2}, seed);
    for (auto& l : p.layers) l.bias.setConstant(0.1);
    auto X = random_samples(15, 2, seed + 10, 0.5), Y = random_samples(17, 2, seed + 20);
    auto g = loss_gradient(p, X, Y);
    CounterRng rng(seed);
    for (int k = 0; k < 20; ++k) {
      const auto l = static_cast<std::size_t>(rng.below(p.layers.size()));
      const bool bias = rng.below(4) == 0;
      const auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.layers[l].weight.rows())));
      const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.layers[l].weight.cols())));
      const double h = 1e-5;
      MlpParams plus = p, minus = p;
      coordinate(plus, l, bias, r, c) += h;
      coordinate(minus, l, bias, r, c) -= h;
      const double fd = (empirical_loss(plus, X, Y) - empirical_loss(minus, X, Y)) / (2 * h);
      const double an = coordinate(g, l, bias, r, c);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), 1e-3));
    }
  }
}

TEST_CASE("gradient vanishes at a symmetric stationary point") {
  auto p = init_mlp(MlpSpec{2, {6}, 2}, 4);
  p.layers[1].weight.row(1) = p.layers[1].weight.row(0);
  p.layers[1].bias[1] = p.layers[1].bias[0];
  auto X = random_samples(20, 2, 1);
  auto g = loss_gradient(p, X, X);
  double norm = 0.0;
  for (const auto& l : g.layers) norm += l.weight.squaredNorm() + l.bias.squaredNorm();
  CHECK(std::sqrt(norm) < 1e-10);
}

TEST_CASE("swapping classes swaps the output-row gradients") {
  auto p = init_mlp(MlpSpec{2, {5}, 2}, 8);
  auto X = random_samples(10, 2, 1, 0.4), Y = random_samples(11, 2, 2);
  MlpParams swapped = p;
  swapped.layers[1].weight.row(0).swap(swapped.layers[1].weight.row(1));
  std::swap(swapped.layers[1].bias[0], swapped.layers[1].bias[1]);
  auto g = loss_gradient(p, X, Y);
  auto gs = loss_gradient(swapped, Y, X);
  CHECK((g.layers[1].weight.row(0) - gs.layers[1].weight.row(1)).norm() < 1e-14);
  CHECK((g.layers[1].weight.row(1) - gs.layers[1].weight.row(0)).norm() < 1e-14);
  CHECK((g.layers[0].weight - gs.layers[0].weight).norm() < 1e-14);
}

TEST_CASE("logit scales with the output-row difference") {
  auto p = init_mlp(MlpSpec{3, {9}, 2}, 12);
  auto X = random_samples(10, 3, 5);
  auto base = logits(p, X);
  MlpParams scaled = p;
  const double c = 2.5;
  auto& w = scaled.layers[1].weight;
  auto& b = scaled.layers[1].bias;
  const Eigen::RowVectorXd dw = w.row(0) - w.row(1);
  const double db = b[0] - b[1];
  w.row(0) = w.row(1) + c * dw;
  b[0] = b[1] + c * db;
  CHECK((logits(scaled, X) - c * base).norm() < 1e-12);
}

TEST_CASE("training is deterministic and improves the loss") {
  auto pair = mean_shift_pair(1.0);
  TrainConfig cfg;
  cfg.epochs = 20;
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto X = pair.p.sample(500, 100 + seed), Y = pair.q.sample(500, 200 + seed);
    cfg.seed = seed;
    MlpSpec spec{1, {32, 32}, 2};
    auto r = train(spec, cfg, X, Y);
    const double before = empirical_loss(init_mlp(spec, derive_seed(seed, {tag_hash("init")})), X, Y);
    improved += r.trace.loss.back() >= before;
    CHECK(r.trace.loss.size() == cfg.epochs);
    CHECK(r.trace.error.size() == cfg.epochs);
    if (seed == 0) {
      auto again = train(spec, cfg, X, Y);
      for (std::size_t l = 0; l < r.params.layers.size(); ++l) CHECK(again.params.layers[l].weight == r.params.layers[l].weight);
    }
  }
  CHECK(improved >= 9);
}

TEST_CASE("small classes fall back to full-batch steps") {
  auto pair = mean_shift_pair(2.0);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 100;
  auto r = train(MlpSpec{1, {8}, 2}, cfg, pair.p.sample(20, 1), pair.q.sample(30, 2));
  CHECK(r.trace.loss.back() > r.trace.loss.front());
}

TEST_CASE("divergent training reports the epoch") {
  Samples X(2, 1), Y(2, 1);
  X << 1e308, -1e308;
  Y << 1e308, 1e308;
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(MlpSpec{1, {4}, 2}, cfg, X, Y);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 0);
    CHECK(e.code() == ErrorCode::kTrainingDiverged);
  }
}

TEST_CASE("weight clipping bounds the empirical Lipschitz constant") {
  auto pair = mean_shift_pair(1.0);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.weight_clip = 2.0;
  auto r = train(MlpSpec{2, {16, 16}, 2}, cfg, random_samples(200, 2, 1, 0.5), random_samples(200, 2, 2));
  CHECK(lipschitz_bound(r.params) <= 2.0 + 1e-12);
  CHECK(lipschitz_estimate(r.params, 10000, 3.0, 7) <= 2.0);
}

TEST_CASE("parameter container round-trips exactly") {
  auto p = init_mlp(MlpSpec{3, {5, 4}, 2}, 3, InitScheme::kUniformFanIn);
  std::stringstream ss;
  save_mlp(p, ss);
  auto q = load_mlp(ss);
  CHECK(q.spec.input_dim == 3);
  CHECK(q.spec.hidden_widths == std::vector<std::size_t>{5, 4});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(q.layers[l].weight == p.layers[l].weight);
    CHECK(q.layers[l].bias == p.layers[l].bias);
  }
}

TEST_CASE("corrupt parameter containers are rejected with distinct errors") {
  std::stringstream bad("NOTAMLP!");
  try {
    load_mlp(bad);
    FAIL("expected magic mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMagicMismatch);
  }
  auto p = init_mlp(MlpSpec{3, {5}, 2}, 3);
  std::stringstream ss;
  save_mlp(p, ss);
  std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  try {
    load_mlp(cut);
    FAIL("expected truncation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncated);
  }
}
