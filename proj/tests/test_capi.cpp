#include <doctest.h>

#include "c2st/c2st.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace {

std::vector<double> draw(const c2st_pair* pair, int which, size_t n, uint64_t seed) {
  c2st_samples* s = nullptr;
  REQUIRE(c2st_pair_sample(pair, which, n, seed, &s) == C2ST_OK);
  const double* d = c2st_samples_data(s);
  std::vector<double> out(d, d + c2st_samples_rows(s) * c2st_samples_cols(s));
  c2st_samples_free(s);
  return out;
}

}  // namespace

TEST_CASE("status reporting") {
  c2st_pair* pair = nullptr;
  CHECK(c2st_pair_create("nope", 0.1, &pair) == C2ST_ERR_INVALID_INPUT);
  CHECK(pair == nullptr);
  CHECK(std::string(c2st_last_error()).find("nope") != std::string::npos);
  CHECK(std::string(c2st_status_name(C2ST_ERR_MAGIC_MISMATCH)) == "magic_mismatch");
  CHECK(std::string(c2st_status_name(C2ST_OK)) == "ok");
  CHECK(c2st_pair_create(nullptr, 0.1, &pair) == C2ST_ERR_INVALID_INPUT);
  c2st_model* model = nullptr;
  CHECK(c2st_model_load("/nonexistent/model.bin", &model) == C2ST_ERR_IO);
  CHECK(std::strlen(c2st_version()) > 0);
}

TEST_CASE("density pair sampling and divergences") {
  c2st_pair* pair = nullptr;
  REQUIRE(c2st_pair_create("example1", 0.1, &pair) == C2ST_OK);
  CHECK(c2st_pair_dim(pair) == 1);
  CHECK(draw(pair, 0, 100, 5) == draw(pair, 0, 100, 5));
  CHECK(draw(pair, 0, 100, 5) != draw(pair, 1, 100, 5));
  double jsd = 0.0, skl = 0.0;
  REQUIRE(c2st_pair_jsd(pair, &jsd) == C2ST_OK);
  REQUIRE(c2st_pair_skl(pair, &skl) == C2ST_OK);
  // scipy adaptive quadrature of the same mixtures.
  CHECK(jsd == doctest::Approx(0.05342252199648967).epsilon(1e-6));
  CHECK(skl == doctest::Approx(0.4708912925177675).epsilon(1e-6));
  CHECK(c2st_pair_sample(pair, 2, 10, 0, nullptr) == C2ST_ERR_INVALID_INPUT);

  const double x[] = {-1.0, 0.0, 4.0};
  double lr[3], sg[3];
  REQUIRE(c2st_pair_witness(pair, C2ST_WITNESS_LOG_RATIO, 0.0, x, 3, lr) == C2ST_OK);
  REQUIRE(c2st_pair_witness(pair, C2ST_WITNESS_SIGN, 0.0, x, 3, sg) == C2ST_OK);
  for (int i = 0; i < 3; ++i) CHECK(sg[i] == (lr[i] >= 0.0 ? 1.0 : -1.0));
  CHECK(lr[2] < 0.0);
  double summary[3];
  REQUIRE(c2st_pair_witness_summary(pair, C2ST_WITNESS_LOG_RATIO, 0.0, summary) == C2ST_OK);
  CHECK(summary[0] == doctest::Approx(skl).epsilon(1e-9));
  CHECK(summary[2] == doctest::Approx(summary[0] / summary[1]));
  CHECK(c2st_pair_witness_summary(pair, C2ST_WITNESS_KERNEL, -1.0, summary) == C2ST_ERR_INVALID_INPUT);
  c2st_pair_free(pair);
}

TEST_CASE("train, save, load and score") {
  c2st_pair* pair = nullptr;
  REQUIRE(c2st_pair_create("eg1", 1.0, &pair) == C2ST_OK);
  const auto x = draw(pair, 0, 200, 1), y = draw(pair, 1, 200, 2);
  c2st_train_options o = c2st_train_options_default();
  o.epochs = 20;
  o.seed = 3;
  c2st_model* model = nullptr;
  REQUIRE(c2st_train(x.data(), 200, y.data(), 200, 1, &o, &model) == C2ST_OK);
  CHECK(c2st_model_input_dim(model) == 1);
  CHECK(c2st_model_parameter_count(model) == 2 * 32 + 32 * 33 + 2 * 33);
  REQUIRE(c2st_model_trace_length(model) == 20);
  std::vector<double> loss(20), err(20);
  REQUIRE(c2st_model_trace(model, loss.data(), err.data()) == C2ST_OK);
  CHECK(std::isfinite(loss.back()));

  const std::string path = "capi_model.bin";
  REQUIRE(c2st_model_save(model, path.c_str()) == C2ST_OK);
  c2st_model* back = nullptr;
  REQUIRE(c2st_model_load(path.c_str(), &back) == C2ST_OK);
  CHECK(c2st_model_trace_length(back) == 0);
  std::vector<double> a(200), b(200);
  REQUIRE(c2st_model_logits(model, x.data(), 200, a.data()) == C2ST_OK);
  REQUIRE(c2st_model_logits(back, x.data(), 200, b.data()) == C2ST_OK);
  CHECK(a == b);
  double summary[3];
  REQUIRE(c2st_model_witness_summary(back, pair, summary) == C2ST_OK);
  CHECK(summary[0] > 0.0);
  std::remove(path.c_str());

  // Mean shift of one standard deviation is detected from held-out scores.
  const auto xt = draw(pair, 0, 200, 11), yt = draw(pair, 1, 200, 12);
  std::vector<double> sx(200), sy(200);
  REQUIRE(c2st_model_logits(model, xt.data(), 200, sx.data()) == C2ST_OK);
  REQUIRE(c2st_model_logits(model, yt.data(), 200, sy.data()) == C2ST_OK);
  c2st_outcome* outcome = nullptr;
  REQUIRE(c2st_test_scores(sx.data(), 200, sy.data(), 200, C2ST_STAT_LOGIT, 100, 0.05, 9, &outcome) == C2ST_OK);
  c2st_outcome_info info;
  c2st_outcome_get(outcome, &info);
  CHECK(info.null_count == 100);
  CHECK(info.reject == 1);
  CHECK(std::string(info.method) == "net-logit");
  CHECK(c2st_outcome_null_samples(outcome) != nullptr);
  c2st_outcome_free(outcome);

  REQUIRE(c2st_test_gmmd(xt.data(), 200, yt.data(), 200, 1, 0.0, 50, 0.05, 9, &outcome) == C2ST_OK);
  c2st_outcome_get(outcome, &info);
  CHECK(info.reject == 1);
  CHECK(std::string(info.method) == "gmmd");
  c2st_outcome_free(outcome);
  double sigma = 0.0;
  REQUIRE(c2st_median_bandwidth(xt.data(), 200, yt.data(), 200, 1, &sigma) == C2ST_OK);
  CHECK(sigma > 0.0);

  CHECK(c2st_model_logits(model, nullptr, 5, a.data()) == C2ST_ERR_INVALID_INPUT);
  c2st_model_free(back);
  c2st_model_free(model);
  c2st_pair_free(pair);
}

TEST_CASE("small power table and loss curve") {
  c2st_power_options p = c2st_power_options_default();
  const char* methods[] = {"gmmd", "net-logit"};
  p.methods = methods;
  p.method_count = 2;
  p.n_run = 4;
  p.n_rep = 2;
  p.m_perm = 20;
  p.train.epochs = 5;
  c2st_power_table* table = nullptr;
  REQUIRE(c2st_power_run(&p, &table) == C2ST_OK);
  REQUIRE(c2st_power_table_methods(table) == 2);
  CHECK(c2st_power_table_replicas(table) == 2);
  const char* name = nullptr;
  double mean = -1, sd = -1, med = -1, r0 = -1, r1 = -1;
  REQUIRE(c2st_power_table_row(table, 1, &name, &mean, &sd, &med) == C2ST_OK);
  CHECK(std::string(name) == "net-logit");
  REQUIRE(c2st_power_table_replica(table, 1, 0, &r0) == C2ST_OK);
  REQUIRE(c2st_power_table_replica(table, 1, 1, &r1) == C2ST_OK);
  CHECK(mean == doctest::Approx((r0 + r1) / 2));
  CHECK(c2st_power_table_replica(table, 1, 2, &r0) == C2ST_ERR_INVALID_INPUT);
  c2st_power_table_free(table);

  const char* bad[] = {"net-magic"};
  p.methods = bad;
  p.method_count = 1;
  CHECK(c2st_power_run(&p, &table) == C2ST_ERR_INVALID_INPUT);

  c2st_loss_curve_options l = c2st_loss_curve_options_default();
  const size_t widths[] = {4}, n[] = {1000};
  l.widths = widths;
  l.width_count = 1;
  l.n_train = n;
  l.n_train_count = 1;
  l.n_rep = 2;
  c2st_loss_curve* curve = nullptr;
  REQUIRE(c2st_loss_curve_run(&l, &curve) == C2ST_OK);
  REQUIRE(c2st_loss_curve_cells(curve) == 1);
  size_t w = 0, nt = 0;
  REQUIRE(c2st_loss_curve_cell(curve, 0, &w, &nt, &mean, &sd) == C2ST_OK);
  CHECK(w == 4);
  CHECK(nt == 1000);
  double losses[2];
  REQUIRE(c2st_loss_curve_cell_losses(curve, 0, losses) == C2ST_OK);
  CHECK(mean == doctest::Approx((losses[0] + losses[1]) / 2));
  CHECK(losses[0] <= c2st_loss_curve_jsd(curve) + 1e-4);
  c2st_loss_curve_free(curve);
}

TEST_CASE("manifold construction") {
  c2st_manifold_options o = c2st_manifold_options_default();
  o.k_max = 2;
  o.n_eval = 500;
  c2st_manifold_net* net = nullptr;
  REQUIRE(c2st_manifold_build(&o, &net) == C2ST_OK);
  c2st_manifold_report r;
  REQUIRE(c2st_manifold_net_report(net, &r) == C2ST_OK);
  CHECK(r.linf_error < 0.15);
  CHECK(r.parameter_count > 0);
  CHECK(r.delta == 0.3);
  CHECK(r.decay_target == -2.5);
  const double x[] = {1.0, 0.0, 0.0, 1.0};
  double v[2];
  REQUIRE(c2st_manifold_net_eval(net, x, 2, v) == C2ST_OK);
  CHECK(v[0] == doctest::Approx(1.0).epsilon(0.15));
  CHECK(std::abs(v[1]) < 0.15);
  c2st_manifold_net_free(net);

  o.manifold = "torus";
  CHECK(c2st_manifold_build(&o, &net) == C2ST_ERR_INVALID_INPUT);
  o.manifold = "circle";
  o.target = "sin";
  CHECK(c2st_manifold_build(&o, &net) == C2ST_ERR_INVALID_INPUT);
}
