#include <doctest.h>

#include "c2st/error.hpp"
#include "c2st/power.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>

using namespace c2st;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.family = "eg3";
  c.delta = 0.08;
  c.n_all = 80;
  c.n_run = 6;
  c.n_rep = 3;
  c.m_perm = 40;
  c.train.epochs = 5;
  c.hidden_widths = {8};
  c.methods = {Method::kNetLogit, Method::kNetAcc, Method::kGmmd, Method::kGmmdAd, Method::kGmmdPlus,
               Method::kGmmdPlusPlus};
  return c;
}

struct WorkerEnv {
  explicit WorkerEnv(const char* v) { setenv("C2ST_WORKERS", v, 1); }
  ~WorkerEnv() { unsetenv("C2ST_WORKERS"); }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("experiment config validation") {
  CHECK_NOTHROW(small_config().validate());
  auto c = small_config();
  c.n_all = 82;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidInput);
  c = small_config();
  c.methods.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.bandwidth_grid = {1.0, 0.0};
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.family = "nope";
  CHECK_THROWS_AS(run_once(c, Method::kGmmd, 1), Error);
}

TEST_CASE("summary of replica powers") {
  const auto r = summarize(Method::kGmmd, {10, 20, 30, 60});
  CHECK(r.mean == doctest::Approx(30.0).epsilon(1e-15));
  CHECK(r.std == doctest::Approx(21.602468994692867).epsilon(1e-14));
  CHECK(r.median == 25.0);
  const auto odd = summarize(Method::kGmmd, {5, 1, 3});
  CHECK(odd.median == 3.0);
  CHECK(odd.std == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(summarize(Method::kGmmd, {42}).std == 0.0);
  CHECK_THROWS_AS(summarize(Method::kGmmd, {}), Error);
}

TEST_CASE("single run is seeded") {
  const auto c = small_config();
  for (Method m : {Method::kNetLogit, Method::kNetAcc, Method::kGmmd, Method::kGmmdAd, Method::kGmmdPlus}) {
    const auto a = run_once(c, m, 7), b = run_once(c, m, 7);
    CHECK(a.statistic == b.statistic);
    CHECK(a.null_samples == b.null_samples);
    CHECK(a.method == m);
    CHECK(a.null_samples.size() == c.m_perm);
  }
  CHECK(run_once(c, Method::kGmmd, 7).statistic != run_once(c, Method::kGmmd, 8).statistic);
}

TEST_CASE("gmmd++ needs a bandwidth for a single run") {
  const auto c = small_config();
  CHECK(code_of([&] { run_once(c, Method::kGmmdPlusPlus, 1); }) == ErrorCode::kInvalidInput);
  const auto out = run_once(c, Method::kGmmdPlusPlus, 1, 1.0);
  CHECK(std::isfinite(out.statistic));
  CHECK(out.statistic >= 0.0);
}

TEST_CASE("single-method power matches the shared-draw estimate") {
  const auto c = small_config();
  const auto all = estimate_power_all(c, 99);
  REQUIRE(all.size() == c.methods.size());
  for (std::size_t i = 0; i < c.methods.size(); ++i) {
    CHECK(all[i] >= 0.0);
    CHECK(all[i] <= 1.0);
    CHECK(estimate_power(c, c.methods[i], 99) == all[i]);
  }
}

TEST_CASE("retraining per run changes only the fitted methods") {
  auto c = small_config();
  c.methods = {Method::kGmmd, Method::kGmmdPlus};
  const auto once = estimate_power_all(c, 5);
  c.retrain_per_run = true;
  CHECK(estimate_power_all(c, 5) == once);
}

TEST_CASE("replicate table is independent of worker count") {
  const auto c = small_config();
  PowerTable serial, pooled;
  {
    WorkerEnv env("1");
    serial = replicate_table(c);
  }
  {
    WorkerEnv env("3");
    pooled = replicate_table(c);
  }
  REQUIRE(serial.rows.size() == c.methods.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].replica_percent == pooled.rows[i].replica_percent);
    CHECK(serial.rows[i].replica_percent.size() == c.n_rep);
  }
  CHECK(serial.row(Method::kGmmd).method == Method::kGmmd);
  for (double p : serial.row(Method::kGmmdPlusPlus).replica_percent) CHECK(p <= 100.0);
}

TEST_CASE("worker pool") {
  {
    WorkerEnv env("4");
    CHECK(worker_count() == 4);
    std::vector<int> hit(50, 0);
    parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 3) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
  }
  {
    WorkerEnv env("zero");
    CHECK(code_of([] { worker_count(); }) == ErrorCode::kInvalidInput);
  }
  {
    WorkerEnv env("0");
    CHECK_THROWS_AS(worker_count(), Error);
  }
  CHECK(worker_count() >= 1);
}

TEST_CASE("loss curve on a tiny grid") {
  LossCurveConfig c;
  c.widths = {2, 6};
  c.n_train = {40};
  c.n_rep = 2;
  c.base_seed = 11;
  const auto r = loss_vs_width_experiment(c);
  // scipy oracle for Example 1 at delta = 0.1.
  CHECK(r.jsd == doctest::Approx(0.05342252199648967).epsilon(1e-7));
  REQUIRE(r.cells.size() == 2);
  for (const auto& cell : r.cells) {
    CHECK(cell.n_train == 40);
    REQUIRE(cell.losses.size() == 2);
    for (double l : cell.losses) CHECK(l <= r.jsd + 1e-9);
  }
  CHECK(loss_vs_width_experiment(c).cells[1].losses == r.cells[1].losses);

  LossCurveConfig bad = c;
  bad.example = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.n_train = {41};
  CHECK_THROWS_AS(bad.validate(), Error);
}
