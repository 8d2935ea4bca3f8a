#include "c2st/power.hpp"

#include "c2st/error.hpp"
#include "c2st/functionals.hpp"
#include "c2st/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c2st {

namespace {

struct Split {
  Samples x_all, y_all;
  Samples x_train, y_train, x_test, y_test;
};

Split draw_split(const DensityPair& pair, std::size_t n_all, std::uint64_t seed) {
  const std::size_t half = n_all / 2, quarter = n_all / 4;
  Split s;
  s.x_all = pair.p.sample(half, derive_seed(seed, {tag_hash("x")}));
  s.y_all = pair.q.sample(half, derive_seed(seed, {tag_hash("y")}));
  const auto q = static_cast<Eigen::Index>(quarter);
  s.x_train = s.x_all.topRows(q);
  s.y_train = s.y_all.topRows(q);
  s.x_test = s.x_all.bottomRows(s.x_all.rows() - q);
  s.y_test = s.y_all.bottomRows(s.y_all.rows() - q);
  return s;
}

MlpParams fit_classifier(const ExperimentConfig& cfg, const Samples& x, const Samples& y, std::uint64_t seed) {
  MlpSpec spec;
  spec.input_dim = static_cast<std::size_t>(x.cols());
  spec.hidden_widths = cfg.hidden_widths;
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, {tag_hash("train")});
  return train(spec, tc, x, y).params;
}

std::uint64_t perm_seed(std::uint64_t seed) { return derive_seed(seed, {tag_hash("perm")}); }

TestOutcome network_test(const ExperimentConfig& cfg, Method m, const MlpParams& net, const Split& s,
                         std::uint64_t seed) {
  ScoredSamples scored{logits(net, s.x_test), logits(net, s.y_test)};
  const auto stat = m == Method::kNetLogit ? ScoreStatistic::kLogit : ScoreStatistic::kAcc;
  return permutation_calibrate(scored, stat, cfg.m_perm, cfg.alpha, perm_seed(seed), m);
}

TestOutcome kernel_test(const ExperimentConfig& cfg, Method m, const Samples& x, const Samples& y, double sigma,
                        std::uint64_t seed) {
  const Eigen::MatrixXd gram = gaussian_gram(pool(x, y), sigma);
  return permutation_calibrate_gram(gram, static_cast<std::size_t>(x.rows()), cfg.m_perm, cfg.alpha, perm_seed(seed),
                                    m);
}

// State fitted on a training split and reused across runs.
struct Fitted {
  std::optional<MlpParams> net;
  std::optional<double> ad_sigma;
};

bool wants_network(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), is_network_method);
}

bool wants(const std::vector<Method>& methods, Method m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

Fitted fit_on(const ExperimentConfig& cfg, const std::vector<Method>& methods, const Samples& x, const Samples& y,
              std::uint64_t seed) {
  Fitted f;
  if (wants_network(methods)) f.net = fit_classifier(cfg, x, y, seed);
  if (wants(methods, Method::kGmmdAd)) f.ad_sigma = select_bandwidth_ad(x, y, cfg.bandwidth_grid).chosen;
  return f;
}

TestOutcome test_with(const ExperimentConfig& cfg, Method m, const Fitted& fitted, const Split& s, std::uint64_t seed,
                      std::optional<double> sigma) {
  switch (m) {
    case Method::kNetLogit:
    case Method::kNetAcc:
      return network_test(cfg, m, *fitted.net, s, seed);
    case Method::kGmmd:
      return kernel_test(cfg, m, s.x_test, s.y_test, median_bandwidth(pool(s.x_test, s.y_test)), seed);
    case Method::kGmmdAd:
      return kernel_test(cfg, m, s.x_test, s.y_test, *fitted.ad_sigma, seed);
    case Method::kGmmdPlus:
      return kernel_test(cfg, m, s.x_all, s.y_all, median_bandwidth(pool(s.x_all, s.y_all)), seed);
    case Method::kGmmdPlusPlus:
      if (!sigma) fail(ErrorCode::kInvalidInput, "gmmd++ selects sigma over runs; give a fixed sigma for a single run");
      return kernel_test(cfg, m, s.x_all, s.y_all, *sigma, seed);
  }
  fail(ErrorCode::kInternal, "unknown method");
}

double fraction(std::size_t hits, std::size_t total) {
  return static_cast<double>(hits) / static_cast<double>(total);
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  require(n_all >= 8 && n_all % 4 == 0, "n_all must be a multiple of 4 and at least 8");
  require(!methods.empty(), "at least one method is required");
  require(n_run >= 1, "n_run must be at least 1");
  require(n_rep >= 1, "n_rep must be at least 1");
  require(m_perm >= 1, "m_perm must be at least 1");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(std::isfinite(delta) && delta >= 0.0, "delta must be finite and nonnegative");
  require(!bandwidth_grid.empty(), "bandwidth grid must be nonempty");
  for (double s : bandwidth_grid) require(std::isfinite(s) && s > 0.0, "bandwidths must be positive");
  MlpSpec spec;
  spec.hidden_widths = hidden_widths;
  spec.validate();
  train.validate();
}

std::uint64_t experiment_seed(std::uint64_t base_seed, std::uint64_t replica, std::uint64_t run, const char* tag) {
  return derive_seed(base_seed, {replica, run, tag_hash(tag)});
}

TestOutcome run_once(const ExperimentConfig& cfg, Method method, std::uint64_t seed, std::optional<double> sigma) {
  cfg.validate();
  const DensityPair pair = named_pair(cfg.family, cfg.delta);
  const Split s = draw_split(pair, cfg.n_all, seed);
  const Fitted fitted = fit_on(cfg, {method}, s.x_train, s.y_train, seed);
  return test_with(cfg, method, fitted, s, seed, sigma);
}

std::vector<double> estimate_power_all(const ExperimentConfig& cfg, std::uint64_t replica_seed) {
  cfg.validate();
  const DensityPair pair = named_pair(cfg.family, cfg.delta);
  const auto& methods = cfg.methods;
  std::optional<Fitted> shared;
  if (!cfg.retrain_per_run) {
    const std::uint64_t ts = derive_seed(replica_seed, {tag_hash("fit")});
    const Split train_split = draw_split(pair, cfg.n_all, ts);
    shared = fit_on(cfg, methods, train_split.x_train, train_split.y_train, ts);
  }
  const std::size_t ns = cfg.bandwidth_grid.size();
  std::vector<std::size_t> hits(methods.size(), 0);
  std::vector<std::size_t> grid_hits(ns, 0);
  for (std::size_t k = 0; k < cfg.n_run; ++k) {
    const std::uint64_t rs = derive_seed(replica_seed, {k, tag_hash("run")});
    const Split s = draw_split(pair, cfg.n_all, rs);
    const Fitted fitted = shared ? *shared : fit_on(cfg, methods, s.x_train, s.y_train, rs);
    bool grid_done = false;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (methods[i] == Method::kGmmdPlusPlus) {
        if (grid_done) continue;
        const Samples all = pool(s.x_all, s.y_all);
        for (std::size_t j = 0; j < ns; ++j) {
          const Eigen::MatrixXd gram = gaussian_gram(all, cfg.bandwidth_grid[j]);
          const auto out = permutation_calibrate_gram(gram, static_cast<std::size_t>(s.x_all.rows()), cfg.m_perm,
                                                      cfg.alpha, perm_seed(rs), Method::kGmmdPlusPlus);
          grid_hits[j] += out.reject ? 1 : 0;
        }
        grid_done = true;
        continue;
      }
      hits[i] += test_with(cfg, methods[i], fitted, s, rs, std::nullopt).reject ? 1 : 0;
    }
  }
  std::vector<double> power(methods.size());
  const std::size_t best = ns ? *std::max_element(grid_hits.begin(), grid_hits.end()) : 0;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    power[i] = fraction(methods[i] == Method::kGmmdPlusPlus ? best : hits[i], cfg.n_run);
  }
  return power;
}

double estimate_power(const ExperimentConfig& cfg, Method method, std::uint64_t replica_seed) {
  ExperimentConfig one = cfg;
  one.methods = {method};
  return estimate_power_all(one, replica_seed).front();
}

PowerRow summarize(Method method, std::vector<double> replica_percent) {
  require(!replica_percent.empty(), "no replicas to summarize");
  PowerRow row;
  row.method = method;
  row.mean = std::accumulate(replica_percent.begin(), replica_percent.end(), 0.0) /
             static_cast<double>(replica_percent.size());
  row.std = sample_std(replica_percent, row.mean);
  std::vector<double> sorted = replica_percent;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  row.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  row.replica_percent = std::move(replica_percent);
  return row;
}

const PowerRow& PowerTable::row(Method m) const {
  for (const auto& r : rows) {
    if (r.method == m) return r;
  }
  fail(ErrorCode::kInvalidInput, std::string("method not in table: ") + method_name(m));
}

PowerTable replicate_table(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<double>> per_replica(cfg.n_rep);
  parallel_for(cfg.n_rep, [&](std::size_t r) {
    per_replica[r] = estimate_power_all(cfg, derive_seed(cfg.base_seed, {r, tag_hash("replica")}));
  });
  PowerTable table;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    std::vector<double> pct;
    pct.reserve(cfg.n_rep);
    for (const auto& v : per_replica) pct.push_back(100.0 * v[i]);
    table.rows.push_back(summarize(cfg.methods[i], std::move(pct)));
  }
  return table;
}

void LossCurveConfig::validate() const {
  require(example == 1 || example == 2, "example must be 1 or 2");
  require(std::isfinite(delta) && delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
  require(!widths.empty() && !n_train.empty(), "width and sample-size grids must be nonempty");
  for (auto w : widths) require(w >= 1, "widths must be positive");
  for (auto n : n_train) require(n >= 4 && n % 2 == 0, "training sizes must be even and at least 4");
  require(n_rep >= 1, "n_rep must be at least 1");
  require(batch_size >= 2, "batch_size must be at least 2");
  require(learning_rate > 0.0, "learning_rate must be positive");
}

LossCurveResult loss_vs_width_experiment(const LossCurveConfig& cfg) {
  cfg.validate();
  const DensityPair pair = cfg.example == 1 ? example1_pair(cfg.delta) : example2_pair(cfg.delta);
  const PairQuadrature pq(pair.p, pair.q);
  LossCurveResult result;
  for (auto w : cfg.widths) {
    for (auto n : cfg.n_train) {
      LossCurveCell cell;
      cell.width = w;
      cell.n_train = n;
      cell.losses.assign(cfg.n_rep, 0.0);
      result.cells.push_back(std::move(cell));
    }
  }
  const std::size_t jobs = result.cells.size() * cfg.n_rep;
  parallel_for(jobs, [&](std::size_t job) {
    LossCurveCell& cell = result.cells[job / cfg.n_rep];
    const std::size_t r = job % cfg.n_rep;
    const std::uint64_t seed = derive_seed(cfg.base_seed, {cell.width, cell.n_train, r});
    const Samples x = pair.p.sample(cell.n_train / 2, derive_seed(seed, {tag_hash("x")}));
    const Samples y = pair.q.sample(cell.n_train / 2, derive_seed(seed, {tag_hash("y")}));
    MlpSpec spec;
    spec.input_dim = pair.p.ambient_dim();
    spec.hidden_widths = {cell.width};
    TrainConfig tc;
    tc.epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(100.0 * 8000.0 / cell.n_train)));
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = derive_seed(seed, {tag_hash("train")});
    tc.init = cfg.init;
    const MlpParams net = train(spec, tc, x, y).params;
    cell.losses[r] = population_loss_values(pq.evaluate(mlp_witness(net)), pq);
  });
  for (auto& cell : result.cells) {
    cell.mean = std::accumulate(cell.losses.begin(), cell.losses.end(), 0.0) / static_cast<double>(cfg.n_rep);
    cell.std = sample_std(cell.losses, cell.mean);
  }
  result.jsd = jsd_refined(pair.p, pair.q);
  return result;
}

}  // namespace c2st
