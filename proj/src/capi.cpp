#include "c2st/c2st.h"

#include "c2st/densities.hpp"
#include "c2st/error.hpp"
#include "c2st/functionals.hpp"
#include "c2st/manifold.hpp"
#include "c2st/nn.hpp"
#include "c2st/power.hpp"
#include "c2st/rng.hpp"
#include "c2st/stats.hpp"

#include <memory>
#include <mutex>
#include <new>
#include <string>

using namespace c2st;

struct c2st_samples {
  Samples values;
};

struct c2st_pair {
  DensityPair pair;
  mutable std::once_flag quadrature_once;
  mutable std::unique_ptr<PairQuadrature> quadrature;

  const PairQuadrature& pq() const {
    std::call_once(quadrature_once, [this] { quadrature = std::make_unique<PairQuadrature>(pair.p, pair.q); });
    return *quadrature;
  }
};

struct c2st_model {
  MlpParams params;
  TrainTrace trace;
};

struct c2st_outcome {
  TestOutcome outcome;
};

struct c2st_power_table {
  PowerTable table;
  std::size_t replicas = 0;
};

struct c2st_loss_curve {
  LossCurveResult result;
};

struct c2st_manifold_net {
  Manifold manifold;
  AmbientFunction target;
  ConstructedNet net;
  std::size_t n_eval;
  std::uint64_t seed;
};

namespace {

thread_local std::string last_error;

c2st_status set_error(c2st_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class Fn>
c2st_status guard(Fn&& fn) noexcept {
  try {
    fn();
    return C2ST_OK;
  } catch (const Error& e) {
    return set_error(static_cast<c2st_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(C2ST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(C2ST_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(C2ST_ERR_INTERNAL, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidInput, std::string(what) + " must not be null");
}

Samples copy_rows(const double* data, std::size_t rows, std::size_t cols, const char* what) {
  require(cols >= 1, "sample dimension must be positive");
  if (rows > 0) need(data, what);
  Samples s(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows * cols; ++i) s.data()[i] = data[i];
  return s;
}

InitScheme to_init(c2st_init init) {
  switch (init) {
    case C2ST_INIT_HE:
      return InitScheme::kHe;
    case C2ST_INIT_UNIFORM_FAN_IN:
      return InitScheme::kUniformFanIn;
  }
  fail(ErrorCode::kInvalidInput, "unknown init scheme");
}

TrainConfig to_train_config(const c2st_train_options& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.seed = o.seed;
  tc.init = to_init(o.init);
  if (o.weight_clip > 0.0) tc.weight_clip = o.weight_clip;
  tc.validate();
  return tc;
}

std::vector<std::size_t> to_widths(const std::size_t* widths, std::size_t count) {
  if (count > 0) need(widths, "hidden_widths");
  return std::vector<std::size_t>(widths, widths + count);
}

BatchWitness population_witness(const c2st_pair& pair, c2st_witness_kind kind, double sigma) {
  switch (kind) {
    case C2ST_WITNESS_LOG_RATIO:
      return log_ratio_witness(pair.pair.p, pair.pair.q);
    case C2ST_WITNESS_SIGN:
      return sign_witness(log_ratio_witness(pair.pair.p, pair.pair.q));
    case C2ST_WITNESS_KERNEL:
      require(sigma > 0.0, "kernel witness needs a positive sigma");
      return kernel_witness(pair.pair.p, pair.pair.q, sigma);
  }
  fail(ErrorCode::kInvalidInput, "unknown witness kind");
}

void write_summary(const WitnessSummary& s, double summary[3]) {
  summary[0] = s.mean_gap;
  summary[1] = s.spread;
  summary[2] = s.ratio;
}

AmbientFunction named_target(const std::string& name) {
  if (name == "cos-theta") return [](const Eigen::VectorXd& x) { return x[0]; };
  if (name == "wave") return [](const Eigen::VectorXd& x) { return std::cos(2.0 * x[0]) + x[1]; };
  fail(ErrorCode::kInvalidInput, "unknown manifold target '" + name + "' (expected cos-theta or wave)");
}

Manifold named_manifold(const std::string& name) {
  switch (parse_manifold_kind(name)) {
    case ManifoldKind::kCircle:
      return Manifold::circle();
    case ManifoldKind::kCurve:
      return Manifold::curve();
    case ManifoldKind::kSpherePatch:
      return Manifold::sphere_patch();
  }
  fail(ErrorCode::kInternal, "unknown manifold");
}

}  // namespace

extern "C" {

const char* c2st_version(void) { return "0.1.0"; }

const char* c2st_status_name(c2st_status status) {
  if (status == C2ST_OK) return "ok";
  return error_code_name(static_cast<ErrorCode>(status));
}

const char* c2st_last_error(void) { return last_error.c_str(); }

uint64_t c2st_child_seed(uint64_t base, const char* tag) {
  return derive_seed(base, {tag_hash(tag ? tag : "")});
}

c2st_status c2st_permutation(uint64_t seed, size_t n, size_t* out) {
  return guard([&] {
    if (n > 0) need(out, "out");
    for (size_t i = 0; i < n; ++i) out[i] = i;
    CounterRng rng(seed, tag_hash("permutation"));
    shuffle(std::span<size_t>(out, n), rng);
  });
}

size_t c2st_samples_rows(const c2st_samples* s) { return s ? static_cast<size_t>(s->values.rows()) : 0; }
size_t c2st_samples_cols(const c2st_samples* s) { return s ? static_cast<size_t>(s->values.cols()) : 0; }
const double* c2st_samples_data(const c2st_samples* s) { return s ? s->values.data() : nullptr; }
void c2st_samples_free(c2st_samples* s) { delete s; }

c2st_status c2st_pair_create(const char* family, double delta, c2st_pair** out) {
  return guard([&] {
    need(family, "family");
    need(out, "out");
    auto p = std::unique_ptr<c2st_pair>(new c2st_pair{named_pair(family, delta), {}, {}});
    *out = p.release();
  });
}

void c2st_pair_free(c2st_pair* pair) { delete pair; }

size_t c2st_pair_dim(const c2st_pair* pair) { return pair ? pair->pair.p.ambient_dim() : 0; }

c2st_status c2st_pair_sample(const c2st_pair* pair, int which, size_t n, uint64_t seed, c2st_samples** out) {
  return guard([&] {
    need(pair, "pair");
    need(out, "out");
    require(which == 0 || which == 1, "which must be 0 (p) or 1 (q)");
    const AnalyticDensity& d = which == 0 ? pair->pair.p : pair->pair.q;
    *out = new c2st_samples{d.sample(n, seed)};
  });
}

c2st_status c2st_pair_jsd(const c2st_pair* pair, double* out) {
  return guard([&] {
    need(pair, "pair");
    need(out, "out");
    *out = jsd_refined(pair->pair.p, pair->pair.q);
  });
}

c2st_status c2st_pair_skl(const c2st_pair* pair, double* out) {
  return guard([&] {
    need(pair, "pair");
    need(out, "out");
    *out = skl(pair->pq());
  });
}

c2st_status c2st_pair_witness(const c2st_pair* pair, c2st_witness_kind kind, double sigma, const double* x,
                              size_t rows, double* values) {
  return guard([&] {
    need(pair, "pair");
    if (rows > 0) need(values, "values");
    const Samples pts = copy_rows(x, rows, pair->pair.p.ambient_dim(), "x");
    const Eigen::VectorXd v = population_witness(*pair, kind, sigma)(pts);
    for (size_t i = 0; i < rows; ++i) values[i] = v[static_cast<Eigen::Index>(i)];
  });
}

c2st_status c2st_pair_witness_summary(const c2st_pair* pair, c2st_witness_kind kind, double sigma,
                                      double summary[3]) {
  return guard([&] {
    need(pair, "pair");
    need(summary, "summary");
    write_summary(mean_std_summary(population_witness(*pair, kind, sigma), pair->pq()), summary);
  });
}

c2st_train_options c2st_train_options_default(void) {
  static const size_t widths[] = {32, 32};
  c2st_train_options o;
  o.hidden_widths = widths;
  o.hidden_count = 2;
  o.epochs = 100;
  o.batch_size = 100;
  o.learning_rate = 1e-3;
  o.seed = 0;
  o.init = C2ST_INIT_UNIFORM_FAN_IN;
  o.weight_clip = 0.0;
  return o;
}

c2st_status c2st_train(const double* x, size_t nx, const double* y, size_t ny, size_t dim,
                       const c2st_train_options* options, c2st_model** out) {
  return guard([&] {
    need(options, "options");
    need(out, "out");
    MlpSpec spec;
    spec.input_dim = dim;
    spec.hidden_widths = to_widths(options->hidden_widths, options->hidden_count);
    const TrainConfig tc = to_train_config(*options);
    TrainResult r = train(spec, tc, copy_rows(x, nx, dim, "x"), copy_rows(y, ny, dim, "y"));
    *out = new c2st_model{std::move(r.params), std::move(r.trace)};
  });
}

c2st_status c2st_model_load(const char* path, c2st_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new c2st_model{load_mlp(std::string(path)), {}};
  });
}

c2st_status c2st_model_save(const c2st_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    save_mlp(model->params, std::string(path));
  });
}

void c2st_model_free(c2st_model* model) { delete model; }

size_t c2st_model_input_dim(const c2st_model* model) { return model ? model->params.spec.input_dim : 0; }

size_t c2st_model_parameter_count(const c2st_model* model) { return model ? model->params.parameter_count() : 0; }

size_t c2st_model_trace_length(const c2st_model* model) { return model ? model->trace.loss.size() : 0; }

c2st_status c2st_model_trace(const c2st_model* model, double* loss, double* error) {
  return guard([&] {
    need(model, "model");
    for (std::size_t i = 0; i < model->trace.loss.size(); ++i) {
      if (loss) loss[i] = model->trace.loss[i];
      if (error) error[i] = model->trace.error[i];
    }
  });
}

c2st_status c2st_model_logits(const c2st_model* model, const double* x, size_t rows, double* out) {
  return guard([&] {
    need(model, "model");
    if (rows > 0) need(out, "out");
    const Eigen::VectorXd f = logits(model->params, copy_rows(x, rows, model->params.spec.input_dim, "x"));
    for (size_t i = 0; i < rows; ++i) out[i] = f[static_cast<Eigen::Index>(i)];
  });
}

c2st_status c2st_model_witness_summary(const c2st_model* model, const c2st_pair* pair, double summary[3]) {
  return guard([&] {
    need(model, "model");
    need(pair, "pair");
    need(summary, "summary");
    require(model->params.spec.input_dim == pair->pair.p.ambient_dim(), "model and pair dimensions differ");
    write_summary(mean_std_summary(mlp_witness(model->params), pair->pq()), summary);
  });
}

c2st_status c2st_test_scores(const double* x_scores, size_t nx, const double* y_scores, size_t ny,
                             c2st_score_stat stat, size_t m_perm, double alpha, uint64_t seed, c2st_outcome** out) {
  return guard([&] {
    need(out, "out");
    require(stat == C2ST_STAT_LOGIT || stat == C2ST_STAT_ACC, "unknown score statistic");
    ScoredSamples s;
    s.x_scores = copy_rows(x_scores, nx, 1, "x_scores").col(0);
    s.y_scores = copy_rows(y_scores, ny, 1, "y_scores").col(0);
    const bool logit = stat == C2ST_STAT_LOGIT;
    *out = new c2st_outcome{permutation_calibrate(s, logit ? ScoreStatistic::kLogit : ScoreStatistic::kAcc, m_perm,
                                                  alpha, seed, logit ? Method::kNetLogit : Method::kNetAcc)};
  });
}

c2st_status c2st_test_gmmd(const double* x, size_t nx, const double* y, size_t ny, size_t dim, double sigma,
                           size_t m_perm, double alpha, uint64_t seed, c2st_outcome** out) {
  return guard([&] {
    need(out, "out");
    const Samples z = pool(copy_rows(x, nx, dim, "x"), copy_rows(y, ny, dim, "y"));
    const double s = sigma > 0.0 ? sigma : median_bandwidth(z);
    *out = new c2st_outcome{permutation_calibrate_gram(gaussian_gram(z, s), nx, m_perm, alpha, seed, Method::kGmmd)};
  });
}

void c2st_outcome_free(c2st_outcome* outcome) { delete outcome; }

void c2st_outcome_get(const c2st_outcome* outcome, c2st_outcome_info* info) {
  if (!outcome || !info) return;
  const TestOutcome& o = outcome->outcome;
  info->statistic = o.statistic;
  info->threshold = o.threshold;
  info->p_value = o.p_value;
  info->reject = o.reject ? 1 : 0;
  info->null_count = o.null_samples.size();
  info->method = method_name(o.method);
}

const double* c2st_outcome_null_samples(const c2st_outcome* outcome) {
  return outcome ? outcome->outcome.null_samples.data() : nullptr;
}

c2st_status c2st_median_bandwidth(const double* x, size_t nx, const double* y, size_t ny, size_t dim, double* out) {
  return guard([&] {
    need(out, "out");
    *out = median_bandwidth(pool(copy_rows(x, nx, dim, "x"), copy_rows(y, ny, dim, "y")));
  });
}

c2st_power_options c2st_power_options_default(void) {
  static const char* const methods[] = {"gmmd", "gmmd+", "gmmd++", "net-acc", "net-logit"};
  const ExperimentConfig cfg;
  c2st_power_options o;
  o.family = "eg3";
  o.delta = cfg.delta;
  o.n_all = cfg.n_all;
  o.methods = methods;
  o.method_count = 5;
  o.n_run = cfg.n_run;
  o.n_rep = cfg.n_rep;
  o.m_perm = cfg.m_perm;
  o.alpha = cfg.alpha;
  o.seed = cfg.base_seed;
  o.train = c2st_train_options_default();
  o.bandwidth_grid = nullptr;
  o.bandwidth_count = 0;
  o.retrain_per_run = 0;
  return o;
}

c2st_status c2st_power_run(const c2st_power_options* options, c2st_power_table** out) {
  return guard([&] {
    need(options, "options");
    need(out, "out");
    need(options->family, "family");
    ExperimentConfig cfg;
    cfg.family = options->family;
    cfg.delta = options->delta;
    cfg.n_all = options->n_all;
    cfg.methods.clear();
    if (options->method_count > 0) need(options->methods, "methods");
    for (size_t i = 0; i < options->method_count; ++i) {
      need(options->methods[i], "method name");
      cfg.methods.push_back(parse_method(options->methods[i]));
    }
    cfg.n_run = options->n_run;
    cfg.n_rep = options->n_rep;
    cfg.m_perm = options->m_perm;
    cfg.alpha = options->alpha;
    cfg.base_seed = options->seed;
    cfg.hidden_widths = to_widths(options->train.hidden_widths, options->train.hidden_count);
    cfg.train = to_train_config(options->train);
    if (options->bandwidth_grid != nullptr) {
      cfg.bandwidth_grid.assign(options->bandwidth_grid, options->bandwidth_grid + options->bandwidth_count);
    }
    cfg.retrain_per_run = options->retrain_per_run != 0;
    *out = new c2st_power_table{replicate_table(cfg), cfg.n_rep};
  });
}

void c2st_power_table_free(c2st_power_table* table) { delete table; }

size_t c2st_power_table_methods(const c2st_power_table* table) { return table ? table->table.rows.size() : 0; }

size_t c2st_power_table_replicas(const c2st_power_table* table) { return table ? table->replicas : 0; }

c2st_status c2st_power_table_row(const c2st_power_table* table, size_t i, const char** method, double* mean,
                                 double* std, double* median) {
  return guard([&] {
    need(table, "table");
    require(i < table->table.rows.size(), "power table row out of range");
    const PowerRow& r = table->table.rows[i];
    if (method) *method = method_name(r.method);
    if (mean) *mean = r.mean;
    if (std) *std = r.std;
    if (median) *median = r.median;
  });
}

c2st_status c2st_power_table_replica(const c2st_power_table* table, size_t i, size_t replica, double* percent) {
  return guard([&] {
    need(table, "table");
    need(percent, "percent");
    require(i < table->table.rows.size(), "power table row out of range");
    require(replica < table->replicas, "replica index out of range");
    *percent = table->table.rows[i].replica_percent[replica];
  });
}

c2st_loss_curve_options c2st_loss_curve_options_default(void) {
  static const size_t widths[] = {4, 512};
  static const size_t n_train[] = {250, 4000};
  const LossCurveConfig cfg;
  c2st_loss_curve_options o;
  o.example = cfg.example;
  o.delta = cfg.delta;
  o.widths = widths;
  o.width_count = 2;
  o.n_train = n_train;
  o.n_train_count = 2;
  o.n_rep = cfg.n_rep;
  o.seed = cfg.base_seed;
  o.batch_size = cfg.batch_size;
  o.learning_rate = cfg.learning_rate;
  o.init = C2ST_INIT_UNIFORM_FAN_IN;
  return o;
}

c2st_status c2st_loss_curve_run(const c2st_loss_curve_options* options, c2st_loss_curve** out) {
  return guard([&] {
    need(options, "options");
    need(out, "out");
    LossCurveConfig cfg;
    cfg.example = options->example;
    cfg.delta = options->delta;
    cfg.widths = to_widths(options->widths, options->width_count);
    cfg.n_train = to_widths(options->n_train, options->n_train_count);
    cfg.n_rep = options->n_rep;
    cfg.base_seed = options->seed;
    cfg.batch_size = options->batch_size;
    cfg.learning_rate = options->learning_rate;
    cfg.init = to_init(options->init);
    *out = new c2st_loss_curve{loss_vs_width_experiment(cfg)};
  });
}

void c2st_loss_curve_free(c2st_loss_curve* curve) { delete curve; }

double c2st_loss_curve_jsd(const c2st_loss_curve* curve) { return curve ? curve->result.jsd : 0.0; }

size_t c2st_loss_curve_cells(const c2st_loss_curve* curve) { return curve ? curve->result.cells.size() : 0; }

c2st_status c2st_loss_curve_cell(const c2st_loss_curve* curve, size_t i, size_t* width, size_t* n_train,
                                 double* mean, double* std) {
  return guard([&] {
    need(curve, "curve");
    require(i < curve->result.cells.size(), "loss-curve cell out of range");
    const LossCurveCell& c = curve->result.cells[i];
    if (width) *width = c.width;
    if (n_train) *n_train = c.n_train;
    if (mean) *mean = c.mean;
    if (std) *std = c.std;
  });
}

c2st_status c2st_loss_curve_cell_losses(const c2st_loss_curve* curve, size_t i, double* losses) {
  return guard([&] {
    need(curve, "curve");
    need(losses, "losses");
    require(i < curve->result.cells.size(), "loss-curve cell out of range");
    const auto& l = curve->result.cells[i].losses;
    std::copy(l.begin(), l.end(), losses);
  });
}

c2st_manifold_options c2st_manifold_options_default(void) {
  const FitOptions fit;
  c2st_manifold_options o;
  o.manifold = "circle";
  o.target = "cos-theta";
  o.delta = 0.3;
  o.k_max = fit.k_max;
  o.ridge = fit.ridge;
  o.grid_points = fit.grid_points;
  o.n_eval = 10000;
  o.seed = 0;
  return o;
}

c2st_status c2st_manifold_build(const c2st_manifold_options* options, c2st_manifold_net** out) {
  return guard([&] {
    need(options, "options");
    need(out, "out");
    need(options->manifold, "manifold");
    need(options->target, "target");
    require(options->n_eval >= 100, "n_eval must be at least 100");
    Manifold m = named_manifold(options->manifold);
    AmbientFunction f = named_target(options->target);
    AtlasOptions ao;
    ao.seed = options->seed;
    const Atlas atlas = build_atlas(m, options->delta, ao);
    FitOptions fo;
    fo.k_max = options->k_max;
    fo.ridge = options->ridge;
    fo.grid_points = options->grid_points;
    ConstructedNet net = construct_net(f, m, atlas, fo);
    *out = new c2st_manifold_net{std::move(m), std::move(f), std::move(net), options->n_eval, options->seed};
  });
}

void c2st_manifold_net_free(c2st_manifold_net* net) { delete net; }

c2st_status c2st_manifold_net_report(const c2st_manifold_net* net, c2st_manifold_report* report) {
  return guard([&] {
    need(net, "net");
    need(report, "report");
    const ManifoldError err = measure_manifold_error(net->net, net->target, net->manifold, net->n_eval, net->seed);
    const DecayFit decay = coefficient_decay(net->net);
    double cond = 0.0;
    for (const auto& c : net->net.coefficients()) cond = std::max(cond, c.condition);
    report->linf_error = err.linf;
    report->parameter_count = net->net.parameter_count();
    report->charts = net->net.atlas().charts.size();
    report->delta = net->net.atlas().delta;
    report->decay_slope = decay.slope;
    report->decay_target = decay.target;
    report->max_condition = cond;
  });
}

c2st_status c2st_manifold_net_eval(const c2st_manifold_net* net, const double* x, size_t rows, double* values) {
  return guard([&] {
    need(net, "net");
    if (rows > 0) need(values, "values");
    const Eigen::VectorXd v = net->net.evaluate(copy_rows(x, rows, net->manifold.ambient_dim(), "x"));
    for (size_t i = 0; i < rows; ++i) values[i] = v[static_cast<Eigen::Index>(i)];
  });
}

c2st_status c2st_manifold_net_save(const c2st_manifold_net* net, const char* binary_path, const char* json_path) {
  return guard([&] {
    need(net, "net");
    need(binary_path, "binary_path");
    need(json_path, "json_path");
    save_constructed(net->net, binary_path, json_path);
  });
}

}  // extern "C"
