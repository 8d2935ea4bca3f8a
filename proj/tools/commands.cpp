#include "commands.hpp"

#include "cli_error.hpp"
#include "csv.hpp"
#include "idx.hpp"

#include "c2st/c2st.h"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

namespace c2st::cli {

using nlohmann::json;

namespace {

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using PairPtr = std::unique_ptr<c2st_pair, Deleter<c2st_pair, c2st_pair_free>>;
using ModelPtr = std::unique_ptr<c2st_model, Deleter<c2st_model, c2st_model_free>>;
using SamplesPtr = std::unique_ptr<c2st_samples, Deleter<c2st_samples, c2st_samples_free>>;
using OutcomePtr = std::unique_ptr<c2st_outcome, Deleter<c2st_outcome, c2st_outcome_free>>;
using PowerPtr = std::unique_ptr<c2st_power_table, Deleter<c2st_power_table, c2st_power_table_free>>;
using CurvePtr = std::unique_ptr<c2st_loss_curve, Deleter<c2st_loss_curve, c2st_loss_curve_free>>;
using ManifoldPtr = std::unique_ptr<c2st_manifold_net, Deleter<c2st_manifold_net, c2st_manifold_net_free>>;

PairPtr make_pair(const std::string& family, double delta) {
  c2st_pair* p = nullptr;
  check(c2st_pair_create(family.c_str(), delta, &p));
  return PairPtr(p);
}

Matrix to_matrix(const c2st_samples* s) {
  Matrix m;
  m.rows = c2st_samples_rows(s);
  m.cols = c2st_samples_cols(s);
  m.data.assign(c2st_samples_data(s), c2st_samples_data(s) + m.rows * m.cols);
  return m;
}

Matrix draw(const c2st_pair* pair, int which, std::size_t n, std::uint64_t seed) {
  c2st_samples* s = nullptr;
  check(c2st_pair_sample(pair, which, n, seed, &s));
  const SamplesPtr owned(s);
  return to_matrix(s);
}

Matrix subsample(const IdxDataset& d, std::size_t n, std::uint64_t seed, const std::string& side) {
  if (n > d.rows) {
    raise(C2ST_ERR_INVALID_INPUT, "IDX class filter for " + side + " keeps " + std::to_string(d.rows) +
                                      " images, " + std::to_string(n) + " requested");
  }
  std::vector<std::size_t> order(d.rows);
  check(c2st_permutation(seed, d.rows, order.data()));
  Matrix m;
  m.rows = n;
  m.cols = d.cols;
  m.data.reserve(n * d.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* row = d.values.data() + order[i] * d.cols;
    m.data.insert(m.data.end(), row, row + d.cols);
  }
  return m;
}

c2st_train_options train_options(const RunConfig& cfg, std::uint64_t seed) {
  c2st_train_options o = c2st_train_options_default();
  o.hidden_widths = reinterpret_cast<const size_t*>(cfg.training.hidden_widths.data());
  o.hidden_count = cfg.training.hidden_widths.size();
  o.epochs = cfg.training.epochs;
  o.batch_size = cfg.training.batch_size;
  o.learning_rate = cfg.training.learning_rate;
  o.seed = seed;
  o.init = cfg.training.init == "he" ? C2ST_INIT_HE : C2ST_INIT_UNIFORM_FAN_IN;
  o.weight_clip = cfg.training.weight_clip;
  return o;
}

ModelPtr train_model(const RunConfig& cfg, const SamplePair& data, std::uint64_t seed) {
  if (data.x.cols != data.y.cols) raise(C2ST_ERR_INVALID_INPUT, "X and Y samples differ in dimension");
  const c2st_train_options o = train_options(cfg, seed);
  c2st_model* m = nullptr;
  check(c2st_train(data.x.data.data(), data.x.rows, data.y.data.data(), data.y.rows, data.x.cols, &o, &m));
  return ModelPtr(m);
}

ModelPtr load_model(const std::string& path) {
  c2st_model* m = nullptr;
  check(c2st_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

std::vector<double> model_logits(const c2st_model* model, const Matrix& x) {
  if (x.cols != c2st_model_input_dim(model)) {
    raise(C2ST_ERR_INVALID_INPUT, "samples have " + std::to_string(x.cols) + " columns, model expects " +
                                      std::to_string(c2st_model_input_dim(model)));
  }
  std::vector<double> out(x.rows);
  check(c2st_model_logits(model, x.data.data(), x.rows, out.data()));
  return out;
}

// Reads back a file the library wrote, for emission alongside the other artifacts.
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) raise(C2ST_ERR_IO, "cannot read back '" + p.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("c2st-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

SamplePair inputs_or_generated(const RunConfig& cfg, const std::string& x, const std::string& y, std::size_t n,
                               const std::string& purpose) {
  if (x.empty() != y.empty()) raise(C2ST_ERR_INVALID_INPUT, "give both X and Y sample files or neither");
  if (!x.empty()) return {read_samples(x), read_samples(y)};
  return generate_dataset(cfg, n, purpose);
}

std::string outcome_json(const c2st_outcome* outcome, std::size_t m_perm) {
  c2st_outcome_info info;
  c2st_outcome_get(outcome, &info);
  const double* nulls = c2st_outcome_null_samples(outcome);
  const json doc{{"method", info.method},
                 {"statistic", info.statistic},
                 {"threshold", info.threshold},
                 {"p_value", info.p_value},
                 {"reject", info.reject != 0},
                 {"m_perm", m_perm},
                 {"null_samples", std::vector<double>(nulls, nulls + info.null_count)}};
  return doc.dump(2) + "\n";
}

std::vector<Artifact> cmd_gen(const RunConfig& cfg) {
  const SamplePair s = generate_dataset(cfg, cfg.gen.n, "gen");
  return {{"x.csv", samples_csv(s.x)}, {"y.csv", samples_csv(s.y)}};
}

std::vector<Artifact> cmd_train(const RunConfig& cfg) {
  const SamplePair s = inputs_or_generated(cfg, cfg.train.x, cfg.train.y, cfg.harness.n_all / 2, "train");
  const ModelPtr model = train_model(cfg, s, c2st_child_seed(cfg.seed, "train"));
  const std::size_t n = c2st_model_trace_length(model.get());
  std::vector<double> loss(n), err(n);
  check(c2st_model_trace(model.get(), loss.data(), err.data()));
  CsvWriter trace({"epoch", "loss", "error"});
  for (std::size_t i = 0; i < n; ++i) trace.add({static_cast<std::uint64_t>(i + 1), loss[i], err[i]});
  const ScratchDir scratch;
  check(c2st_model_save(model.get(), scratch.file("model.bin").c_str()));
  return {{"model.bin", slurp(scratch.file("model.bin"))}, {"trace.csv", trace.str()}};
}

std::vector<Artifact> cmd_test(const RunConfig& cfg) {
  const auto& t = cfg.test;
  const std::uint64_t perm_seed = c2st_child_seed(cfg.seed, "perm");
  c2st_outcome* raw = nullptr;
  if (t.method == "gmmd") {
    const SamplePair s = inputs_or_generated(cfg, t.x, t.y, cfg.harness.n_all / 2, "test");
    if (s.x.cols != s.y.cols) raise(C2ST_ERR_INVALID_INPUT, "X and Y samples differ in dimension");
    check(c2st_test_gmmd(s.x.data.data(), s.x.rows, s.y.data.data(), s.y.rows, s.x.cols, t.sigma,
                         cfg.harness.m_perm, cfg.harness.alpha, perm_seed, &raw));
  } else {
    std::vector<double> sx, sy;
    if (!t.scores.empty()) {
      const CsvTable table = read_csv(t.scores);
      const std::size_t lc = table.column("label"), sc = table.column("score");
      for (const auto& row : table.rows) {
        if (row[lc] == 0.0) {
          sx.push_back(row[sc]);
        } else if (row[lc] == 1.0) {
          sy.push_back(row[sc]);
        } else {
          raise(C2ST_ERR_FORMAT, t.scores + ": label must be 0 (X) or 1 (Y)");
        }
      }
    } else {
      const ModelPtr model = t.model.empty() ? train_model(cfg, generate_dataset(cfg, cfg.harness.n_all / 2, "train"),
                                                           c2st_child_seed(cfg.seed, "train"))
                                             : load_model(t.model);
      const SamplePair s = inputs_or_generated(cfg, t.x, t.y, cfg.harness.n_all / 2, "test");
      sx = model_logits(model.get(), s.x);
      sy = model_logits(model.get(), s.y);
    }
    const c2st_score_stat stat = t.method == "net-acc" ? C2ST_STAT_ACC : C2ST_STAT_LOGIT;
    check(c2st_test_scores(sx.data(), sx.size(), sy.data(), sy.size(), stat, cfg.harness.m_perm, cfg.harness.alpha,
                           perm_seed, &raw));
  }
  const OutcomePtr outcome(raw);
  return {{"outcome.json", outcome_json(outcome.get(), cfg.harness.m_perm)}};
}

std::vector<Artifact> cmd_power(const RunConfig& cfg) {
  if (cfg.data.source != "analytic") raise(C2ST_ERR_INVALID_INPUT, "power needs an analytic data family");
  std::vector<const char*> methods;
  for (const auto& m : cfg.methods) methods.push_back(m.c_str());
  c2st_power_options o = c2st_power_options_default();
  o.family = cfg.data.family.c_str();
  o.delta = cfg.data.delta;
  o.n_all = cfg.harness.n_all;
  o.methods = methods.data();
  o.method_count = methods.size();
  o.n_run = cfg.harness.n_run;
  o.n_rep = cfg.harness.n_rep;
  o.m_perm = cfg.harness.m_perm;
  o.alpha = cfg.harness.alpha;
  o.seed = cfg.seed;
  o.train = train_options(cfg, 0);
  o.bandwidth_grid = cfg.harness.bandwidth_grid.data();
  o.bandwidth_count = cfg.harness.bandwidth_grid.size();
  o.retrain_per_run = cfg.harness.retrain_per_run ? 1 : 0;
  c2st_power_table* raw = nullptr;
  check(c2st_power_run(&o, &raw));
  const PowerPtr table(raw);
  CsvWriter replicas({"method", "replica", "power_percent"});
  CsvWriter summary({"method", "mean", "std", "median"});
  for (std::size_t i = 0; i < c2st_power_table_methods(table.get()); ++i) {
    const char* name = nullptr;
    double mean = 0, sd = 0, med = 0;
    check(c2st_power_table_row(table.get(), i, &name, &mean, &sd, &med));
    for (std::size_t r = 0; r < c2st_power_table_replicas(table.get()); ++r) {
      double pct = 0;
      check(c2st_power_table_replica(table.get(), i, r, &pct));
      replicas.add({std::string(name), static_cast<std::uint64_t>(r), pct});
    }
    summary.add({std::string(name), mean, sd, med});
  }
  return {{"power_replicas.csv", replicas.str()}, {"power_summary.csv", summary.str()}};
}

std::vector<Artifact> cmd_loss_curve(const RunConfig& cfg) {
  const auto& l = cfg.loss_curve;
  c2st_loss_curve_options o = c2st_loss_curve_options_default();
  o.example = l.example;
  o.delta = l.delta;
  o.widths = reinterpret_cast<const size_t*>(l.widths.data());
  o.width_count = l.widths.size();
  o.n_train = reinterpret_cast<const size_t*>(l.n_train.data());
  o.n_train_count = l.n_train.size();
  o.n_rep = l.n_rep;
  o.seed = cfg.seed;
  o.batch_size = cfg.training.batch_size;
  o.learning_rate = cfg.training.learning_rate;
  o.init = cfg.training.init == "he" ? C2ST_INIT_HE : C2ST_INIT_UNIFORM_FAN_IN;
  c2st_loss_curve* raw = nullptr;
  check(c2st_loss_curve_run(&o, &raw));
  const CurvePtr curve(raw);
  CsvWriter cells({"H", "n", "mean_L", "std_L", "jsd_line"});
  CsvWriter reps({"H", "n", "replica", "L"});
  std::vector<double> losses(l.n_rep);
  for (std::size_t i = 0; i < c2st_loss_curve_cells(curve.get()); ++i) {
    size_t w = 0, n = 0;
    double mean = 0, sd = 0;
    check(c2st_loss_curve_cell(curve.get(), i, &w, &n, &mean, &sd));
    check(c2st_loss_curve_cell_losses(curve.get(), i, losses.data()));
    cells.add({static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(n), mean, sd,
               c2st_loss_curve_jsd(curve.get())});
    for (std::size_t r = 0; r < losses.size(); ++r) {
      reps.add({static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r),
                losses[r]});
    }
  }
  return {{"loss_curve.csv", cells.str()}, {"loss_curve_replicas.csv", reps.str()}};
}

std::vector<Artifact> cmd_witness(const RunConfig& cfg) {
  const auto& w = cfg.witness;
  const bool analytic = cfg.data.source == "analytic";
  const ModelPtr model = w.model.empty() ? train_model(cfg, generate_dataset(cfg, cfg.harness.n_all / 2, "witness-train"),
                                                       c2st_child_seed(cfg.seed, "witness-train"))
                                         : load_model(w.model);
  const SamplePair test = generate_dataset(cfg, w.n_test, "witness-test");
  const std::size_t d = test.x.cols;
  PairPtr pair = analytic ? make_pair(cfg.data.family, cfg.data.delta) : PairPtr();

  std::vector<std::string> header{"sample"};
  for (std::size_t j = 0; j < d; ++j) header.push_back("x" + std::to_string(j + 1));
  header.push_back("trained_logit");
  if (analytic) header.push_back("log_ratio");
  CsvWriter trained(header);
  for (int side = 0; side < 2; ++side) {
    const Matrix& m = side == 0 ? test.x : test.y;
    const std::vector<double> f = model_logits(model.get(), m);
    std::vector<double> lr(m.rows);
    if (analytic) check(c2st_pair_witness(pair.get(), C2ST_WITNESS_LOG_RATIO, 0.0, m.data.data(), m.rows, lr.data()));
    for (std::size_t i = 0; i < m.rows; ++i) {
      std::vector<Cell> row{std::string(side == 0 ? "p" : "q")};
      for (std::size_t j = 0; j < d; ++j) row.push_back(m.data[i * d + j]);
      row.push_back(f[i]);
      if (analytic) row.push_back(lr[i]);
      trained.add(std::move(row));
    }
  }
  std::vector<Artifact> out{{"witness_trained.csv", trained.str()}};
  if (!analytic) return out;

  CsvWriter summary({"witness", "mean_gap", "spread", "ratio"});
  double s[3];
  check(c2st_pair_witness_summary(pair.get(), C2ST_WITNESS_LOG_RATIO, 0.0, s));
  summary.add({std::string("log-ratio"), s[0], s[1], s[2]});
  check(c2st_pair_witness_summary(pair.get(), C2ST_WITNESS_SIGN, 0.0, s));
  summary.add({std::string("sign-log-ratio"), s[0], s[1], s[2]});
  if (d == 1) {
    check(c2st_pair_witness_summary(pair.get(), C2ST_WITNESS_KERNEL, w.sigma, s));
    summary.add({std::string("kernel"), s[0], s[1], s[2]});
  }
  if (c2st_model_input_dim(model.get()) == d) {
    check(c2st_model_witness_summary(model.get(), pair.get(), s));
    summary.add({std::string("trained"), s[0], s[1], s[2]});
  }
  out.push_back({"witness_summary.csv", summary.str()});

  if (d == 1) {
    const std::size_t n = w.grid_points;
    std::vector<double> grid(n), lr(n), sg(n), kw(n);
    for (std::size_t i = 0; i < n; ++i) {
      grid[i] = w.grid_lo + (w.grid_hi - w.grid_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    check(c2st_pair_witness(pair.get(), C2ST_WITNESS_LOG_RATIO, 0.0, grid.data(), n, lr.data()));
    check(c2st_pair_witness(pair.get(), C2ST_WITNESS_SIGN, 0.0, grid.data(), n, sg.data()));
    check(c2st_pair_witness(pair.get(), C2ST_WITNESS_KERNEL, w.sigma, grid.data(), n, kw.data()));
    const std::vector<double> tr = model_logits(model.get(), Matrix{n, 1, grid});
    CsvWriter curves({"x", "log_ratio", "sign_log_ratio", "kernel", "trained_logit"});
    for (std::size_t i = 0; i < n; ++i) curves.add({grid[i], lr[i], sg[i], kw[i], tr[i]});
    out.push_back({"witness_population.csv", curves.str()});
  }
  return out;
}

std::vector<Artifact> cmd_manifold(const RunConfig& cfg) {
  const auto& m = cfg.manifold;
  CsvWriter main({"k_max", "linf_error", "param_count"});
  CsvWriter detail({"k_max", "charts", "delta", "decay_slope", "decay_target", "max_condition"});
  std::vector<Artifact> saved;
  const ScratchDir scratch;
  for (const auto k : m.k_max) {
    c2st_manifold_options o = c2st_manifold_options_default();
    o.manifold = m.manifold.c_str();
    o.target = m.target.c_str();
    o.delta = m.delta;
    o.k_max = static_cast<int>(k);
    o.ridge = m.ridge;
    o.grid_points = m.grid_points;
    o.n_eval = m.n_eval;
    o.seed = cfg.seed;
    c2st_manifold_net* raw = nullptr;
    check(c2st_manifold_build(&o, &raw));
    const ManifoldPtr net(raw);
    c2st_manifold_report r;
    check(c2st_manifold_net_report(net.get(), &r));
    main.add({static_cast<std::int64_t>(k), r.linf_error, static_cast<std::uint64_t>(r.parameter_count)});
    detail.add({static_cast<std::int64_t>(k), static_cast<std::uint64_t>(r.charts), r.delta, r.decay_slope,
                r.decay_target, r.max_condition});
    if (m.save) {
      const std::string stem = "constructed_k" + std::to_string(k);
      check(c2st_manifold_net_save(net.get(), scratch.file(stem + ".bin").c_str(),
                                   scratch.file(stem + ".json").c_str()));
      saved.push_back({stem + ".bin", slurp(scratch.file(stem + ".bin"))});
      saved.push_back({stem + ".json", slurp(scratch.file(stem + ".json"))});
    }
  }
  std::vector<Artifact> out{{"manifold.csv", main.str()}, {"manifold_detail.csv", detail.str()}};
  out.insert(out.end(), saved.begin(), saved.end());
  return out;
}

}  // namespace

SamplePair generate_dataset(const RunConfig& cfg, std::size_t n, const std::string& purpose) {
  const std::uint64_t base = c2st_child_seed(cfg.seed, purpose.c_str());
  if (cfg.data.source == "idx") {
    const IdxFile images = read_idx_file(cfg.data.images, kIdxImageMagic);
    const IdxFile labels = read_idx_file(cfg.data.labels, kIdxLabelMagic);
    auto filter = [](const std::vector<int>& c) { return c.empty() ? std::nullopt : std::optional(c); };
    const IdxDataset p = load_idx(images, labels, filter(cfg.data.p_classes));
    const IdxDataset q = load_idx(images, labels, filter(cfg.data.q_classes));
    return {subsample(p, n, c2st_child_seed(base, "x"), "p"), subsample(q, n, c2st_child_seed(base, "y"), "q")};
  }
  const PairPtr pair = make_pair(cfg.data.family, cfg.data.delta);
  return {draw(pair.get(), 0, n, c2st_child_seed(base, "x")), draw(pair.get(), 1, n, c2st_child_seed(base, "y"))};
}

Matrix read_samples(const std::string& path) {
  const CsvTable t = read_csv(path);
  Matrix m;
  m.rows = t.rows.size();
  m.cols = t.header.size();
  for (const auto& r : t.rows) m.data.insert(m.data.end(), r.begin(), r.end());
  if (m.rows == 0) raise(C2ST_ERR_FORMAT, path + ": no sample rows");
  return m;
}

std::string samples_csv(const Matrix& m) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < m.cols; ++j) header.push_back("x" + std::to_string(j + 1));
  CsvWriter w(header);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::vector<Cell> row;
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m.data[i * m.cols + j]);
    w.add(std::move(row));
  }
  return w.str();
}

std::vector<std::string> command_names() {
  return {"gen", "train", "test", "power", "loss-curve", "witness", "manifold-approx"};
}

std::vector<Artifact> run_command(const std::string& command, const RunConfig& cfg) {
  std::vector<Artifact> out;
  if (command == "gen") {
    out = cmd_gen(cfg);
  } else if (command == "train") {
    out = cmd_train(cfg);
  } else if (command == "test") {
    out = cmd_test(cfg);
  } else if (command == "power") {
    out = cmd_power(cfg);
  } else if (command == "loss-curve") {
    out = cmd_loss_curve(cfg);
  } else if (command == "witness") {
    out = cmd_witness(cfg);
  } else if (command == "manifold-approx") {
    out = cmd_manifold(cfg);
  } else {
    raise(C2ST_ERR_INVALID_INPUT, "unknown subcommand '" + command + "'");
  }
  out.push_back({"effective_config.json", emit_config(cfg)});
  return out;
}

}  // namespace c2st::cli
