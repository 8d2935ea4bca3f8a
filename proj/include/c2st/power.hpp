#pragma once

#include "c2st/densities.hpp"
#include "c2st/nn.hpp"
#include "c2st/parallel.hpp"
#include "c2st/stats.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace c2st {

struct ExperimentConfig {
  std::string family = "eg3";
  double delta = 0.08;
  std::size_t n_all = 400;
  std::vector<Method> methods{Method::kGmmd, Method::kGmmdPlus, Method::kGmmdPlusPlus, Method::kNetAcc,
                              Method::kNetLogit};
  std::size_t n_run = 400;
  std::size_t n_rep = 20;
  std::size_t m_perm = 200;
  double alpha = 0.05;
  std::uint64_t base_seed = 0;
  std::vector<std::size_t> hidden_widths{32, 32};
  TrainConfig train = [] {
    TrainConfig t;
    t.init = InitScheme::kUniformFanIn;
    return t;
  }();
  std::vector<double> bandwidth_grid = default_bandwidth_grid();
  // Retrain the classifier (and reselect sigma for gmmd-ad) in every run
  // instead of once per replica.
  bool retrain_per_run = false;

  void validate() const;
};

// Seed for replica r, run k and a purpose tag:
//   derive_seed(base_seed, {r, k, tag_hash(tag)}).
std::uint64_t experiment_seed(std::uint64_t base_seed, std::uint64_t replica, std::uint64_t run, const char* tag);

// One fully fresh draw: split, train or select on the training half, test.
// gmmd++ has no single-run form; pass `sigma` to run the all-sample test at a fixed bandwidth.
TestOutcome run_once(const ExperimentConfig& cfg, Method method, std::uint64_t seed,
                     std::optional<double> sigma = std::nullopt);

// Rejection frequency over cfg.n_run runs of one replica.
double estimate_power(const ExperimentConfig& cfg, Method method, std::uint64_t replica_seed);
// All configured methods of one replica on shared draws.
std::vector<double> estimate_power_all(const ExperimentConfig& cfg, std::uint64_t replica_seed);

struct PowerRow {
  Method method;
  std::vector<double> replica_percent;
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
};

struct PowerTable {
  std::vector<PowerRow> rows;
  const PowerRow& row(Method m) const;
};

// Summary of per-replica percentages: mean, sample std (n - 1), median.
PowerRow summarize(Method method, std::vector<double> replica_percent);
PowerTable replicate_table(const ExperimentConfig& cfg);

struct LossCurveCell {
  std::size_t width = 0;
  std::size_t n_train = 0;
  std::vector<double> losses;
  double mean = 0.0;
  double std = 0.0;
};

struct LossCurveResult {
  std::vector<LossCurveCell> cells;
  double jsd = 0.0;
};

struct LossCurveConfig {
  int example = 1;
  double delta = 0.1;
  std::vector<std::size_t> widths{4, 512};
  std::vector<std::size_t> n_train{250, 4000};
  std::size_t n_rep = 10;
  std::uint64_t base_seed = 0;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  InitScheme init = InitScheme::kUniformFanIn;

  void validate() const;
};

// One-hidden-layer nets, 100 * 8000 / n_train epochs, L evaluated by quadrature.
LossCurveResult loss_vs_width_experiment(const LossCurveConfig& cfg);

}  // namespace c2st
