#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace c2st::cli {

struct DataConfig {
  std::string source = "analytic";  // "analytic" or "idx"
  std::string family = "eg3";
  double delta = 0.08;
  std::string images;
  std::string labels;
  std::vector<int> p_classes;
  std::vector<int> q_classes;
  bool operator==(const DataConfig&) const = default;
};

struct HarnessConfig {
  std::uint64_t n_all = 400;
  std::uint64_t n_run = 400;
  std::uint64_t n_rep = 20;
  std::uint64_t m_perm = 200;
  double alpha = 0.05;
  bool retrain_per_run = false;
  std::vector<double> bandwidth_grid{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  bool operator==(const HarnessConfig&) const = default;
};

struct TrainingConfig {
  std::vector<std::uint64_t> hidden_widths{32, 32};
  std::uint64_t epochs = 100;
  std::uint64_t batch_size = 100;
  double learning_rate = 1e-3;
  std::string init = "uniform_fan_in";
  double weight_clip = 0.0;  // 0 disables clipping
  bool operator==(const TrainingConfig&) const = default;
};

struct GenConfig {
  std::uint64_t n = 1000;
  bool operator==(const GenConfig&) const = default;
};

struct TrainInputs {
  std::string x;  // sample CSVs; empty draws n_all/2 rows of each density
  std::string y;
  bool operator==(const TrainInputs&) const = default;
};

struct TestConfig {
  std::string method = "net-logit";  // net-logit, net-acc or gmmd
  std::string scores;                // CSV with columns label, score (label 0 for X, 1 for Y)
  std::string x;
  std::string y;
  std::string model;
  double sigma = 0.0;  // gmmd bandwidth; 0 selects the median distance
  bool operator==(const TestConfig&) const = default;
};

struct LossCurveSection {
  int example = 1;
  double delta = 0.1;
  std::vector<std::uint64_t> widths{4, 512};
  std::vector<std::uint64_t> n_train{250, 4000};
  std::uint64_t n_rep = 10;
  bool operator==(const LossCurveSection&) const = default;
};

struct WitnessConfig {
  double grid_lo = -6.0;
  double grid_hi = 6.0;
  std::uint64_t grid_points = 241;
  double sigma = 1.0;
  std::uint64_t n_test = 1000;
  std::string model;  // optional trained model; empty trains one on n_all/2 rows per density
  bool operator==(const WitnessConfig&) const = default;
};

struct ManifoldConfig {
  std::string manifold = "circle";
  std::string target = "cos-theta";
  double delta = 0.3;
  std::vector<std::int64_t> k_max{2, 4, 6};
  double ridge = 1e-10;
  std::uint64_t grid_points = 2048;
  std::uint64_t n_eval = 10000;
  bool save = false;
  bool operator==(const ManifoldConfig&) const = default;
};

struct RunConfig {
  std::string profile = "default";
  std::string output_dir = "c2st_out";
  std::uint64_t seed = 0;
  DataConfig data;
  std::vector<std::string> methods{"gmmd", "gmmd+", "gmmd++", "net-acc", "net-logit"};
  HarnessConfig harness;
  TrainingConfig training;
  GenConfig gen;
  TrainInputs train;
  TestConfig test;
  LossCurveSection loss_curve;
  WitnessConfig witness;
  ManifoldConfig manifold;
  bool operator==(const RunConfig&) const = default;
};

// "default", "eg3-table", "eg3-reduced", "type-i" and "fast".
std::vector<std::string> profile_names();
RunConfig profile_config(const std::string& name);

nlohmann::json to_json(const RunConfig& cfg);
// Throws a schema error naming the first unknown key or mistyped value.
void validate_schema(const nlohmann::json& doc);
// Schema, range and enum checks; doc may be partial and is laid over its profile.
RunConfig config_from_json(const nlohmann::json& doc);

// "a.b=value": value is read as JSON, then as a comma list for list keys, then as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct ConfigSources {
  std::string path;                     // optional config file
  std::string profile;                  // overrides the file's profile when set
  std::vector<std::string> overrides;   // applied in order after the file
};
RunConfig load_config(const ConfigSources& sources);

RunConfig parse_config(const std::string& path);
std::string emit_config(const RunConfig& cfg);

}  // namespace c2st::cli
