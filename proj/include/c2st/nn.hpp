#pragma once

#include "c2st/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace c2st {

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths{32, 32};
  std::size_t output_dim = 2;

  void validate() const;
  std::size_t layer_count() const { return hidden_widths.size() + 1; }
};

// out x in weights; the output layer's rows are (u, v).
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct MlpParams {
  MlpSpec spec;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// kHe: N(0, 2/fan_in) weights, zero biases. kUniformFanIn: weights and
// biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)), which spreads first-layer kinks
// over the data range in low input dimension.
enum class InitScheme { kHe, kUniformFanIn };

const char* init_scheme_name(InitScheme scheme) noexcept;
InitScheme parse_init_scheme(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> weight_clip;
  InitScheme init = InitScheme::kHe;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> loss;
  std::vector<double> error;
};

struct TrainResult {
  MlpParams params;
  TrainTrace trace;
};

MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed, InitScheme scheme = InitScheme::kHe);
MlpParams zeros_like(const MlpParams& params);

// f = u - v at one point, or at every row.
double forward_logit(const MlpParams& params, std::span<const double> x);
Eigen::VectorXd logits(const MlpParams& params, const Samples& x);
BatchWitness mlp_witness(MlpParams params);

// 1/2 (mean_X log D + mean_Y log(1 - D) + 2 log 2), D = sigmoid(f).
double empirical_loss(const MlpParams& params, const Samples& x, const Samples& y);
// Gradient of empirical_loss with respect to every weight and bias.
MlpParams loss_gradient(const MlpParams& params, const Samples& x, const Samples& y);

// Adam ascent on the empirical loss. Each step draws batch_size/2 rows from
// each class; a class smaller than that is used whole.
TrainResult train(const MlpSpec& spec, const TrainConfig& config, const Samples& x, const Samples& y);

// Row clipping so that the network's Lipschitz bound is at most `bound`.
void apply_weight_clip(MlpParams& params, double bound);
// Product of per-layer operator-norm bounds (hidden: Frobenius; output: |w_u - w_v|).
double lipschitz_bound(const MlpParams& params);
// max |f(a) - f(b)| / |a - b| over random pairs in [-radius, radius]^d.
double lipschitz_estimate(const MlpParams& params, std::size_t pairs, double radius, std::uint64_t seed);

// Little-endian container of dense blocks: magic "C2STMLP1", u32 block count,
// then per block u32 rows, u32 cols, rows*cols f64 weights row-major, rows f64 biases.
void save_blocks(const std::vector<DenseLayer>& blocks, std::ostream& out);
std::vector<DenseLayer> load_blocks(std::istream& in);

// The block container with the layers in order; load checks the shape chain.
void save_mlp(const MlpParams& params, std::ostream& out);
MlpParams load_mlp(std::istream& in);
void save_mlp(const MlpParams& params, const std::string& path);
MlpParams load_mlp(const std::string& path);

}  // namespace c2st
