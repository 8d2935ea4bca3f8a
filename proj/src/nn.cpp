#include "c2st/nn.hpp"

#include "c2st/binary_io.hpp"
#include "c2st/error.hpp"
#include "c2st/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace c2st {

namespace {

constexpr char kMagic[8] = {'C', '2', 'S', 'T', 'M', 'L', 'P', '1'};

double softplus_stable(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd as_matrix(const Samples& s) { return Eigen::MatrixXd(s); }

// Pre-activations and activations of every layer for a batch.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> pre;  // per layer, n x out
  std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[l+1] = relu(pre[l]) for hidden layers
  Eigen::VectorXd logit;
};

ForwardPass forward(const MlpParams& params, const Eigen::MatrixXd& input) {
  ForwardPass fp;
  fp.act.push_back(input);
  const std::size_t L = params.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = fp.act.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    fp.pre.push_back(z);
    if (l + 1 < L) fp.act.push_back(z.cwiseMax(0.0));
  }
  fp.logit = fp.pre.back().col(0) - fp.pre.back().col(1);
  return fp;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

double loss_from_logits(const Eigen::VectorXd& f, Eigen::Index nx) {
  const Eigen::Index ny = f.size() - nx;
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i) sx -= softplus_stable(-f[i]);
  for (Eigen::Index i = nx; i < f.size(); ++i) sy -= softplus_stable(f[i]);
  return 0.5 * (sx / static_cast<double>(nx) + sy / static_cast<double>(ny) + 2.0 * std::numbers::ln2);
}

// Gradient of the loss for a stacked batch (first nx rows from X).
MlpParams gradient_stacked(const MlpParams& params, const Eigen::MatrixXd& input, Eigen::Index nx, double* loss) {
  const ForwardPass fp = forward(params, input);
  const Eigen::Index n = input.rows();
  const Eigen::Index ny = n - nx;
  if (loss) *loss = loss_from_logits(fp.logit, nx);
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < nx; ++i) g[i] = 0.5 * sigmoid(-fp.logit[i]) / static_cast<double>(nx);
  for (Eigen::Index i = nx; i < n; ++i) g[i] = -0.5 * sigmoid(fp.logit[i]) / static_cast<double>(ny);
  Eigen::MatrixXd delta(n, 2);
  delta.col(0) = g;
  delta.col(1) = -g;
  MlpParams grad = zeros_like(params);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    grad.layers[l].weight = delta.transpose() * fp.act[l];
    grad.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * params.layers[l].weight).cwiseProduct((fp.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grad;
}

}  // namespace

void MlpSpec::validate() const {
  require(input_dim >= 1, "input_dim must be positive");
  require(!hidden_widths.empty(), "hidden_widths must be nonempty");
  for (auto w : hidden_widths) require(w >= 1, "hidden widths must be positive");
  require(output_dim == 2, "output_dim must be 2");
}

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  if (weight_clip) require(*weight_clip > 0.0, "weight_clip must be positive");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

const char* init_scheme_name(InitScheme scheme) noexcept {
  return scheme == InitScheme::kHe ? "he" : "uniform_fan_in";
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "he") return InitScheme::kHe;
  if (name == "uniform_fan_in") return InitScheme::kUniformFanIn;
  fail(ErrorCode::kInvalidInput, "unknown init scheme '" + name + "' (expected he or uniform_fan_in)");
}

MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed, InitScheme scheme) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  CounterRng rng(seed, tag_hash("init"));
  std::size_t fan_in = spec.input_dim;
  std::vector<std::size_t> widths = spec.hidden_widths;
  widths.push_back(spec.output_dim);
  for (std::size_t out : widths) {
    DenseLayer layer;
    layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in));
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    if (scheme == InitScheme::kHe) {
      const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = sd * rng.normal();
      }
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = bound * (2.0 * rng.uniform() - 1.0);
    }
    p.layers.push_back(std::move(layer));
    fan_in = out;
  }
  return p;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  z.spec = params.spec;
  for (const auto& l : params.layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

double forward_logit(const MlpParams& params, std::span<const double> x) {
  require(x.size() == params.spec.input_dim, "forward_logit: expected input of length " +
                                                 std::to_string(params.spec.input_dim) + ", got " +
                                                 std::to_string(x.size()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Eigen::VectorXd z = params.layers[l].weight * a + params.layers[l].bias;
    a = (l + 1 < params.layers.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a[0] - a[1];
}

Eigen::VectorXd logits(const MlpParams& params, const Samples& x) {
  require(static_cast<std::size_t>(x.cols()) == params.spec.input_dim,
          "logits: expected " + std::to_string(params.spec.input_dim) + " columns, got " + std::to_string(x.cols()));
  if (x.rows() == 0) return Eigen::VectorXd(0);
  return forward(params, as_matrix(x)).logit;
}

BatchWitness mlp_witness(MlpParams params) {
  return [p = std::move(params)](const Samples& x) { return logits(p, x); };
}

double empirical_loss(const MlpParams& params, const Samples& x, const Samples& y) {
  require(x.rows() >= 1 && y.rows() >= 1, "empirical_loss needs at least one sample per class");
  Eigen::VectorXd f(x.rows() + y.rows());
  f << logits(params, x), logits(params, y);
  return loss_from_logits(f, x.rows());
}

MlpParams loss_gradient(const MlpParams& params, const Samples& x, const Samples& y) {
  require(x.rows() >= 1 && y.rows() >= 1, "loss_gradient needs at least one sample per class");
  require(static_cast<std::size_t>(x.cols()) == params.spec.input_dim && x.cols() == y.cols(),
          "loss_gradient: dimension mismatch");
  return gradient_stacked(params, stack(as_matrix(x), as_matrix(y)), x.rows(), nullptr);
}

TrainResult train(const MlpSpec& spec, const TrainConfig& config, const Samples& x, const Samples& y) {
  spec.validate();
  config.validate();
  require(x.rows() >= 1 && y.rows() >= 1, "train needs at least one sample per class");
  require(static_cast<std::size_t>(x.cols()) == spec.input_dim && x.cols() == y.cols(),
          "train: sample dimension does not match input_dim");

  TrainResult result{init_mlp(spec, derive_seed(config.seed, {tag_hash("init")}), config.init), {}};
  MlpParams& params = result.params;
  if (config.weight_clip) apply_weight_clip(params, *config.weight_clip);
  MlpParams m = zeros_like(params), v = zeros_like(params);

  const Eigen::MatrixXd xm = as_matrix(x), ym = as_matrix(y);
  const Eigen::MatrixXd all = stack(xm, ym);
  const auto nx = static_cast<std::size_t>(x.rows()), ny = static_cast<std::size_t>(y.rows());
  const std::size_t half = std::max<std::size_t>(1, config.batch_size / 2);
  const bool full_batch = nx < half || ny < half;
  const std::size_t steps_per_epoch = full_batch ? 1 : std::min(nx, ny) / half;

  std::vector<std::size_t> ix(nx), iy(ny);
  CounterRng rng(config.seed, tag_hash("shuffle"));
  std::size_t t = 0;
  Eigen::MatrixXd batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    shuffle(std::span<std::size_t>(ix), rng);
    shuffle(std::span<std::size_t>(iy), rng);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Eigen::Index bx, by;
      if (full_batch) {
        batch = all;
        bx = static_cast<Eigen::Index>(nx);
      } else {
        bx = by = static_cast<Eigen::Index>(half);
        batch.resize(bx + by, all.cols());
        for (Eigen::Index i = 0; i < bx; ++i) batch.row(i) = xm.row(static_cast<Eigen::Index>(ix[s * half + static_cast<std::size_t>(i)]));
        for (Eigen::Index i = 0; i < by; ++i) batch.row(bx + i) = ym.row(static_cast<Eigen::Index>(iy[s * half + static_cast<std::size_t>(i)]));
      }
      const MlpParams g = gradient_stacked(params, batch, bx, nullptr);
      ++t;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto step = [&](auto& theta, const auto& grad, auto& mm, auto& vv) {
          // Ascent on L is descent on -L.
          mm = config.beta1 * mm - (1.0 - config.beta1) * grad;
          vv = config.beta2 * vv + (1.0 - config.beta2) * grad.cwiseAbs2();
          theta.array() -= config.learning_rate * (mm.array() / c1) / ((vv.array() / c2).sqrt() + config.adam_eps);
        };
        step(params.layers[l].weight, g.layers[l].weight, m.layers[l].weight, v.layers[l].weight);
        step(params.layers[l].bias, g.layers[l].bias, m.layers[l].bias, v.layers[l].bias);
      }
      if (config.weight_clip) apply_weight_clip(params, *config.weight_clip);
    }
    const ForwardPass fp = forward(params, all);
    const double loss = loss_from_logits(fp.logit, static_cast<Eigen::Index>(nx));
    if (!std::isfinite(loss) || !params.all_finite()) {
      throw TrainingDiverged(epoch, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < nx; ++i) wrong += fp.logit[static_cast<Eigen::Index>(i)] < 0.0;
    for (std::size_t i = nx; i < nx + ny; ++i) wrong += fp.logit[static_cast<Eigen::Index>(i)] >= 0.0;
    result.trace.loss.push_back(loss);
    result.trace.error.push_back(static_cast<double>(wrong) / static_cast<double>(nx + ny));
  }
  return result;
}

void apply_weight_clip(MlpParams& params, double bound) {
  require(bound > 0.0, "weight clip bound must be positive");
  const double c = std::pow(bound, 1.0 / static_cast<double>(params.layers.size()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& w = params.layers[l].weight;
    const bool output = l + 1 == params.layers.size();
    const double row_max = output ? c / 2.0 : c / std::sqrt(static_cast<double>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const double n = w.row(r).norm();
      if (n > row_max) w.row(r) *= row_max / n;
    }
  }
}

double lipschitz_bound(const MlpParams& params) {
  double b = 1.0;
  for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) b *= params.layers[l].weight.norm();
  const auto& out = params.layers.back().weight;
  return b * (out.row(0) - out.row(1)).norm();
}

double lipschitz_estimate(const MlpParams& params, std::size_t pairs, double radius, std::uint64_t seed) {
  CounterRng rng(seed, tag_hash("lipschitz"));
  const auto d = static_cast<Eigen::Index>(params.spec.input_dim);
  Samples a(static_cast<Eigen::Index>(pairs), d), b(static_cast<Eigen::Index>(pairs), d);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      a(i, j) = radius * (2.0 * rng.uniform() - 1.0);
      b(i, j) = radius * (2.0 * rng.uniform() - 1.0);
    }
  }
  const Eigen::VectorXd fa = logits(params, a), fb = logits(params, b);
  double best = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dist = (a.row(i) - b.row(i)).norm();
    if (dist > 0.0) best = std::max(best, std::abs(fa[i] - fb[i]) / dist);
  }
  return best;
}

void save_blocks(const std::vector<DenseLayer>& blocks, std::ostream& out) {
  out.write(kMagic, sizeof kMagic);
  binio::put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& l : blocks) {
    require(l.bias.size() == l.weight.rows(), "block bias length must equal its row count");
    binio::put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) binio::put_f64(out, l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) binio::put_f64(out, l.bias[r]);
  }
  if (!out) fail(ErrorCode::kIo, "failed writing parameter blocks");
}

std::vector<DenseLayer> load_blocks(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic)) fail(ErrorCode::kTruncated, "parameter file truncated in header");
  if (!std::equal(magic, magic + 8, kMagic)) fail(ErrorCode::kMagicMismatch, "not a parameter block file");
  const std::uint32_t count = binio::get_u32(in);
  std::vector<DenseLayer> blocks;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t rows = binio::get_u32(in), cols = binio::get_u32(in);
    if (rows == 0 || cols == 0) fail(ErrorCode::kFormat, "block with zero size");
    DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = binio::get_f64(in);
    }
    for (std::uint32_t r = 0; r < rows; ++r) l.bias[r] = binio::get_f64(in);
    if (!l.weight.allFinite() || !l.bias.allFinite()) fail(ErrorCode::kFormat, "parameters are not finite");
    blocks.push_back(std::move(l));
  }
  return blocks;
}

void save_mlp(const MlpParams& params, std::ostream& out) { save_blocks(params.layers, out); }

MlpParams load_mlp(std::istream& in) {
  auto blocks = load_blocks(in);
  if (blocks.size() < 2) fail(ErrorCode::kFormat, "network must have at least one hidden layer");
  MlpParams p;
  p.spec.hidden_widths.clear();
  p.spec.input_dim = static_cast<std::size_t>(blocks.front().weight.cols());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto rows = static_cast<std::size_t>(blocks[k].weight.rows());
    if (k > 0 && blocks[k].weight.cols() != blocks[k - 1].weight.rows()) {
      fail(ErrorCode::kFormat, "layer shapes are inconsistent");
    }
    if (k + 1 < blocks.size()) p.spec.hidden_widths.push_back(rows);
    else if (rows != 2) fail(ErrorCode::kFormat, "output layer must have 2 rows");
  }
  p.layers = std::move(blocks);
  return p;
}

void save_mlp(const MlpParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  save_mlp(params, out);
}

MlpParams load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return load_mlp(in);
}

}  // namespace c2st
