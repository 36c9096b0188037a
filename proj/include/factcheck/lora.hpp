#pragma once

#include <Eigen/Core>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace factcheck::lora {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DenseLayer {
  Matrix W;                 // d_out x d_in
  std::optional<Vector> b;  // d_out
  bool frozen = true;

  int out_dim() const { return static_cast<int>(W.rows()); }
  int in_dim() const { return static_cast<int>(W.cols()); }
  Vector forward(const Vector& x) const;
};

/// Rank-r factor pair. The adapted forward adds s * B * A * drop(x) to the
/// base layer output, s = alpha / r.
struct LoraAdapter {
  Matrix A;  // r x d_in
  Matrix B;  // d_out x r
  double alpha = 1.0;
  double dropout_p = 0.0;

  int rank() const { return static_cast<int>(A.rows()); }
  double scale() const { return alpha / rank(); }
  long trainable_params() const { return static_cast<long>(A.size() + B.size()); }

  /// A ~ uniform(-1/sqrt(d_in), 1/sqrt(d_in)), B = 0, so tuning starts
  /// exactly at the base function.
  static LoraAdapter init(int d_out, int d_in, int r, double alpha, double dropout_p,
                          std::mt19937_64& rng);
};

/// Eval-mode adapted forward: W x + b + s B A x. In training mode the adapter
/// input passes through inverted dropout drawn from `rng`; the base path
/// never does.
Vector adapter_forward(const DenseLayer& layer, const LoraAdapter& adapter, const Vector& x,
                       bool training, std::mt19937_64* rng = nullptr);

/// Fold the adapter into the base weights: W' = W + s B A, bias unchanged.
DenseLayer merge(const DenseLayer& layer, const LoraAdapter& adapter);

enum class Activation { Identity, Tanh, Relu };

struct ModelLayer {
  DenseLayer base;
  std::optional<LoraAdapter> adapter;
  Activation activation = Activation::Identity;
};

struct ToyModel {
  std::vector<ModelLayer> layers;

  int input_dim() const { return layers.front().base.in_dim(); }
  int output_dim() const { return layers.back().base.out_dim(); }

  /// Deterministic eval-mode forward.
  Vector forward(const Vector& x) const;
};

/// Frozen random model with the given layer widths; dims has one more entry
/// than activations.
ToyModel make_toy_model(const std::vector<int>& dims, const std::vector<Activation>& activations,
                        unsigned long seed);
void attach_adapters(ToyModel& model, int rank, double alpha, double dropout_p, unsigned long seed);

/// Sum over samples and components of (y - f(x))^2.
double loss_sq(const std::vector<Vector>& predictions, const std::vector<Vector>& targets);

/// Training objective. SquaredError is the canonical form; softmax
/// cross-entropy is available behind this flag.
enum class LossKind { SquaredError, SoftmaxCrossEntropy };

double sample_loss(const Vector& prediction, const Vector& target, LossKind kind);

/// Eval-mode dataset loss.
double dataset_loss(const ToyModel& model, const std::vector<Vector>& xs,
                    const std::vector<Vector>& ys, LossKind kind = LossKind::SquaredError);

struct LayerGrads {
  Matrix dA, dB;  // empty when no adapter
  Matrix dW;      // empty when frozen
  Vector db;      // empty when frozen or no bias
};

struct Gradients {
  std::vector<LayerGrads> layers;
};

struct BatchResult {
  double loss = 0.0;
  Gradients grads;
};

/// Exact reverse-mode gradients of loss_sq over the batch, accumulated in
/// sample-index order. Frozen parameters receive no gradient entries.
/// `rng` drives dropout masks and is required when training.
BatchResult forward_backward(const ToyModel& model, const std::vector<Vector>& xs,
                             const std::vector<Vector>& ys, bool training,
                             std::mt19937_64* rng = nullptr,
                             LossKind kind = LossKind::SquaredError);

struct TrainConfig {
  int epochs = 3;
  int batch_size = 32;
  double lr0 = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout_p = 0.05;
  unsigned long seed = 42;
  LossKind loss = LossKind::SquaredError;
};

/// Linear decay: lr(t) = lr0 * (1 - (t-1)/T) for t in 1..T; lr(T+1) would be 0.
double lr_at(int t, int total_steps, double lr0);

// Trainable parameters flattened in a fixed order (per layer: A, B, then
// unfrozen W, b). Gather/scatter round-trips exactly.
Vector gather_params(const ToyModel& model);
void scatter_params(ToyModel& model, const Vector& flat);
Vector flatten_grads(const ToyModel& model, const Gradients& grads);

struct AdamState {
  Vector m, v;  // lazily sized on first step
  int steps_taken = 0;
};

/// One Adam update on the flat parameter vector with explicit learning rate.
void adam_step(Vector& params, const Vector& grads, AdamState& state, int t, double lr,
               const TrainConfig& config);

struct ParamCounts {
  long base = 0;
  long trainable_lora = 0;
};

ParamCounts param_count(const ToyModel& model);

struct TrainLog {
  std::vector<double> epoch_loss;  // summed Eq-style loss over each epoch
  std::vector<double> lr_applied;  // per optimizer step
  long steps = 0;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

/// Minibatch training of the adapter (and any unfrozen) parameters with Adam
/// and the linear-to-zero schedule. Deterministic given config.seed.
TrainLog train(ToyModel& model, const std::vector<Vector>& xs, const std::vector<Vector>& ys,
               const TrainConfig& config);

struct GradCheckEntry {
  std::size_t index;
  double analytic, numeric, rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t params_checked = 0;
  GradCheckEntry worst{};
};

/// Central finite differences (step h) against forward_backward in eval mode,
/// over every trainable parameter. The numeric side uses only the forward
/// pass.
GradCheckReport gradient_check(ToyModel& model, const std::vector<Vector>& xs,
                               const std::vector<Vector>& ys, double h = 1e-5);

/// Two-class linearly separable points with one-hot targets.
struct SyntheticSet {
  std::vector<Vector> xs, ys;
};
SyntheticSet make_synthetic_classification(int n, int features, unsigned long seed);

// Text checkpoint: base layers and adapters stored separately.
void save_checkpoint(const ToyModel& model, const std::string& path);
ToyModel load_checkpoint(const std::string& path);

}  // namespace factcheck::lora
