#include "factcheck/lora.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace factcheck::lora {

namespace {

void check_dims(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("dimension mismatch: " + what);
}

Vector apply_activation(Activation act, const Vector& z) {
  switch (act) {
    case Activation::Identity: return z;
    case Activation::Tanh: return z.array().tanh();
    case Activation::Relu: return z.cwiseMax(0.0);
  }
  return z;
}

Vector activation_grad(Activation act, const Vector& z, const Vector& a) {
  switch (act) {
    case Activation::Identity: return Vector::Ones(z.size());
    case Activation::Tanh: return 1.0 - a.array().square();
    case Activation::Relu: return (z.array() > 0.0).cast<double>();
  }
  return Vector::Ones(z.size());
}

/// Inverted-dropout mask: 0 with probability p, else 1/(1-p).
Vector dropout_mask(int n, double p, std::mt19937_64& rng) {
  Vector mask = Vector::Ones(n);
  if (p <= 0.0) return mask;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < n; ++i) mask(i) = unit(rng) < p ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

Vector DenseLayer::forward(const Vector& x) const {
  check_dims(x.size() == W.cols(), "layer input");
  Vector z = W * x;
  if (b) z += *b;
  return z;
}

LoraAdapter LoraAdapter::init(int d_out, int d_in, int r, double alpha, double dropout_p,
                              std::mt19937_64& rng) {
  if (r < 1 || r > std::min(d_in, d_out))
    throw std::runtime_error("adapter rank " + std::to_string(r) + " out of range for " +
                             std::to_string(d_out) + "x" + std::to_string(d_in));
  if (alpha <= 0.0) throw std::runtime_error("adapter alpha must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw std::runtime_error("adapter dropout must be in [0,1)");
  LoraAdapter a;
  double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  a.A = Matrix::NullaryExpr(r, d_in, [&] { return uniform(rng); });
  a.B = Matrix::Zero(d_out, r);
  a.alpha = alpha;
  a.dropout_p = dropout_p;
  return a;
}

Vector adapter_forward(const DenseLayer& layer, const LoraAdapter& adapter, const Vector& x,
                       bool training, std::mt19937_64* rng) {
  check_dims(adapter.A.cols() == layer.W.cols() && adapter.B.rows() == layer.W.rows() &&
                 adapter.A.rows() == adapter.B.cols(),
             "adapter factors vs layer");
  check_dims(x.size() == layer.W.cols(), "adapter input");
  Vector z = layer.forward(x);
  if (training && adapter.dropout_p > 0.0) {
    if (!rng) throw std::runtime_error("training-mode adapter_forward needs an rng");
    Vector dropped = dropout_mask(static_cast<int>(x.size()), adapter.dropout_p, *rng)
                         .cwiseProduct(x);
    z += adapter.scale() * (adapter.B * (adapter.A * dropped));
  } else {
    z += adapter.scale() * (adapter.B * (adapter.A * x));
  }
  return z;
}

DenseLayer merge(const DenseLayer& layer, const LoraAdapter& adapter) {
  check_dims(adapter.A.cols() == layer.W.cols() && adapter.B.rows() == layer.W.rows(),
             "merge factors vs layer");
  DenseLayer merged = layer;
  merged.W = layer.W + adapter.scale() * adapter.B * adapter.A;
  return merged;
}

Vector ToyModel::forward(const Vector& x) const {
  Vector h = x;
  for (const ModelLayer& layer : layers) {
    Vector z = layer.adapter ? adapter_forward(layer.base, *layer.adapter, h, false)
                             : layer.base.forward(h);
    h = apply_activation(layer.activation, z);
  }
  return h;
}

ToyModel make_toy_model(const std::vector<int>& dims, const std::vector<Activation>& activations,
                        unsigned long seed) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1)
    throw std::runtime_error("make_toy_model: need n+1 dims for n activations");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ToyModel model;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    ModelLayer layer;
    double std_dev = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    layer.base.W = Matrix::NullaryExpr(dims[i + 1], dims[i], [&] { return gauss(rng) * std_dev; });
    layer.base.b = Vector::Zero(dims[i + 1]);
    layer.base.frozen = true;
    layer.activation = activations[i];
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void attach_adapters(ToyModel& model, int rank, double alpha, double dropout_p,
                     unsigned long seed) {
  std::mt19937_64 rng(seed);
  for (ModelLayer& layer : model.layers)
    layer.adapter = LoraAdapter::init(layer.base.out_dim(), layer.base.in_dim(), rank, alpha,
                                      dropout_p, rng);
}

double loss_sq(const std::vector<Vector>& predictions, const std::vector<Vector>& targets) {
  check_dims(predictions.size() == targets.size(), "loss batch lengths");
  double loss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    check_dims(predictions[i].size() == targets[i].size(), "loss vector dims");
    loss += (targets[i] - predictions[i]).squaredNorm();
  }
  return loss;
}

double sample_loss(const Vector& prediction, const Vector& target, LossKind kind) {
  check_dims(prediction.size() == target.size(), "loss vector dims");
  if (kind == LossKind::SquaredError) return (target - prediction).squaredNorm();
  // Softmax cross-entropy, stabilized by the max trick.
  Vector shifted = prediction.array() - prediction.maxCoeff();
  double log_z = std::log(shifted.array().exp().sum());
  return -(target.array() * (shifted.array() - log_z)).sum();
}

double dataset_loss(const ToyModel& model, const std::vector<Vector>& xs,
                    const std::vector<Vector>& ys, LossKind kind) {
  check_dims(xs.size() == ys.size(), "dataset lengths");
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    loss += sample_loss(model.forward(xs[i]), ys[i], kind);
  return loss;
}

BatchResult forward_backward(const ToyModel& model, const std::vector<Vector>& xs,
                             const std::vector<Vector>& ys, bool training, std::mt19937_64* rng,
                             LossKind kind) {
  check_dims(xs.size() == ys.size(), "batch lengths");
  if (training && !rng) throw std::runtime_error("training-mode forward_backward needs an rng");

  BatchResult result;
  result.grads.layers.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const ModelLayer& layer = model.layers[l];
    LayerGrads& g = result.grads.layers[l];
    if (layer.adapter) {
      g.dA = Matrix::Zero(layer.adapter->A.rows(), layer.adapter->A.cols());
      g.dB = Matrix::Zero(layer.adapter->B.rows(), layer.adapter->B.cols());
    }
    if (!layer.base.frozen) {
      g.dW = Matrix::Zero(layer.base.W.rows(), layer.base.W.cols());
      if (layer.base.b) g.db = Vector::Zero(layer.base.b->size());
    }
  }

  struct LayerCache {
    Vector input;    // x fed to the layer
    Vector mask;     // dropout mask on the adapter path (ones in eval mode)
    Vector dropped;  // mask .* input
    Vector pre;      // pre-activation z
    Vector out;      // activation(z)
  };

  // Accumulate in sample-index order so results are bit-deterministic.
  for (std::size_t s = 0; s < xs.size(); ++s) {
    std::vector<LayerCache> caches(model.layers.size());
    Vector h = xs[s];
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const ModelLayer& layer = model.layers[l];
      LayerCache& c = caches[l];
      c.input = h;
      Vector z = layer.base.forward(h);
      if (layer.adapter) {
        c.mask = (training && layer.adapter->dropout_p > 0.0)
                     ? dropout_mask(static_cast<int>(h.size()), layer.adapter->dropout_p, *rng)
                     : Vector::Ones(h.size());
        c.dropped = c.mask.cwiseProduct(h);
        z += layer.adapter->scale() * (layer.adapter->B * (layer.adapter->A * c.dropped));
      }
      c.pre = z;
      c.out = apply_activation(layer.activation, z);
      h = c.out;
    }

    result.loss += sample_loss(h, ys[s], kind);
    Vector grad_out;
    if (kind == LossKind::SquaredError) {
      grad_out = 2.0 * (h - ys[s]);  // d/df of (y - f)^2
    } else {
      Vector shifted = h.array() - h.maxCoeff();
      Vector softmax = shifted.array().exp();
      softmax /= softmax.sum();
      grad_out = softmax - ys[s];
    }

    for (std::size_t li = model.layers.size(); li-- > 0;) {
      const ModelLayer& layer = model.layers[li];
      const LayerCache& c = caches[li];
      LayerGrads& g = result.grads.layers[li];

      Vector dz = grad_out.cwiseProduct(activation_grad(layer.activation, c.pre, c.out));
      Vector dx = layer.base.W.transpose() * dz;
      if (layer.adapter) {
        const LoraAdapter& a = *layer.adapter;
        Vector u = a.A * c.dropped;                 // r
        Vector bt_dz = a.B.transpose() * dz;        // r
        g.dB.noalias() += a.scale() * dz * u.transpose();
        g.dA.noalias() += a.scale() * bt_dz * c.dropped.transpose();
        dx += c.mask.cwiseProduct(a.scale() * (a.A.transpose() * bt_dz));
      }
      if (!layer.base.frozen) {
        g.dW.noalias() += dz * c.input.transpose();
        if (layer.base.b) g.db += dz;
      }
      grad_out = std::move(dx);
    }
  }
  return result;
}

double lr_at(int t, int total_steps, double lr0) {
  return lr0 * (1.0 - static_cast<double>(t - 1) / static_cast<double>(total_steps));
}

Vector gather_params(const ToyModel& model) {
  std::vector<double> flat;
  for (const ModelLayer& layer : model.layers) {
    if (layer.adapter) {
      flat.insert(flat.end(), layer.adapter->A.data(), layer.adapter->A.data() + layer.adapter->A.size());
      flat.insert(flat.end(), layer.adapter->B.data(), layer.adapter->B.data() + layer.adapter->B.size());
    }
    if (!layer.base.frozen) {
      flat.insert(flat.end(), layer.base.W.data(), layer.base.W.data() + layer.base.W.size());
      if (layer.base.b)
        flat.insert(flat.end(), layer.base.b->data(), layer.base.b->data() + layer.base.b->size());
    }
  }
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void scatter_params(ToyModel& model, const Vector& flat) {
  Eigen::Index pos = 0;
  auto take = [&](double* dst, Eigen::Index n) {
    check_dims(pos + n <= flat.size(), "scatter_params length");
    std::copy(flat.data() + pos, flat.data() + pos + n, dst);
    pos += n;
  };
  for (ModelLayer& layer : model.layers) {
    if (layer.adapter) {
      take(layer.adapter->A.data(), layer.adapter->A.size());
      take(layer.adapter->B.data(), layer.adapter->B.size());
    }
    if (!layer.base.frozen) {
      take(layer.base.W.data(), layer.base.W.size());
      if (layer.base.b) take(layer.base.b->data(), layer.base.b->size());
    }
  }
  check_dims(pos == flat.size(), "scatter_params length");
}

Vector flatten_grads(const ToyModel& model, const Gradients& grads) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const ModelLayer& layer = model.layers[l];
    const LayerGrads& g = grads.layers[l];
    if (layer.adapter) {
      flat.insert(flat.end(), g.dA.data(), g.dA.data() + g.dA.size());
      flat.insert(flat.end(), g.dB.data(), g.dB.data() + g.dB.size());
    }
    if (!layer.base.frozen) {
      flat.insert(flat.end(), g.dW.data(), g.dW.data() + g.dW.size());
      if (layer.base.b) flat.insert(flat.end(), g.db.data(), g.db.data() + g.db.size());
    }
  }
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void adam_step(Vector& params, const Vector& grads, AdamState& state, int t, double lr,
               const TrainConfig& config) {
  check_dims(params.size() == grads.size(), "adam params vs grads");
  if (t < 1) throw std::runtime_error("adam step index must be >= 1");
  if (state.m.size() == 0) {
    state.m = Vector::Zero(params.size());
    state.v = Vector::Zero(params.size());
  }
  check_dims(state.m.size() == params.size(), "adam state");
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  state.m = b1 * state.m + (1.0 - b1) * grads;
  state.v = b2 * state.v.array() + (1.0 - b2) * grads.array().square();
  Vector m_hat = state.m / (1.0 - std::pow(b1, t));
  Vector v_hat = state.v / (1.0 - std::pow(b2, t));
  params.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + config.adam_eps);
  state.steps_taken = t;
}

ParamCounts param_count(const ToyModel& model) {
  ParamCounts counts;
  for (const ModelLayer& layer : model.layers) {
    counts.base += layer.base.W.size();
    if (layer.base.b) counts.base += layer.base.b->size();
    if (layer.adapter) counts.trainable_lora += layer.adapter->trainable_params();
  }
  return counts;
}

TrainLog train(ToyModel& model, const std::vector<Vector>& xs, const std::vector<Vector>& ys,
               const TrainConfig& config) {
  if (xs.empty()) throw std::runtime_error("train: empty dataset");
  check_dims(xs.size() == ys.size(), "train dataset lengths");
  if (config.epochs < 1 || config.batch_size < 1 || config.lr0 <= 0.0)
    throw std::runtime_error("train: bad config");

  const long n = static_cast<long>(xs.size());
  const long batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = static_cast<int>(config.epochs * batches_per_epoch);

  std::mt19937_64 rng(config.seed);
  AdamState state;
  TrainLog log;
  int t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (long start = 0; start < n; start += config.batch_size) {
      long end = std::min(n, start + config.batch_size);
      std::vector<Vector> bx(xs.begin() + start, xs.begin() + end);
      std::vector<Vector> by(ys.begin() + start, ys.begin() + end);
      BatchResult batch = forward_backward(model, bx, by, /*training=*/true, &rng, config.loss);
      epoch_loss += batch.loss;
      ++t;
      double lr = lr_at(t, total_steps, config.lr0);
      log.lr_applied.push_back(lr);
      Vector params = gather_params(model);
      Vector grads = flatten_grads(model, batch.grads);
      adam_step(params, grads, state, t, lr, config);
      scatter_params(model, params);
    }
    log.epoch_loss.push_back(epoch_loss);
  }
  log.steps = t;
  return log;
}

GradCheckReport gradient_check(ToyModel& model, const std::vector<Vector>& xs,
                               const std::vector<Vector>& ys, double h) {
  BatchResult base = forward_backward(model, xs, ys, /*training=*/false);
  Vector analytic = flatten_grads(model, base.grads);
  Vector theta = gather_params(model);

  GradCheckReport report;
  report.params_checked = static_cast<std::size_t>(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector probe = theta;
    probe(i) = theta(i) + h;
    scatter_params(model, probe);
    double loss_plus = dataset_loss(model, xs, ys);
    probe(i) = theta(i) - h;
    scatter_params(model, probe);
    double loss_minus = dataset_loss(model, xs, ys);
    double numeric = (loss_plus - loss_minus) / (2.0 * h);
    double denom = std::max(std::abs(analytic(i)) + std::abs(numeric), 1e-8);
    double rel = std::abs(analytic(i) - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {static_cast<std::size_t>(i), analytic(i), numeric, rel};
    }
  }
  scatter_params(model, theta);
  return report;
}

SyntheticSet make_synthetic_classification(int n, int features, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector w = Vector::NullaryExpr(features, [&] { return gauss(rng); });
  w.normalize();

  SyntheticSet set;
  set.xs.reserve(n);
  set.ys.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vector x = Vector::NullaryExpr(features, [&] { return gauss(rng); });
    double margin = w.dot(x);
    // Push points away from the separating plane so the classes are cleanly
    // linearly separable.
    if (std::abs(margin) < 0.5) {
      double sign = margin >= 0.0 ? 1.0 : -1.0;
      x += sign * (0.5 - std::abs(margin)) * w;
      margin = w.dot(x);
    }
    Vector y = Vector::Zero(2);
    y(margin > 0.0 ? 0 : 1) = 1.0;
    set.xs.push_back(std::move(x));
    set.ys.push_back(std::move(y));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw std::runtime_error("checkpoint: unknown activation \"" + name + "\"");
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c))) throw std::runtime_error("checkpoint: truncated matrix");
  return m;
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.precision(17);
  out << "factcheck-lora-checkpoint 1\n";
  out << "layers " << model.layers.size() << '\n';
  for (const ModelLayer& layer : model.layers) {
    out << "dims " << layer.base.out_dim() << ' ' << layer.base.in_dim() << '\n';
    out << "frozen " << (layer.base.frozen ? 1 : 0) << '\n';
    out << "activation " << activation_name(layer.activation) << '\n';
    write_matrix(out, layer.base.W);
    out << "bias " << (layer.base.b ? 1 : 0) << '\n';
    if (layer.base.b) write_matrix(out, *layer.base.b);
    out << "adapter " << (layer.adapter ? 1 : 0) << '\n';
    if (layer.adapter) {
      out << layer.adapter->rank() << ' ' << layer.adapter->alpha << ' '
          << layer.adapter->dropout_p << '\n';
      write_matrix(out, layer.adapter->A);
      write_matrix(out, layer.adapter->B);
    }
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ToyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "factcheck-lora-checkpoint" || version != 1)
    throw std::runtime_error("not a recognized checkpoint: " + path);
  std::string token;
  std::size_t n_layers = 0;
  in >> token >> n_layers;
  ToyModel model;
  for (std::size_t l = 0; l < n_layers; ++l) {
    ModelLayer layer;
    Eigen::Index d_out, d_in;
    int flag;
    std::string name;
    in >> token >> d_out >> d_in;
    in >> token >> flag;
    layer.base.frozen = flag != 0;
    in >> token >> name;
    layer.activation = activation_from_name(name);
    layer.base.W = read_matrix(in, d_out, d_in);
    in >> token >> flag;
    if (flag) layer.base.b = read_matrix(in, d_out, 1).col(0);
    in >> token >> flag;
    if (flag) {
      LoraAdapter a;
      int r;
      in >> r >> a.alpha >> a.dropout_p;
      a.A = read_matrix(in, r, d_in);
      a.B = read_matrix(in, d_out, r);
      layer.adapter = std::move(a);
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace factcheck::lora
