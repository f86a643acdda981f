#include "epibench/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "epibench/errors.hpp"

namespace epibench {

std::string Architecture::label() const {
  std::string s = "w";
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(hidden_widths[i]);
  }
  return s;
}

void Architecture::validate() const {
  if (input_dim < 1) throw InputError("architecture: input_dim must be >= 1");
  if (n_classes < 2) throw InputError("architecture: n_classes must be >= 2");
  if (hidden_widths.empty()) throw InputError("architecture: at least one hidden layer required");
  for (int w : hidden_widths) {
    if (w < 1) throw InputError("architecture: hidden widths must be >= 1");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw InputError("architecture: dropout_p must lie in [0, 1)");
  }
}

MLPParams mlp_init(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  MLPParams p;
  p.arch = arch;
  p.rng_seed = seed;
  RngStream rng(seed);
  for (int l = 0; l < arch.n_layers(); ++l) {
    const int in = arch.in_width(l);
    const int out = arch.out_width(l);
    Matrix w(out, in);
    const double std_dev = std::sqrt(2.0 / in);
    for (double& v : w.data) v = std_dev * rng.gaussian();
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(out, 0.0);
  }
  return p;
}

namespace {

void softmax_rows(Matrix& m) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double mx = r[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < m.cols; ++j) r[j] /= sum;
  }
}

void add_bias_rows(Matrix& m, const Vector& b) {
  for (int i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    for (int j = 0; j < m.cols; ++j) r[j] += b[j];
  }
}

}  // namespace

Matrix mlp_forward_batch(const MLPParams& params, const Matrix& x, ForwardMode mode,
                         RngStream* rng, ForwardCache* cache) {
  const Architecture& arch = params.arch;
  if (x.cols != arch.input_dim) {
    throw InputError("mlp_forward: input has dimension " + std::to_string(x.cols) +
                     ", expected " + std::to_string(arch.input_dim));
  }
  const bool stochastic = (mode != ForwardMode::eval) && arch.dropout_p > 0.0;
  if (stochastic && rng == nullptr) {
    throw InputError("mlp_forward: train/mc_sample mode with dropout needs an rng stream");
  }
  const int n_hidden = static_cast<int>(arch.hidden_widths.size());
  if (cache) {
    cache->input = x;
    cache->pre.assign(n_hidden, Matrix());
    cache->act.assign(n_hidden, Matrix());
    cache->mask.assign(n_hidden, Matrix());
  }

  Matrix cur = x;
  const double keep = 1.0 - arch.dropout_p;
  for (int l = 0; l < n_hidden; ++l) {
    Matrix z;
    matmul_nt(cur, params.weights[l], z);
    add_bias_rows(z, params.biases[l]);
    if (cache) cache->pre[l] = z;

    // ReLU, then inverted dropout on the activation.
    Matrix a = std::move(z);
    for (double& v : a.data) v = v > 0.0 ? v : 0.0;
    if (stochastic) {
      Matrix mask(a.rows, a.cols);
      const double scale = 1.0 / keep;
      for (std::size_t i = 0; i < mask.data.size(); ++i) {
        mask.data[i] = rng->uniform() < arch.dropout_p ? 0.0 : scale;
        a.data[i] *= mask.data[i];
      }
      if (cache) cache->mask[l] = std::move(mask);
    } else if (cache) {
      cache->mask[l] = Matrix(a.rows, a.cols, 1.0);
    }
    if (cache) cache->act[l] = a;
    cur = std::move(a);
  }

  Matrix logits;
  matmul_nt(cur, params.weights[n_hidden], logits);
  add_bias_rows(logits, params.biases[n_hidden]);
  if (cache) cache->logits = logits;

  Matrix probs = std::move(logits);
  softmax_rows(probs);
  if (cache) cache->probs = probs;
  return probs;
}

std::pair<Vector, ForwardCache> mlp_forward(const MLPParams& params, const Vector& x,
                                            ForwardMode mode, RngStream* rng) {
  Matrix xm(1, static_cast<int>(x.size()));
  std::copy(x.begin(), x.end(), xm.data.begin());
  ForwardCache cache;
  Matrix probs = mlp_forward_batch(params, xm, mode, rng, &cache);
  Vector out(probs.data.begin(), probs.data.end());
  return {std::move(out), std::move(cache)};
}

Gradients make_zero_gradients(const MLPParams& params) {
  Gradients g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
    g.biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return g;
}

Gradients mlp_backward(const MLPParams& params, const ForwardCache& cache,
                       const Matrix& grad_logits) {
  const int n_hidden = static_cast<int>(params.arch.hidden_widths.size());
  if (grad_logits.rows != cache.input.rows || grad_logits.cols != params.arch.n_classes) {
    throw InputError("mlp_backward: grad_logits shape does not match the forward cache");
  }
  Gradients g = make_zero_gradients(params);

  // Output layer.
  const Matrix& last_act = n_hidden > 0 ? cache.act[n_hidden - 1] : cache.input;
  matmul_tn(grad_logits, last_act, g.weights[n_hidden]);
  for (int i = 0; i < grad_logits.rows; ++i) {
    const double* r = grad_logits.row(i);
    for (int j = 0; j < grad_logits.cols; ++j) g.biases[n_hidden][j] += r[j];
  }

  Matrix delta;
  matmul_nn(grad_logits, params.weights[n_hidden], delta);  // (B x last hidden)

  for (int l = n_hidden - 1; l >= 0; --l) {
    // Through dropout and ReLU: act = mask .* relu(pre).
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
      const double deriv = cache.pre[l].data[i] > 0.0 ? cache.mask[l].data[i] : 0.0;
      delta.data[i] *= deriv;
    }
    const Matrix& below = l > 0 ? cache.act[l - 1] : cache.input;
    matmul_tn(delta, below, g.weights[l]);
    for (int i = 0; i < delta.rows; ++i) {
      const double* r = delta.row(i);
      for (int j = 0; j < delta.cols; ++j) g.biases[l][j] += r[j];
    }
    if (l > 0) {
      Matrix next;
      matmul_nn(delta, params.weights[l], next);
      delta = std::move(next);
    }
  }
  return g;
}

OptimizerState make_optimizer_state(const MLPParams& params, double lr, double momentum,
                                    double weight_decay) {
  if (lr <= 0.0) throw InputError("optimizer: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InputError("optimizer: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw InputError("optimizer: weight decay must be non-negative");
  OptimizerState s;
  s.learning_rate = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    s.vw.emplace_back(params.weights[l].rows, params.weights[l].cols);
    s.vb.emplace_back(params.biases[l].size(), 0.0);
  }
  return s;
}

void sgd_step(MLPParams& params, const Gradients& grads, OptimizerState& state) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Matrix& w = params.weights[l];
    Matrix& v = state.vw[l];
    const Matrix& gw = grads.weights[l];
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      v.data[i] = state.momentum * v.data[i] + gw.data[i] + state.weight_decay * w.data[i];
      w.data[i] -= state.learning_rate * v.data[i];
    }
    Vector& b = params.biases[l];
    Vector& vb = state.vb[l];
    const Vector& gb = grads.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = state.momentum * vb[i] + gb[i] + state.weight_decay * b[i];
      b[i] -= state.learning_rate * vb[i];
    }
  }
}

bool params_finite(const MLPParams& params) {
  for (const Matrix& w : params.weights) {
    for (double v : w.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (const Vector& b : params.biases) {
    for (double v : b) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'E', 'B', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  // Byte order is little-endian on every target this builds on; write raw.
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const char* field) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError(std::string("checkpoint: truncated reading ") + field);
  return value;
}

}  // namespace

void save_checkpoint(const MLPParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.input_dim));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.hidden_widths.size()));
  for (int w : params.arch.hidden_widths) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.n_classes));
  write_le<float>(out, static_cast<float>(params.arch.dropout_p));
  write_le<std::uint64_t>(out, params.rng_seed);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (double v : params.weights[l].data) write_le<float>(out, static_cast<float>(v));
    for (double v : params.biases[l]) write_le<float>(out, static_cast<float>(v));
  }
  if (!out) throw FormatError("checkpoint: write to " + path + " failed");
}

MLPParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint: magic mismatch in " + path);
  }
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Architecture arch;
  arch.input_dim = static_cast<int>(read_le<std::uint32_t>(in, "input_dim"));
  const auto n_hidden = read_le<std::uint32_t>(in, "n_hidden");
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    arch.hidden_widths.push_back(static_cast<int>(read_le<std::uint32_t>(in, "hidden width")));
  }
  arch.n_classes = static_cast<int>(read_le<std::uint32_t>(in, "n_classes"));
  arch.dropout_p = read_le<float>(in, "dropout_p");
  arch.validate();

  MLPParams p;
  p.arch = arch;
  p.rng_seed = read_le<std::uint64_t>(in, "rng_seed");
  for (int l = 0; l < arch.n_layers(); ++l) {
    Matrix w(arch.out_width(l), arch.in_width(l));
    for (double& v : w.data) v = read_le<float>(in, "weights");
    p.weights.push_back(std::move(w));
    Vector b(arch.out_width(l));
    for (double& v : b) v = read_le<float>(in, "biases");
    p.biases.push_back(std::move(b));
  }
  return p;
}

}  // namespace epibench
