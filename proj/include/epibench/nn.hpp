#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epibench/linalg.hpp"
#include "epibench/rng.hpp"

namespace epibench {

/// Shape of a dense ReLU network: input -> hidden widths -> n_classes, with a
/// dropout layer after every hidden activation.
struct Architecture {
  int input_dim = 0;
  std::vector<int> hidden_widths;
  int n_classes = 0;
  double dropout_p = 0.3;

  int n_layers() const { return static_cast<int>(hidden_widths.size()) + 1; }
  // Width of the input feeding layer l (layer 0 consumes the raw input).
  int in_width(int l) const { return l == 0 ? input_dim : hidden_widths[l - 1]; }
  int out_width(int l) const {
    return l == static_cast<int>(hidden_widths.size()) ? n_classes : hidden_widths[l];
  }
  std::string label() const;  // e.g. "w128x64"
  void validate() const;      // throws InputError on bad dimensions
};

/// All trainable parameters of one network. weights[l] is (out x in),
/// row-major. Immutable once training finishes; shareable across threads.
struct MLPParams {
  Architecture arch;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::uint64_t rng_seed = 0;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// SGD with classical momentum; weight decay enters the velocity as an L2
/// gradient term: v <- mu*v + g + wd*p, p <- p - lr*v.
struct OptimizerState {
  std::vector<Matrix> vw;
  std::vector<Vector> vb;
  double learning_rate = 0.01;
  double momentum = 0.95;
  double weight_decay = 0.0;
};

enum class ForwardMode { train, eval, mc_sample };

/// Everything the backward pass needs: inputs, pre-activations, the
/// post-ReLU/post-dropout activations, the dropout masks actually drawn
/// (entries are 0 or 1/(1-p)), and the final logits/probabilities.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> act;
  std::vector<Matrix> mask;
  Matrix logits;
  Matrix probs;
};

/// He/fan-in Gaussian weights (std = sqrt(2/fan_in)), zero biases.
/// Bit-identical results for identical (arch, seed).
MLPParams mlp_init(const Architecture& arch, std::uint64_t seed);

/// Batched forward pass; X is (B x input_dim). Returns row-wise softmax
/// probabilities. Dropout is sampled from `rng` in train/mc_sample mode
/// (inverted scaling) and skipped entirely in eval mode. `cache` may be null
/// when no backward pass will follow.
Matrix mlp_forward_batch(const MLPParams& params, const Matrix& x, ForwardMode mode,
                         RngStream* rng, ForwardCache* cache);

/// Single-input convenience wrapper around the batched path.
std::pair<Vector, ForwardCache> mlp_forward(const MLPParams& params, const Vector& x,
                                            ForwardMode mode, RngStream* rng);

/// Exact gradients for the scalar loss whose per-row logit gradient is
/// supplied, honoring the dropout masks recorded in the cache. Sums over the
/// batch rows; scale grad_logits beforehand for a mean reduction.
Gradients mlp_backward(const MLPParams& params, const ForwardCache& cache,
                       const Matrix& grad_logits);

Gradients make_zero_gradients(const MLPParams& params);
OptimizerState make_optimizer_state(const MLPParams& params, double lr, double momentum,
                                    double weight_decay);

void sgd_step(MLPParams& params, const Gradients& grads, OptimizerState& state);

bool params_finite(const MLPParams& params);

/// Little-endian binary checkpoint:
///   magic "EBNN" | u32 version=1 | u32 input_dim | u32 n_hidden |
///   u32 widths[n_hidden] | u32 n_classes | f32 dropout_p | u64 rng_seed |
///   per layer: f32 weight matrix (row-major, out x in), f32 bias vector.
void save_checkpoint(const MLPParams& params, const std::string& path);
MLPParams load_checkpoint(const std::string& path);

}  // namespace epibench
