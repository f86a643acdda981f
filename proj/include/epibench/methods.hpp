#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epibench/data.hpp"
#include "epibench/losses.hpp"
#include "epibench/nn.hpp"
#include "epibench/uncertainty.hpp"

namespace epibench {

enum class MethodKind { mc_dropout, mc_dropout_ls, mc_dropout_cp, deep_ensemble, conflictual_de, edl };

std::string method_kind_name(MethodKind k);
MethodKind method_kind_from_name(const std::string& name);

struct TrainOptions {
  double learning_rate = 0.01;
  double momentum = 0.95;
  double weight_decay = 1e-4;
  int epochs = 150;
  int batch_size = 128;
  int scheduler_patience = 25;  // halve the LR after this many epochs without
                                // a validation-loss improvement
  void validate() const;
};

struct MethodSpec {
  MethodKind kind = MethodKind::deep_ensemble;
  int n_members = 10;     // deep_ensemble only
  int k_order = 1;        // conflictual_de: members = k_order * n_classes
  int n_mc_passes = 20;   // mc_* inference passes
  LossSpec loss;          // hyperparameters; kind is derived from the method
  TrainOptions opt;

  int member_count(int n_classes) const;
  LossSpec member_loss(int member_index, int n_classes) const;
  void validate(int n_classes) const;
};

struct TrainLog {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::vector<double> epoch_train_loss;
};

struct MemberInfo {
  std::uint64_t seed = 0;
  int favored_class = -1;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

/// A trained method, ready for inference. Immutable once built.
struct Predictor {
  MethodKind kind = MethodKind::deep_ensemble;
  Architecture arch;
  std::vector<MLPParams> members;
  std::vector<MemberInfo> info;
  int n_mc_passes = 20;
  std::uint64_t inference_seed = 0;
};

/// Rows of per-member (or per-pass) class distributions; alpha carries the
/// Dirichlet concentrations when the method is evidential.
struct Prediction {
  MemberProbs member_probs;
  std::optional<Vector> alpha;
};

/// Width chain for the model-size axis: each step doubles every hidden
/// width, so consecutive entries are nested under the permutation-invariant
/// submodel order.
std::vector<Architecture> build_submodel_chain(const Architecture& base, int n_steps);

/// Mini-batch SGD with per-epoch seeded shuffling. The best parameters by
/// validation loss are restored at the end (last epoch when no validation
/// set is given). Throws TrainingError on divergence.
MLPParams train_member(const Architecture& arch, const Dataset& train, const Dataset& val,
                       const LossSpec& loss, const TrainOptions& opt, std::uint64_t seed,
                       TrainLog* log = nullptr);

/// Train all members independently with seeds derived from
/// (master_seed, member_index). Members may be trained concurrently; the
/// result is identical to sequential execution.
Predictor train_method(const MethodSpec& spec, const Architecture& arch, const Dataset& train,
                       const Dataset& val, std::uint64_t master_seed, int jobs = 1);

Prediction predict(const Predictor& pred, const Vector& x);

/// Directory checkpoint: one binary file per member plus a plain-text
/// manifest (kind, passes, seeds, favored classes).
void save_predictor(const Predictor& pred, const std::string& dir);
Predictor load_predictor(const std::string& dir);

}  // namespace epibench
