#pragma once

#include <string>

#include "epibench/linalg.hpp"

namespace epibench {

enum class LossKind { cross_entropy, label_smoothing, confidence_penalty, conflictual, edl };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

/// A training objective plus its hyperparameters. favored_class is only
/// meaningful for the conflictual kind, where each ensemble member carries
/// its own class bias.
struct LossSpec {
  LossKind kind = LossKind::cross_entropy;
  double epsilon_ls = 0.1;
  double beta_cp = 0.1;
  double lambda_conflict = 0.05;
  double lambda_edl = 0.01;
  int favored_class = -1;

  void validate(int n_classes) const;
};

/// Scalar loss together with its exact gradient. For the softmax-based
/// losses the gradient is with respect to the logits; for edl_loss it is
/// with respect to the evidence vector. `clamped` flags that a probability
/// hit the 1e-12 floor before the logarithm.
struct LossResult {
  double value = 0.0;
  Vector grad;
  bool clamped = false;
};

LossResult cross_entropy(const Vector& probs, int y);
LossResult label_smoothing_ce(const Vector& probs, int y, double epsilon);
LossResult confidence_penalty_ce(const Vector& probs, int y, double beta);

/// Per-sample term of the conflictual objective: -(ln p_y + lambda * ln p_c).
/// Summed over a batch this is exactly the class-c ensemble member loss.
LossResult conflictual_loss(const Vector& probs, int y, int favored_class, double lambda);

/// Evidential loss on Dirichlet evidence e >= 0 (alpha = e + 1): the expected
/// squared-error Bayes risk plus lambda * KL(Dir(alpha~) || Dir(1)), where
/// alpha~ replaces the true-class concentration by 1.
LossResult edl_loss(const Vector& evidence, int y, double lambda_edl);

/// Evidence head for the evidential loss: evidence = softplus(logits),
/// gradient chained back to the logits.
LossResult edl_logit_loss(const Vector& logits, int y, double lambda_edl);

Vector softplus(const Vector& z);

/// Dispatch on a LossSpec for the softmax losses (everything except edl,
/// which needs the evidence head instead of probabilities).
LossResult probs_loss(const LossSpec& spec, const Vector& probs, int y);

}  // namespace epibench
