#pragma once

#include <vector>

#include "epibench/linalg.hpp"

namespace epibench {

/// Test-set predictions and labels, plus whatever the AUROC tasks need.
struct EvalBatch {
  Matrix probs;               // N x C predicted distributions
  std::vector<int> labels;    // N true classes

  void validate() const;
};

int argmax_row(const double* row, int n);  // lowest index wins ties

double accuracy(const EvalBatch& batch);

/// Mean over samples of the squared distance to the one-hot label, summed
/// over classes (range [0, 2]).
double brier(const EvalBatch& batch);

/// Static calibration error: equal-width bins over per-class probabilities,
/// class-averaged weighted |accuracy - confidence| gap per bin.
double sce(const EvalBatch& batch, int n_bins);

/// Mann-Whitney AUROC with tie-corrected ranks. Throws unless both a
/// positive and a negative are present.
double auroc(const std::vector<double>& scores, const std::vector<bool>& positives);

}  // namespace epibench
