#include "epibench/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "epibench/errors.hpp"

namespace epibench {

void EvalBatch::validate() const {
  if (probs.rows < 1) throw InputError("eval batch: empty");
  if (static_cast<int>(labels.size()) != probs.rows) {
    throw InputError("eval batch: label count does not match prediction rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= probs.cols) throw InputError("eval batch: label out of class range");
  }
}

int argmax_row(const double* row, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double accuracy(const EvalBatch& batch) {
  batch.validate();
  int correct = 0;
  for (int i = 0; i < batch.probs.rows; ++i) {
    if (argmax_row(batch.probs.row(i), batch.probs.cols) == batch.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / batch.probs.rows;
}

double brier(const EvalBatch& batch) {
  batch.validate();
  double sum = 0.0;
  for (int i = 0; i < batch.probs.rows; ++i) {
    const double* r = batch.probs.row(i);
    for (int j = 0; j < batch.probs.cols; ++j) {
      const double target = j == batch.labels[i] ? 1.0 : 0.0;
      sum += (r[j] - target) * (r[j] - target);
    }
  }
  return sum / batch.probs.rows;
}

double sce(const EvalBatch& batch, int n_bins) {
  batch.validate();
  if (n_bins < 1) throw InputError("sce: n_bins must be >= 1");
  const int n = batch.probs.rows;
  const int c = batch.probs.cols;
  double total = 0.0;
  std::vector<int> count(n_bins);
  std::vector<double> conf_sum(n_bins), acc_sum(n_bins);
  for (int cls = 0; cls < c; ++cls) {
    std::fill(count.begin(), count.end(), 0);
    std::fill(conf_sum.begin(), conf_sum.end(), 0.0);
    std::fill(acc_sum.begin(), acc_sum.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double p = batch.probs(i, cls);
      const int b = std::min(static_cast<int>(p * n_bins), n_bins - 1);
      ++count[b];
      conf_sum[b] += p;
      acc_sum[b] += batch.labels[i] == cls ? 1.0 : 0.0;
    }
    for (int b = 0; b < n_bins; ++b) {
      if (count[b] == 0) continue;
      total += (static_cast<double>(count[b]) / n) *
               std::abs(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    }
  }
  return total / c;
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size() || scores.empty()) {
    throw InputError("auroc: scores and flags must have equal, non-zero length");
  }
  std::size_t n_pos = 0;
  for (bool b : positives) n_pos += b ? 1 : 0;
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw InputError("auroc: need at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, accumulate the positive rank sum.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) {
      if (positives[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * n_neg);
}

}  // namespace epibench
