#include "epibench/uncertainty.hpp"

#include <cmath>

#include "epibench/errors.hpp"

namespace epibench {

namespace {

constexpr double kNegativeMITolerance = 1e-9;

void check_rows(const MemberProbs& mp) {
  if (mp.rows < 1 || mp.cols < 1) throw InputError("member probs: need at least one row");
  for (int i = 0; i < mp.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < mp.cols; ++j) {
      const double p = mp(i, j);
      if (!(p >= 0.0)) throw InputError("member probs: negative or NaN entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InputError("member probs: row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

Vector predictive_mean(const MemberProbs& mp) {
  check_rows(mp);
  Vector mean(mp.cols, 0.0);
  for (int i = 0; i < mp.rows; ++i) {
    const double* r = mp.row(i);
    for (int j = 0; j < mp.cols; ++j) mean[j] += r[j];
  }
  for (double& v : mean) v /= mp.rows;
  return mean;
}

double entropy(const Vector& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

UncertaintyTriple mutual_information(const MemberProbs& mp) {
  check_rows(mp);
  UncertaintyTriple t;
  t.total_entropy = entropy(predictive_mean(mp));
  double sum_h = 0.0;
  Vector row(mp.cols);
  for (int i = 0; i < mp.rows; ++i) {
    std::copy(mp.row(i), mp.row(i) + mp.cols, row.begin());
    sum_h += entropy(row);
  }
  t.expected_entropy = sum_h / mp.rows;
  double mi = t.total_entropy - t.expected_entropy;
  if (mi < 0.0) {
    if (mi < -kNegativeMITolerance) {
      throw InputError("mutual_information: negative beyond tolerance (" + std::to_string(mi) + ")");
    }
    mi = 0.0;
  }
  t.mutual_information = mi;
  return t;
}

VarianceDecomposition variance_decomposition(const Vector& member_means,
                                             const Vector& member_vars) {
  if (member_means.empty() || member_means.size() != member_vars.size()) {
    throw InputError("variance_decomposition: means and vars must have equal, non-zero length");
  }
  for (double v : member_vars) {
    if (v < 0.0) throw InputError("variance_decomposition: negative member variance");
  }
  const std::size_t n = member_means.size();
  VarianceDecomposition d;
  double mean_of_means = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.aleatoric += member_vars[i];
    mean_of_means += member_means[i];
  }
  d.aleatoric /= n;
  mean_of_means /= n;
  for (double m : member_means) {
    const double dev = m - mean_of_means;
    d.epistemic += dev * dev;
  }
  d.epistemic /= n;  // population variance of the means
  d.total = d.aleatoric + d.epistemic;
  return d;
}

UncertaintyTriple dirichlet_mutual_information(const Vector& alpha) {
  if (alpha.empty()) throw InputError("dirichlet MI: empty alpha");
  double s = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw InputError("dirichlet MI: alpha entries must be positive");
    s += a;
  }
  UncertaintyTriple t;
  Vector mean(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j) mean[j] = alpha[j] / s;
  t.total_entropy = entropy(mean);
  const double psi_s1 = digamma(s + 1.0);
  double expected = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    expected += mean[j] * (psi_s1 - digamma(alpha[j] + 1.0));
  }
  t.expected_entropy = expected;
  double mi = t.total_entropy - t.expected_entropy;
  if (mi < 0.0) {
    if (mi < -kNegativeMITolerance) {
      throw InputError("dirichlet MI: negative beyond tolerance");
    }
    mi = 0.0;
  }
  t.mutual_information = mi;
  return t;
}

double digamma(double x) {
  if (!(x > 0.0)) throw InputError("digamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion; with x >= 10 the truncation error is below 1e-14.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return result;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw InputError("trigamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 -
                           inv2 * (1.0 / 30.0)))));
  return result;
}

}  // namespace epibench
