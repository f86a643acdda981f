#pragma once

#include "epibench/linalg.hpp"

namespace epibench {

/// One sample's uncertainty decomposition, in nats. The identity
/// total = expected + mutual_information holds by construction.
struct UncertaintyTriple {
  double total_entropy = 0.0;
  double expected_entropy = 0.0;
  double mutual_information = 0.0;
};

/// Rows are per-member (or per-stochastic-pass) class distributions; the
/// Monte Carlo stand-in for the parameter posterior at one input.
using MemberProbs = Matrix;

/// Column-wise arithmetic mean of the member rows: the posterior predictive.
Vector predictive_mean(const MemberProbs& mp);

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const Vector& p);

/// Epistemic decomposition: total = H(mean of rows), expected = mean of row
/// entropies, MI = total - expected. Tiny negative MI from cancellation
/// (within 1e-9) is clamped to zero; anything more negative is an error.
UncertaintyTriple mutual_information(const MemberProbs& mp);

/// Regression analogue: mixture variance split into mean member variance
/// (aleatoric) and variance of member means (epistemic, population form).
struct VarianceDecomposition {
  double total = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
};
VarianceDecomposition variance_decomposition(const Vector& member_means,
                                             const Vector& member_vars);

/// Closed-form decomposition for a Dirichlet(alpha) second-order posterior:
/// total = H(alpha/S), expected = sum_c (alpha_c/S) (psi(S+1) - psi(alpha_c+1)).
UncertaintyTriple dirichlet_mutual_information(const Vector& alpha);

/// Digamma / trigamma by upward recurrence into the asymptotic series;
/// absolute error below 1e-12 for positive arguments.
double digamma(double x);
double trigamma(double x);

}  // namespace epibench
