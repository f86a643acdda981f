#pragma once

#include <cstdint>

#include "epibench/linalg.hpp"
#include "epibench/uncertainty.hpp"

namespace epibench {

/// Bayesian linear regression with isotropic normal prior N(0, prior_std^2)
/// on the coefficients, known homoskedastic noise N(0, noise_std^2), and
/// decorrelated unit regressors.
struct BLRConfig {
  int n_regressors = 1;   // number of active coefficients
  int n_data = 0;
  double prior_std = 1.0;
  double noise_std = 1.0;

  void validate() const;
};

/// Closed-form epistemic variance: n_regressors / (prior_std^-2 + n_data * noise_std^-2).
/// Strictly increasing in the regressor count and decreasing in the data count.
double blr_epistemic_variance(const BLRConfig& cfg);

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Independent Monte Carlo route to the same quantity: simulate a dataset
/// from a random true coefficient vector on an exactly decorrelated design,
/// form the conjugate Gaussian posterior, and estimate the difference of
/// variances by sampling posterior predictive means.
MCEstimate blr_posterior_mc(const BLRConfig& cfg, int n_samples, std::uint64_t seed);

/// Exact conjugate posterior for the first-principle check.
struct DirichletState {
  Vector alpha;
  void validate() const;
};

/// Expected one-observation drop of mutual information:
///   MI(alpha) - sum_c (alpha_c / S) * MI(alpha + e_c).
/// Non-negative for every state; this is the mutual-information metric
/// decreasing in expectation under one more i.i.d. observation.
double dirichlet_expected_information_drop(const DirichletState& state);

}  // namespace epibench
