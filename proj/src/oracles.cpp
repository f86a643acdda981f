#include "epibench/oracles.hpp"

#include <cmath>

#include "epibench/errors.hpp"
#include "epibench/rng.hpp"

namespace epibench {

void BLRConfig::validate() const {
  if (n_regressors < 1) throw InputError("blr: n_regressors must be >= 1");
  if (n_data < 0) throw InputError("blr: n_data must be >= 0");
  if (!(prior_std > 0.0)) throw InputError("blr: prior_std must be positive");
  if (!(noise_std > 0.0)) throw InputError("blr: noise_std must be positive");
}

double blr_epistemic_variance(const BLRConfig& cfg) {
  cfg.validate();
  const double prior_prec = 1.0 / (cfg.prior_std * cfg.prior_std);
  const double noise_prec = 1.0 / (cfg.noise_std * cfg.noise_std);
  return cfg.n_regressors / (prior_prec + cfg.n_data * noise_prec);
}

MCEstimate blr_posterior_mc(const BLRConfig& cfg, int n_samples, std::uint64_t seed) {
  cfg.validate();
  if (n_samples < 1000) throw InputError("blr MC: need at least 1000 samples");
  const int m = cfg.n_regressors;
  RngStream rng(seed);

  // Design with rows sqrt(m) * e_{j mod m}: the empirical regressor second
  // moment is exactly the identity, the setting of the closed form. The
  // posterior precision stays diagonal, per-coefficient.
  std::vector<int> hits(m, 0);
  for (int j = 0; j < cfg.n_data; ++j) ++hits[j % m];

  const double sqm = std::sqrt(static_cast<double>(m));
  const double prior_var = cfg.prior_std * cfg.prior_std;
  const double noise_prec = 1.0 / (cfg.noise_std * cfg.noise_std);

  Vector theta_true(m);
  for (double& t : theta_true) t = cfg.prior_std * rng.gaussian();

  // y_j = sqrt(m) * theta_{c_j} + noise; accumulate per-coefficient sums.
  Vector ysum(m, 0.0);
  for (int j = 0; j < cfg.n_data; ++j) {
    const int c = j % m;
    ysum[c] += sqm * theta_true[c] + cfg.noise_std * rng.gaussian();
  }
  Vector post_mean(m), post_var(m);
  for (int i = 0; i < m; ++i) {
    const double prec = 1.0 / prior_var + noise_prec * m * hits[i];
    post_var[i] = 1.0 / prec;
    post_mean[i] = post_var[i] * noise_prec * sqm * ysum[i];
  }

  // Test input with every regressor at 1; per posterior draw the predictive
  // mean is psi^T theta and the conditional variance is the known noise.
  Vector means(n_samples), vars(n_samples, cfg.noise_std * cfg.noise_std);
  for (int sidx = 0; sidx < n_samples; ++sidx) {
    double mean = 0.0;
    for (int i = 0; i < m; ++i) mean += post_mean[i] + std::sqrt(post_var[i]) * rng.gaussian();
    means[sidx] = mean;
  }
  const VarianceDecomposition d = variance_decomposition(means, vars);

  MCEstimate e;
  e.value = d.epistemic;
  // Sample variance of n Gaussians: Var ~= 2 v^2 / (n - 1).
  e.std_error = d.epistemic * std::sqrt(2.0 / (n_samples - 1));
  return e;
}

void DirichletState::validate() const {
  if (alpha.empty()) throw InputError("dirichlet state: empty alpha");
  for (double a : alpha) {
    if (!(a > 0.0)) throw InputError("dirichlet state: alpha entries must be positive");
  }
}

double dirichlet_expected_information_drop(const DirichletState& state) {
  state.validate();
  double s = 0.0;
  for (double a : state.alpha) s += a;
  const double before = dirichlet_mutual_information(state.alpha).mutual_information;
  double expected_after = 0.0;
  Vector next(state.alpha);
  for (std::size_t c = 0; c < state.alpha.size(); ++c) {
    next[c] += 1.0;
    expected_after += (state.alpha[c] / s) *
                      dirichlet_mutual_information(next).mutual_information;
    next[c] -= 1.0;
  }
  return before - expected_after;
}

}  // namespace epibench
