#include "epibench/losses.hpp"

#include <cmath>

#include "epibench/errors.hpp"
#include "epibench/uncertainty.hpp"

namespace epibench {

namespace {

constexpr double kProbFloor = 1e-12;

double floored_log(double p, bool& clamped) {
  if (p < kProbFloor) {
    clamped = true;
    p = kProbFloor;
  }
  return std::log(p);
}

void check_class(int c, int n, const char* what) {
  if (c < 0 || c >= n) {
    throw InputError(std::string(what) + " index " + std::to_string(c) +
                     " out of range for " + std::to_string(n) + " classes");
  }
}

}  // namespace

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::label_smoothing: return "label_smoothing";
    case LossKind::confidence_penalty: return "confidence_penalty";
    case LossKind::conflictual: return "conflictual";
    case LossKind::edl: return "edl";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "label_smoothing") return LossKind::label_smoothing;
  if (name == "confidence_penalty") return LossKind::confidence_penalty;
  if (name == "conflictual") return LossKind::conflictual;
  if (name == "edl") return LossKind::edl;
  throw InputError("unknown loss kind: " + name);
}

void LossSpec::validate(int n_classes) const {
  if (epsilon_ls < 0.0 || epsilon_ls >= 1.0) throw InputError("loss: epsilon_ls must lie in [0, 1)");
  if (beta_cp < 0.0) throw InputError("loss: beta_cp must be non-negative");
  if (lambda_conflict < 0.0) throw InputError("loss: lambda_conflict must be non-negative");
  if (lambda_edl < 0.0) throw InputError("loss: lambda_edl must be non-negative");
  if (kind == LossKind::conflictual) check_class(favored_class, n_classes, "loss: favored class");
}

LossResult cross_entropy(const Vector& probs, int y) {
  check_class(y, static_cast<int>(probs.size()), "true class");
  LossResult r;
  r.value = -floored_log(probs[y], r.clamped);
  r.grad = probs;
  r.grad[y] -= 1.0;
  return r;
}

LossResult label_smoothing_ce(const Vector& probs, int y, double epsilon) {
  const int c = static_cast<int>(probs.size());
  check_class(y, c, "true class");
  LossResult r;
  const double uniform = epsilon / c;
  r.grad = probs;
  for (int j = 0; j < c; ++j) {
    const double q = uniform + (j == y ? 1.0 - epsilon : 0.0);
    r.value -= q * floored_log(probs[j], r.clamped);
    r.grad[j] -= q;
  }
  return r;
}

LossResult confidence_penalty_ce(const Vector& probs, int y, double beta) {
  const int c = static_cast<int>(probs.size());
  check_class(y, c, "true class");
  LossResult r;
  double h = 0.0;
  Vector logp(c);
  for (int j = 0; j < c; ++j) {
    logp[j] = floored_log(probs[j], r.clamped);
    if (probs[j] > 0.0) h -= probs[j] * logp[j];
  }
  r.value = -logp[y] - beta * h;
  // d(-beta*H)/dz_k = beta * p_k * (ln p_k + H)
  r.grad = probs;
  r.grad[y] -= 1.0;
  for (int j = 0; j < c; ++j) r.grad[j] += beta * probs[j] * (logp[j] + h);
  return r;
}

LossResult conflictual_loss(const Vector& probs, int y, int favored_class, double lambda) {
  const int c = static_cast<int>(probs.size());
  check_class(y, c, "true class");
  check_class(favored_class, c, "favored class");
  LossResult r;
  r.value = -floored_log(probs[y], r.clamped) - lambda * floored_log(probs[favored_class], r.clamped);
  r.grad.resize(c);
  for (int j = 0; j < c; ++j) r.grad[j] = (1.0 + lambda) * probs[j];
  r.grad[y] -= 1.0;
  r.grad[favored_class] -= lambda;
  return r;
}

LossResult edl_loss(const Vector& evidence, int y, double lambda_edl) {
  const int c = static_cast<int>(evidence.size());
  check_class(y, c, "true class");
  for (double e : evidence) {
    if (!std::isfinite(e)) throw InputError("edl_loss: non-finite evidence");
    if (e < 0.0) throw InputError("edl_loss: negative evidence");
  }

  Vector alpha(c);
  double s = 0.0;
  for (int j = 0; j < c; ++j) {
    alpha[j] = evidence[j] + 1.0;
    s += alpha[j];
  }

  LossResult r;
  r.grad.assign(c, 0.0);

  // Expected squared-error Bayes risk under Dir(alpha):
  //   sum_c (y_c - m_c)^2 + m_c (1 - m_c) / (s + 1),  m = alpha / s.
  double bayes = 0.0;
  double spread = 0.0;  // sum_c m_c (1 - m_c)
  Vector m(c), g(c);
  for (int j = 0; j < c; ++j) {
    m[j] = alpha[j] / s;
    const double yj = j == y ? 1.0 : 0.0;
    bayes += (yj - m[j]) * (yj - m[j]) + m[j] * (1.0 - m[j]) / (s + 1.0);
    spread += m[j] * (1.0 - m[j]);
    g[j] = -2.0 * (yj - m[j]) + (1.0 - 2.0 * m[j]) / (s + 1.0);
  }
  double gm = 0.0;
  for (int j = 0; j < c; ++j) gm += m[j] * g[j];
  for (int j = 0; j < c; ++j) r.grad[j] += (g[j] - gm) / s - spread / ((s + 1.0) * (s + 1.0));

  // KL(Dir(alpha~) || Dir(1)) with the true-class entry of alpha~ forced to 1.
  Vector at(alpha);
  at[y] = 1.0;
  double st = 0.0;
  for (double a : at) st += a;
  double kl = std::lgamma(st) - std::lgamma(static_cast<double>(c));
  for (int j = 0; j < c; ++j) {
    kl += -std::lgamma(at[j]) + (at[j] - 1.0) * (digamma(at[j]) - digamma(st));
  }
  const double trig_st = trigamma(st);
  for (int j = 0; j < c; ++j) {
    if (j == y) continue;
    r.grad[j] += lambda_edl * ((at[j] - 1.0) * trigamma(at[j]) - trig_st * (st - c));
  }

  r.value = bayes + lambda_edl * kl;
  return r;
}

Vector softplus(const Vector& z) {
  Vector e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = z[i] > 0.0 ? z[i] + std::log1p(std::exp(-z[i])) : std::log1p(std::exp(z[i]));
  }
  return e;
}

LossResult edl_logit_loss(const Vector& logits, int y, double lambda_edl) {
  LossResult r = edl_loss(softplus(logits), y, lambda_edl);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double sigmoid = 1.0 / (1.0 + std::exp(-logits[i]));
    r.grad[i] *= sigmoid;
  }
  return r;
}

LossResult probs_loss(const LossSpec& spec, const Vector& probs, int y) {
  switch (spec.kind) {
    case LossKind::cross_entropy: return cross_entropy(probs, y);
    case LossKind::label_smoothing: return label_smoothing_ce(probs, y, spec.epsilon_ls);
    case LossKind::confidence_penalty: return confidence_penalty_ce(probs, y, spec.beta_cp);
    case LossKind::conflictual: return conflictual_loss(probs, y, spec.favored_class, spec.lambda_conflict);
    case LossKind::edl: break;
  }
  throw InputError("probs_loss: edl operates on evidence, not probabilities");
}

}  // namespace epibench
