#include "epibench/methods.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "epibench/errors.hpp"
#include "epibench/parallel.hpp"

namespace epibench {

namespace fs = std::filesystem;

std::string method_kind_name(MethodKind k) {
  switch (k) {
    case MethodKind::mc_dropout: return "mc_dropout";
    case MethodKind::mc_dropout_ls: return "mc_dropout_ls";
    case MethodKind::mc_dropout_cp: return "mc_dropout_cp";
    case MethodKind::deep_ensemble: return "deep_ensemble";
    case MethodKind::conflictual_de: return "conflictual_de";
    case MethodKind::edl: return "edl";
  }
  return "?";
}

MethodKind method_kind_from_name(const std::string& name) {
  if (name == "mc_dropout") return MethodKind::mc_dropout;
  if (name == "mc_dropout_ls") return MethodKind::mc_dropout_ls;
  if (name == "mc_dropout_cp") return MethodKind::mc_dropout_cp;
  if (name == "deep_ensemble") return MethodKind::deep_ensemble;
  if (name == "conflictual_de") return MethodKind::conflictual_de;
  if (name == "edl") return MethodKind::edl;
  throw InputError("unknown method kind: " + name);
}

void TrainOptions::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("optimizer: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InputError("optimizer: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw InputError("optimizer: weight decay must be non-negative");
  if (epochs < 1) throw InputError("optimizer: epochs must be >= 1");
  if (batch_size < 1) throw InputError("optimizer: batch_size must be >= 1");
  if (scheduler_patience < 1) throw InputError("optimizer: scheduler_patience must be >= 1");
}

namespace {

bool is_mc_kind(MethodKind k) {
  return k == MethodKind::mc_dropout || k == MethodKind::mc_dropout_ls ||
         k == MethodKind::mc_dropout_cp;
}

}  // namespace

int MethodSpec::member_count(int n_classes) const {
  switch (kind) {
    case MethodKind::deep_ensemble: return n_members;
    case MethodKind::conflictual_de: return k_order * n_classes;
    default: return 1;
  }
}

LossSpec MethodSpec::member_loss(int member_index, int n_classes) const {
  LossSpec l = loss;
  switch (kind) {
    case MethodKind::mc_dropout:
    case MethodKind::deep_ensemble:
      l.kind = LossKind::cross_entropy;
      break;
    case MethodKind::mc_dropout_ls:
      l.kind = LossKind::label_smoothing;
      break;
    case MethodKind::mc_dropout_cp:
      l.kind = LossKind::confidence_penalty;
      break;
    case MethodKind::conflictual_de:
      l.kind = LossKind::conflictual;
      l.favored_class = member_index % n_classes;
      break;
    case MethodKind::edl:
      l.kind = LossKind::edl;
      break;
  }
  return l;
}

void MethodSpec::validate(int n_classes) const {
  opt.validate();
  if (kind == MethodKind::deep_ensemble && n_members < 1) {
    throw InputError("method: deep ensemble needs at least one member");
  }
  if (kind == MethodKind::conflictual_de && k_order < 1) {
    throw InputError("method: conflictual order k must be >= 1");
  }
  if (is_mc_kind(kind) && n_mc_passes < 2) {
    throw InputError("method: mutual information needs n_mc_passes >= 2");
  }
  member_loss(0, n_classes).validate(n_classes);
}

std::vector<Architecture> build_submodel_chain(const Architecture& base, int n_steps) {
  base.validate();
  if (n_steps < 1) throw InputError("submodel chain: n_steps must be >= 1");
  std::vector<Architecture> chain;
  chain.reserve(n_steps);
  Architecture a = base;
  for (int s = 0; s < n_steps; ++s) {
    chain.push_back(a);
    for (int& w : a.hidden_widths) w *= 2;
  }
  return chain;
}

namespace {

// Mean loss over a dataset with dropout off; used for validation tracking.
double dataset_loss(const MLPParams& params, const Dataset& ds, const LossSpec& loss,
                    int batch_size) {
  double sum = 0.0;
  Vector row(params.arch.n_classes);
  for (int start = 0; start < ds.size(); start += batch_size) {
    const int b = std::min(batch_size, ds.size() - start);
    Matrix x(b, ds.dim());
    for (int i = 0; i < b; ++i) {
      std::copy(ds.features.row(start + i), ds.features.row(start + i) + ds.dim(), x.row(i));
    }
    ForwardCache cache;
    Matrix probs = mlp_forward_batch(params, x, ForwardMode::eval, nullptr, &cache);
    for (int i = 0; i < b; ++i) {
      const int y = ds.labels[start + i];
      if (loss.kind == LossKind::edl) {
        std::copy(cache.logits.row(i), cache.logits.row(i) + cache.logits.cols, row.begin());
        sum += edl_logit_loss(row, y, loss.lambda_edl).value;
      } else {
        std::copy(probs.row(i), probs.row(i) + probs.cols, row.begin());
        sum += probs_loss(loss, row, y).value;
      }
    }
  }
  return sum / ds.size();
}

}  // namespace

MLPParams train_member(const Architecture& arch, const Dataset& train, const Dataset& val,
                       const LossSpec& loss, const TrainOptions& opt, std::uint64_t seed,
                       TrainLog* log) {
  arch.validate();
  opt.validate();
  train.validate();
  loss.validate(arch.n_classes);
  if (train.size() < 1) throw InputError("train_member: empty training set");
  if (train.dim() != arch.input_dim) {
    throw InputError("train_member: feature dimension does not match the architecture");
  }

  MLPParams params = mlp_init(arch, mix_seed(seed, 1));
  OptimizerState state =
      make_optimizer_state(params, opt.learning_rate, opt.momentum, opt.weight_decay);
  RngStream shuffle_rng(mix_seed(seed, 2));
  RngStream dropout_rng(mix_seed(seed, 3));

  const int n = train.size();
  const int c = arch.n_classes;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const bool has_val = val.size() > 0;
  double best_monitor = std::numeric_limits<double>::infinity();
  MLPParams best_params = params;
  int best_epoch = -1;
  int stall = 0;

  Vector row(c);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += opt.batch_size) {
      const int b = std::min(opt.batch_size, n - start);
      Matrix x(b, train.dim());
      for (int i = 0; i < b; ++i) {
        const int src = order[start + i];
        std::copy(train.features.row(src), train.features.row(src) + train.dim(), x.row(i));
      }
      ForwardCache cache;
      Matrix probs = mlp_forward_batch(params, x, ForwardMode::train, &dropout_rng, &cache);

      Matrix grad(b, c);
      const double inv_b = 1.0 / b;
      for (int i = 0; i < b; ++i) {
        const int y = train.labels[order[start + i]];
        LossResult lr;
        if (loss.kind == LossKind::edl) {
          std::copy(cache.logits.row(i), cache.logits.row(i) + c, row.begin());
          lr = edl_logit_loss(row, y, loss.lambda_edl);
        } else {
          std::copy(probs.row(i), probs.row(i) + c, row.begin());
          lr = probs_loss(loss, row, y);
        }
        epoch_loss += lr.value;
        for (int j = 0; j < c; ++j) grad(i, j) = lr.grad[j] * inv_b;
      }
      Gradients g = mlp_backward(params, cache, grad);
      sgd_step(params, g, state);
    }
    epoch_loss /= n;
    if (!std::isfinite(epoch_loss) || !params_finite(params)) {
      throw TrainingError("training diverged (non-finite loss)", epoch);
    }

    const double monitor =
        has_val ? dataset_loss(params, val, loss, opt.batch_size) : epoch_loss;
    if (!std::isfinite(monitor)) {
      throw TrainingError("training diverged (non-finite validation loss)", epoch);
    }
    if (log) log->epoch_train_loss.push_back(epoch_loss);
    if (monitor < best_monitor) {
      best_monitor = monitor;
      best_epoch = epoch;
      if (has_val) best_params = params;
      stall = 0;
    } else if (++stall >= opt.scheduler_patience) {
      state.learning_rate *= 0.5;
      stall = 0;
    }
  }

  if (log) {
    log->epochs_run = opt.epochs;
    log->best_epoch = best_epoch;
    log->best_val_loss = best_monitor;
  }
  return has_val ? best_params : params;
}

Predictor train_method(const MethodSpec& spec, const Architecture& arch, const Dataset& train,
                       const Dataset& val, std::uint64_t master_seed, int jobs) {
  spec.validate(arch.n_classes);
  const int n_members = spec.member_count(arch.n_classes);

  Predictor pred;
  pred.kind = spec.kind;
  pred.arch = arch;
  pred.n_mc_passes = spec.n_mc_passes;
  pred.inference_seed = mix_seed(master_seed, 2);
  pred.members.resize(n_members);
  pred.info.resize(n_members);

  const std::uint64_t train_root = mix_seed(master_seed, 1);
  parallel_for(n_members, jobs, [&](int m) {
    const std::uint64_t seed = mix_seed(train_root, static_cast<std::uint64_t>(m));
    const LossSpec loss = spec.member_loss(m, arch.n_classes);
    TrainLog log;
    try {
      pred.members[m] = train_member(arch, train, val, loss, spec.opt, seed, &log);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " in member " + std::to_string(m), e.epoch, m);
    }
    pred.info[m] = {seed, loss.kind == LossKind::conflictual ? loss.favored_class : -1,
                    log.best_epoch, log.best_val_loss};
  });
  return pred;
}

Prediction predict(const Predictor& pred, const Vector& x) {
  if (static_cast<int>(x.size()) != pred.arch.input_dim) {
    throw InputError("predict: input has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(pred.arch.input_dim));
  }
  Prediction out;
  const int c = pred.arch.n_classes;

  if (pred.kind == MethodKind::edl) {
    auto [probs, cache] = mlp_forward(pred.members[0], x, ForwardMode::eval, nullptr);
    Vector logits(cache.logits.data.begin(), cache.logits.data.end());
    Vector alpha = softplus(logits);
    double s = 0.0;
    for (double& a : alpha) {
      a += 1.0;
      s += a;
    }
    out.member_probs = Matrix(1, c);
    for (int j = 0; j < c; ++j) out.member_probs(0, j) = alpha[j] / s;
    out.alpha = std::move(alpha);
    return out;
  }

  if (is_mc_kind(pred.kind)) {
    out.member_probs = Matrix(pred.n_mc_passes, c);
    for (int t = 0; t < pred.n_mc_passes; ++t) {
      // Fixed per-pass mask streams: pass t uses the same thinned network for
      // every input, and predict stays a pure function.
      RngStream rng(mix_seed(pred.inference_seed, static_cast<std::uint64_t>(t)));
      auto [probs, cache] = mlp_forward(pred.members[0], x, ForwardMode::mc_sample, &rng);
      std::copy(probs.begin(), probs.end(), out.member_probs.row(t));
    }
    return out;
  }

  out.member_probs = Matrix(static_cast<int>(pred.members.size()), c);
  for (std::size_t m = 0; m < pred.members.size(); ++m) {
    auto [probs, cache] = mlp_forward(pred.members[m], x, ForwardMode::eval, nullptr);
    std::copy(probs.begin(), probs.end(), out.member_probs.row(static_cast<int>(m)));
  }
  return out;
}

void save_predictor(const Predictor& pred, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw FormatError("predictor: cannot write manifest in " + dir);
  manifest << "kind = " << method_kind_name(pred.kind) << "\n";
  manifest << "members = " << pred.members.size() << "\n";
  manifest << "n_mc_passes = " << pred.n_mc_passes << "\n";
  manifest << "inference_seed = " << pred.inference_seed << "\n";
  for (std::size_t m = 0; m < pred.members.size(); ++m) {
    manifest << "member." << m << ".seed = " << pred.info[m].seed << "\n";
    manifest << "member." << m << ".favored_class = " << pred.info[m].favored_class << "\n";
    manifest << "member." << m << ".best_epoch = " << pred.info[m].best_epoch << "\n";
    manifest << "member." << m << ".best_val_loss = " << pred.info[m].best_val_loss << "\n";
    char name[40];
    std::snprintf(name, sizeof name, "member_%03zu.ebnn", m);
    save_checkpoint(pred.members[m], (fs::path(dir) / name).string());
  }
}

Predictor load_predictor(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw FormatError("predictor: cannot open manifest in " + dir);
  Predictor pred;
  std::size_t n_members = 0;
  std::string line;
  std::vector<std::pair<std::string, std::string>> kv;
  while (std::getline(manifest, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  for (const auto& [key, value] : kv) {
    if (key == "kind") pred.kind = method_kind_from_name(value);
    else if (key == "members") n_members = std::stoul(value);
    else if (key == "n_mc_passes") pred.n_mc_passes = std::stoi(value);
    else if (key == "inference_seed") pred.inference_seed = std::stoull(value);
  }
  if (n_members == 0) throw FormatError("predictor: manifest lists no members");
  pred.members.resize(n_members);
  pred.info.resize(n_members);
  for (std::size_t m = 0; m < n_members; ++m) {
    char name[40];
    std::snprintf(name, sizeof name, "member_%03zu.ebnn", m);
    pred.members[m] = load_checkpoint((fs::path(dir) / name).string());
    const std::string prefix = "member." + std::to_string(m) + ".";
    for (const auto& [key, value] : kv) {
      if (key == prefix + "seed") pred.info[m].seed = std::stoull(value);
      else if (key == prefix + "favored_class") pred.info[m].favored_class = std::stoi(value);
      else if (key == prefix + "best_epoch") pred.info[m].best_epoch = std::stoi(value);
      else if (key == prefix + "best_val_loss") pred.info[m].best_val_loss = std::stod(value);
    }
  }
  pred.arch = pred.members[0].arch;
  return pred;
}

}  // namespace epibench
