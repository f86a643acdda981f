#include "epibench/methods.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "epibench/errors.hpp"
#include "epibench/rng.hpp"

using namespace epibench;

namespace {

Architecture arch_of(std::vector<int> widths, int input_dim = 6, int classes = 3,
                     double dropout = 0.3) {
  Architecture a;
  a.input_dim = input_dim;
  a.hidden_widths = std::move(widths);
  a.n_classes = classes;
  a.dropout_p = dropout;
  return a;
}

bool params_close(const MLPParams& a, const MLPParams& b, double tol) {
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].data.size(); ++i) {
      if (std::abs(a.weights[l].data[i] - b.weights[l].data[i]) > tol) return false;
    }
    for (std::size_t i = 0; i < a.biases[l].size(); ++i) {
      if (std::abs(a.biases[l][i] - b.biases[l][i]) > tol) return false;
    }
  }
  return true;
}

TrainOptions quick_opt(int epochs) {
  TrainOptions o;
  o.learning_rate = 0.05;
  o.momentum = 0.9;
  o.weight_decay = 1e-4;
  o.epochs = epochs;
  o.batch_size = 32;
  return o;
}

}  // namespace

TEST_CASE("submodel chain doubles every width") {
  const auto chain = build_submodel_chain(arch_of({128, 64}, 10, 10), 5);
  REQUIRE(chain.size() == 5);
  CHECK(chain[0].hidden_widths == std::vector<int>{128, 64});
  CHECK(chain[1].hidden_widths == std::vector<int>{256, 128});
  CHECK(chain[4].hidden_widths == std::vector<int>{2048, 1024});
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    for (std::size_t j = 0; j < chain[i].hidden_widths.size(); ++j) {
      CHECK(chain[i].hidden_widths[j] <= chain[i + 1].hidden_widths[j]);
    }
  }
  const auto singleton = build_submodel_chain(arch_of({8, 4}), 1);
  CHECK(singleton.size() == 1);
  CHECK(singleton[0].hidden_widths == std::vector<int>{8, 4});
}

TEST_CASE("training fits separable blobs and is deterministic") {
  const Dataset blobs = gen_blobs(3, 6, 120, 6.0, 1);
  const SplitResult split = split_and_normalize(blobs, 0.2, 2);
  LossSpec ce;
  const MLPParams a =
      train_member(arch_of({16, 8}), split.train, split.validation, ce, quick_opt(200), 7);
  const MLPParams b =
      train_member(arch_of({16, 8}), split.train, split.validation, ce, quick_opt(200), 7);
  CHECK(params_close(a, b, 0.0));

  int correct = 0;
  Vector x(split.train.dim());
  for (int i = 0; i < split.train.size(); ++i) {
    std::copy(split.train.features.row(i), split.train.features.row(i) + split.train.dim(), x.begin());
    auto [probs, cache] = mlp_forward(a, x, ForwardMode::eval, nullptr);
    int best = 0;
    for (int j = 1; j < 3; ++j) {
      if (probs[j] > probs[best]) best = j;
    }
    correct += best == split.train.labels[i] ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / split.train.size() >= 0.95);
}

TEST_CASE("conflictual training with lambda 0 matches cross entropy exactly") {
  const Dataset blobs = gen_blobs(3, 6, 60, 3.0, 3);
  const SplitResult split = split_and_normalize(blobs, 0.2, 4);
  LossSpec ce;
  LossSpec conflict;
  conflict.kind = LossKind::conflictual;
  conflict.lambda_conflict = 0.0;
  conflict.favored_class = 1;
  const MLPParams a =
      train_member(arch_of({8, 4}), split.train, split.validation, ce, quick_opt(60), 11);
  const MLPParams b =
      train_member(arch_of({8, 4}), split.train, split.validation, conflict, quick_opt(60), 11);
  CHECK(params_close(a, b, 1e-10));
}

TEST_CASE("divergent training reports the epoch") {
  const Dataset blobs = gen_blobs(3, 6, 60, 3.0, 5);
  const SplitResult split = split_and_normalize(blobs, 0.0, 4);
  TrainOptions opt = quick_opt(50);
  opt.learning_rate = 1e9;
  LossSpec ce;
  try {
    train_member(arch_of({8, 4}), split.train, split.validation, ce, opt, 1);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch >= 0);
    CHECK(e.epoch < 50);
  }
}

TEST_CASE("conflictual member assignment is a bijection onto classes x order") {
  MethodSpec spec;
  spec.kind = MethodKind::conflictual_de;
  spec.k_order = 2;
  CHECK(spec.member_count(3) == 6);
  std::vector<int> favored_counts(3, 0);
  for (int m = 0; m < 6; ++m) {
    const LossSpec l = spec.member_loss(m, 3);
    CHECK(l.kind == LossKind::conflictual);
    ++favored_counts[l.favored_class];
  }
  for (int c = 0; c < 3; ++c) CHECK(favored_counts[c] == 2);

  spec.k_order = 1;
  CHECK(spec.member_count(3) == 3);
  for (int m = 0; m < 3; ++m) CHECK(spec.member_loss(m, 3).favored_class == m);
}

TEST_CASE("train_method produces the right ensemble shapes") {
  const Dataset blobs = gen_blobs(3, 6, 60, 3.0, 8);
  const SplitResult split = split_and_normalize(blobs, 0.2, 9);

  MethodSpec de;
  de.kind = MethodKind::deep_ensemble;
  de.n_members = 4;
  de.opt = quick_opt(20);
  const Predictor p = train_method(de, arch_of({8, 4}), split.train, split.validation, 21);
  CHECK(p.members.size() == 4);
  for (const MemberInfo& info : p.info) CHECK(info.favored_class == -1);

  MethodSpec cde;
  cde.kind = MethodKind::conflictual_de;
  cde.k_order = 1;
  cde.opt = quick_opt(20);
  const Predictor q = train_method(cde, arch_of({8, 4}), split.train, split.validation, 21);
  CHECK(q.members.size() == 3);
  for (int m = 0; m < 3; ++m) CHECK(q.info[m].favored_class == m);
}

TEST_CASE("member training is order-independent (seed isolation)") {
  const Dataset blobs = gen_blobs(3, 6, 50, 3.0, 13);
  const SplitResult split = split_and_normalize(blobs, 0.2, 14);
  MethodSpec de;
  de.kind = MethodKind::deep_ensemble;
  de.n_members = 3;
  de.opt = quick_opt(15);
  const Architecture arch = arch_of({8, 4});

  const Predictor together = train_method(de, arch, split.train, split.validation, 33);

  // Retrain each member alone, in reverse order, with the same derived seeds.
  for (int m = 2; m >= 0; --m) {
    const MLPParams alone = train_member(arch, split.train, split.validation,
                                         de.member_loss(m, 3), de.opt, together.info[m].seed);
    CHECK(params_close(alone, together.members[m], 0.0));
  }

  // Parallel execution is bit-identical to sequential.
  const Predictor parallel = train_method(de, arch, split.train, split.validation, 33, 3);
  for (int m = 0; m < 3; ++m) CHECK(params_close(parallel.members[m], together.members[m], 0.0));
}

TEST_CASE("adding members never perturbs existing ones") {
  const Dataset blobs = gen_blobs(3, 6, 50, 3.0, 15);
  const SplitResult split = split_and_normalize(blobs, 0.2, 16);
  MethodSpec de;
  de.kind = MethodKind::deep_ensemble;
  de.opt = quick_opt(10);
  const Architecture arch = arch_of({8, 4});

  de.n_members = 2;
  const Predictor small = train_method(de, arch, split.train, split.validation, 55);
  de.n_members = 4;
  const Predictor big = train_method(de, arch, split.train, split.validation, 55);
  for (int m = 0; m < 2; ++m) {
    CHECK(big.info[m].seed == small.info[m].seed);
    CHECK(params_close(big.members[m], small.members[m], 0.0));
  }
}

TEST_CASE("predict shapes and determinism per method family") {
  const Dataset blobs = gen_blobs(3, 6, 50, 3.0, 17);
  const SplitResult split = split_and_normalize(blobs, 0.2, 18);
  const Architecture arch = arch_of({8, 4});
  const Vector x(6, 0.25);

  SUBCASE("mc dropout emits n_mc_passes stochastic rows, deterministically") {
    MethodSpec mc;
    mc.kind = MethodKind::mc_dropout;
    mc.n_mc_passes = 20;
    mc.opt = quick_opt(15);
    const Predictor p = train_method(mc, arch, split.train, split.validation, 5);
    const Prediction a = predict(p, x);
    CHECK(a.member_probs.rows == 20);
    CHECK(a.member_probs.cols == 3);
    for (int i = 0; i < a.member_probs.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 3; ++j) sum += a.member_probs(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    const Prediction b = predict(p, x);
    CHECK(a.member_probs.data == b.member_probs.data);
    // Dropout active: rows differ from one another.
    CHECK(a.member_probs.data != std::vector<double>(a.member_probs.data.size(),
                                                     a.member_probs.data[0]));
  }

  SUBCASE("mc dropout with p=0 collapses to identical rows") {
    MethodSpec mc;
    mc.kind = MethodKind::mc_dropout;
    mc.n_mc_passes = 5;
    mc.opt = quick_opt(15);
    const Predictor p = train_method(mc, arch_of({8, 4}, 6, 3, 0.0), split.train,
                                     split.validation, 5);
    const Prediction a = predict(p, x);
    for (int i = 1; i < a.member_probs.rows; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(a.member_probs(i, j) == a.member_probs(0, j));
    }
  }

  SUBCASE("identical ensemble members produce identical rows") {
    MethodSpec de;
    de.kind = MethodKind::deep_ensemble;
    de.n_members = 3;
    de.opt = quick_opt(5);
    Predictor p = train_method(de, arch, split.train, split.validation, 5);
    p.members[1] = p.members[0];
    p.members[2] = p.members[0];
    const Prediction a = predict(p, x);
    for (int i = 1; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(a.member_probs(i, j) == a.member_probs(0, j));
    }
  }

  SUBCASE("edl returns the dirichlet mean and concentrations") {
    MethodSpec edl;
    edl.kind = MethodKind::edl;
    edl.opt = quick_opt(15);
    const Predictor p = train_method(edl, arch, split.train, split.validation, 5);
    const Prediction a = predict(p, x);
    CHECK(a.member_probs.rows == 1);
    REQUIRE(a.alpha.has_value());
    double s = 0.0;
    for (double v : *a.alpha) {
      CHECK(v >= 1.0);
      s += v;
    }
    for (int j = 0; j < 3; ++j) {
      CHECK(a.member_probs(0, j) == doctest::Approx((*a.alpha)[j] / s));
    }
  }
}

TEST_CASE("predict rejects dimension mismatch") {
  const Dataset blobs = gen_blobs(3, 6, 40, 3.0, 19);
  const SplitResult split = split_and_normalize(blobs, 0.0, 20);
  MethodSpec de;
  de.kind = MethodKind::deep_ensemble;
  de.n_members = 1;
  de.opt = quick_opt(3);
  const Predictor p = train_method(de, arch_of({8, 4}), split.train, split.validation, 5);
  CHECK_THROWS_AS(predict(p, {1.0, 2.0}), InputError);
}

TEST_CASE("predictor directory checkpoint round trip") {
  const Dataset blobs = gen_blobs(3, 6, 40, 3.0, 23);
  const SplitResult split = split_and_normalize(blobs, 0.2, 24);
  MethodSpec cde;
  cde.kind = MethodKind::conflictual_de;
  cde.k_order = 1;
  cde.opt = quick_opt(10);
  const Predictor p = train_method(cde, arch_of({8, 4}), split.train, split.validation, 77);

  const std::string dir = "pred_ckpt";
  save_predictor(p, dir);
  const Predictor q = load_predictor(dir);
  CHECK(q.kind == p.kind);
  CHECK(q.members.size() == p.members.size());
  CHECK(q.inference_seed == p.inference_seed);
  for (std::size_t m = 0; m < p.members.size(); ++m) {
    CHECK(q.info[m].favored_class == p.info[m].favored_class);
    CHECK(q.info[m].seed == p.info[m].seed);
    // float32 storage
    CHECK(params_close(q.members[m], p.members[m], 1e-6));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("method spec validation") {
  MethodSpec mc;
  mc.kind = MethodKind::mc_dropout;
  mc.n_mc_passes = 1;
  CHECK_THROWS_AS(mc.validate(3), InputError);
  MethodSpec cde;
  cde.kind = MethodKind::conflictual_de;
  cde.k_order = 0;
  CHECK_THROWS_AS(cde.validate(3), InputError);
}
