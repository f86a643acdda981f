#include "epibench/config.hpp"

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "epibench/errors.hpp"

using namespace epibench;

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

constexpr const char* kMinimal = R"(# minimal synthetic experiment
dataset.kind = synthetic
fractions = 0.1, 0.5, 1.0
chain.base_widths = 16, 8
chain.steps = 2
methods = deep_ensemble, conflictual_de
output_dir = out
)";

struct TempFile {
  std::string path;
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("minimal config parses with documented defaults") {
  TempFile tmp{"cfg_min.cfg"};
  write_file(tmp.path, kMinimal);
  const ExperimentConfig cfg = parse_config(tmp.path);
  CHECK(cfg.dataset_kind == "synthetic");
  CHECK(cfg.dropout_p == doctest::Approx(0.3));
  CHECK(cfg.validation_fraction == doctest::Approx(0.2));
  CHECK(cfg.master_seed == 1234);
  REQUIRE(cfg.methods.size() == 2);
  CHECK(cfg.methods[0].kind == MethodKind::deep_ensemble);
  CHECK(cfg.methods[0].n_members == 10);
  CHECK(cfg.methods[1].kind == MethodKind::conflictual_de);
  CHECK(cfg.methods[1].loss.lambda_conflict == doctest::Approx(0.05));
  CHECK(cfg.methods[1].loss.epsilon_ls == doctest::Approx(0.1));
  CHECK(cfg.methods[1].loss.beta_cp == doctest::Approx(0.1));
  CHECK(cfg.methods[1].loss.lambda_edl == doctest::Approx(0.01));
  CHECK(cfg.methods[1].n_mc_passes == 20);
  CHECK(cfg.methods[0].opt.learning_rate == doctest::Approx(0.01));
  CHECK(cfg.methods[0].opt.momentum == doctest::Approx(0.95));
  CHECK(cfg.sce_bins == 15);
  CHECK(cfg.ood_kind == "none");
}

TEST_CASE("constraint violations name the key") {
  TempFile tmp{"cfg_bad.cfg"};
  write_file(tmp.path, std::string(kMinimal) + "optimizer.momentum = 1.5\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("momentum"), InputError);

  write_file(tmp.path, std::string(kMinimal) + "arch.dropout_p = 1.0\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("dropout_p"), InputError);

  write_file(tmp.path, "dataset.kind = synthetic\nfractions = 0.5, 0.2\n"
                       "chain.base_widths = 8\nchain.steps = 1\nmethods = edl\noutput_dir = o\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("ascending"), InputError);
}

TEST_CASE("unknown keys are rejected") {
  TempFile tmp{"cfg_unknown.cfg"};
  write_file(tmp.path, std::string(kMinimal) + "optimiser.lr = 0.1\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("unknown key"), FormatError);
}

TEST_CASE("missing required keys are named") {
  TempFile tmp{"cfg_missing.cfg"};
  write_file(tmp.path, "dataset.kind = synthetic\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("fractions"), FormatError);
}

TEST_CASE("type mismatches are named") {
  TempFile tmp{"cfg_type.cfg"};
  write_file(tmp.path, std::string(kMinimal) + "optimizer.epochs = soon\n");
  CHECK_THROWS_WITH_AS(parse_config(tmp.path), doctest::Contains("optimizer.epochs"), FormatError);
}

TEST_CASE("config hash is stable and sensitive") {
  TempFile tmp{"cfg_hash.cfg"};
  write_file(tmp.path, kMinimal);
  const ExperimentConfig a = parse_config(tmp.path);
  const ExperimentConfig b = parse_config(tmp.path);
  CHECK(config_hash(a) == config_hash(b));

  write_file(tmp.path, std::string(kMinimal) + "master_seed = 99\n");
  const ExperimentConfig c = parse_config(tmp.path);
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("method hyperparameter overrides") {
  TempFile tmp{"cfg_over.cfg"};
  write_file(tmp.path, std::string(kMinimal) +
                           "method.deep_ensemble.n_members = 6\n"
                           "method.conflictual_de.k_order = 2\n"
                           "method.conflictual_de.lambda = 0.125\n");
  const ExperimentConfig cfg = parse_config(tmp.path);
  CHECK(cfg.methods[0].n_members == 6);
  CHECK(cfg.methods[1].k_order == 2);
  CHECK(cfg.methods[1].loss.lambda_conflict == doctest::Approx(0.125));
}
