#include "epibench/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "epibench/errors.hpp"

using namespace epibench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(const std::string& out_dir) {
  const std::string path = out_dir + ".cfg";
  std::ofstream cfg(path);
  cfg << "dataset.kind = synthetic\n"
         "dataset.n_per_class = 80\n"
         "dataset.test_n_per_class = 40\n"
         "dataset.dims = 6\n"
         "dataset.spread = 2.5\n"
         "ood.kind = synthetic\n"
         "ood.dims = 6\n"
         "ood.test_n_per_class = 30\n"
         "fractions = 0.4, 1.0\n"
         "chain.base_widths = 8, 4\n"
         "chain.steps = 1\n"
         "methods = deep_ensemble, mc_dropout\n"
         "method.deep_ensemble.n_members = 3\n"
         "method.mc_dropout.n_mc_passes = 6\n"
         "optimizer.epochs = 12\n"
         "optimizer.lr = 0.05\n"
         "optimizer.momentum = 0.9\n"
         "optimizer.batch_size = 32\n"
         "master_seed = 4242\n";
  cfg << "output_dir = " << out_dir << "\n";
  cfg.close();
  ExperimentConfig c = parse_config(path);
  fs::remove(path);
  return c;
}

}  // namespace

TEST_CASE("run_experiment populates the output directory") {
  const std::string out = "run_out_a";
  fs::remove_all(out);
  const ExperimentConfig cfg = tiny_config(out);
  const RunResult result = run_experiment(cfg, 2);
  CHECK(result.failed_cells == 0);

  CHECK(fs::exists(fs::path(out) / "deep_ensemble" / "mean_mi.csv"));
  CHECK(fs::exists(fs::path(out) / "deep_ensemble" / "ood_auroc.csv"));
  CHECK(fs::exists(fs::path(out) / "mc_dropout" / "accuracy.csv"));
  CHECK(fs::exists(fs::path(out) / "compliance.csv"));
  CHECK(fs::exists(fs::path(out) / "summary.csv"));
  CHECK(fs::exists(fs::path(out) / "manifest.txt"));

  const std::string compliance_text = slurp(fs::path(out) / "compliance.csv");
  CHECK(compliance_text.find("method,first_principle,second_principle") == 0);
  CHECK(compliance_text.find("deep_ensemble,") != std::string::npos);
  CHECK(compliance_text.find("mc_dropout,") != std::string::npos);

  const std::string manifest = slurp(fs::path(out) / "manifest.txt");
  CHECK(manifest.find("config_hash = ") != std::string::npos);
  CHECK(manifest.find("status=ok") != std::string::npos);

  fs::remove_all(out);
}

TEST_CASE("reruns are byte-identical across job counts") {
  const std::string out_a = "run_det_a", out_b = "run_det_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  ExperimentConfig cfg_a = tiny_config(out_a);
  run_experiment(cfg_a, 1);
  ExperimentConfig cfg_b = tiny_config(out_a);
  cfg_b.output_dir = out_b;
  run_experiment(cfg_b, 4);

  const std::vector<std::string> rel = {
      "deep_ensemble/mean_mi.csv", "deep_ensemble/accuracy.csv",  "deep_ensemble/brier.csv",
      "deep_ensemble/sce.csv",     "deep_ensemble/ood_auroc.csv", "mc_dropout/mean_mi.csv",
      "compliance.csv",            "summary.csv"};
  for (const std::string& r : rel) {
    CHECK_MESSAGE(slurp(fs::path(out_a) / r) == slurp(fs::path(out_b) / r), r);
  }
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

namespace {

// Field-wise CSV comparison: identical layout, numbers equal to the
// six-significant-digit precision of the emitted files.
void check_csv_close(const std::string& a, const std::string& b) {
  std::stringstream sa(a), sb(b);
  std::string la, lb;
  while (std::getline(sa, la)) {
    REQUIRE(std::getline(sb, lb));
    std::stringstream fa(la), fb(lb);
    std::string va, vb;
    while (std::getline(fa, va, ',')) {
      REQUIRE(std::getline(fb, vb, ','));
      char* end_a = nullptr;
      const double da = std::strtod(va.c_str(), &end_a);
      if (end_a != va.c_str() && *end_a == '\0') {
        CHECK(std::stod(vb) == doctest::Approx(da).epsilon(1e-5));
      } else {
        CHECK(va == vb);
      }
    }
    CHECK(!std::getline(fb, vb, ','));
  }
  CHECK(!std::getline(sb, lb));
}

}  // namespace

TEST_CASE("report rebuilds aggregates from the metric csvs") {
  const std::string out = "run_report";
  fs::remove_all(out);
  const ExperimentConfig cfg = tiny_config(out);
  run_experiment(cfg, 2);

  const std::string compliance_before = slurp(fs::path(out) / "compliance.csv");
  const std::string summary_before = slurp(fs::path(out) / "summary.csv");
  fs::remove(fs::path(out) / "compliance.csv");
  fs::remove(fs::path(out) / "summary.csv");

  // Rebuilt aggregates come from the six-digit CSVs, so compare field-wise.
  reaggregate_outputs(out);
  CHECK(slurp(fs::path(out) / "compliance.csv") == compliance_before);
  check_csv_close(slurp(fs::path(out) / "summary.csv"), summary_before);
  fs::remove_all(out);
}

TEST_CASE("oracle check passes and prints one line per check") {
  std::ostringstream out;
  CHECK(oracle_check(out));
  const std::string text = out.str();
  CHECK(text.find("PASS") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  int lines = 0;
  for (char ch : text) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == 3);
}
