#include "epibench/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "epibench/errors.hpp"
#include "epibench/oracles.hpp"
#include "epibench/rng.hpp"
#include "epibench/uncertainty.hpp"

namespace epibench {

namespace fs = std::filesystem;

namespace {

// Seed tags for the independent randomness sources of one experiment.
enum : std::uint64_t { kSeedTrainData = 10, kSeedTestData = 11, kSeedOod = 12, kSeedSplit = 13, kSeedLadder = 14 };

constexpr const char* kMetricOrder[] = {"mean_mi", "mean_total_entropy", "accuracy", "brier",
                                        "sce",     "ood_auroc",          "mis_auroc"};

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Dataset load_configured_dataset(const ExperimentConfig& cfg, bool test_split) {
  if (cfg.dataset_kind == "synthetic") {
    const SyntheticSpec& s = cfg.synthetic;
    const int n = test_split ? s.test_n_per_class : s.n_per_class;
    Dataset ds = gen_blobs(s.classes, s.dims, n, s.spread,
                           mix_seed(cfg.master_seed, test_split ? kSeedTestData : kSeedTrainData));
    if (s.shift != 0.0) {
      for (double& v : ds.features.data) v += s.shift;
    }
    return ds;
  }
  if (cfg.dataset_kind == "idx") {
    return test_split ? load_idx(cfg.idx_test_images, cfg.idx_test_labels)
                      : load_idx(cfg.idx_train_images, cfg.idx_train_labels);
  }
  if (test_split) {
    const Dataset train = load_embedding_csv(cfg.csv_train, cfg.csv_classes);
    return load_embedding_csv(cfg.csv_test, train.n_classes);
  }
  return load_embedding_csv(cfg.csv_train, cfg.csv_classes);
}

Dataset load_ood_dataset(const ExperimentConfig& cfg) {
  if (cfg.ood_kind == "synthetic") {
    const SyntheticSpec& s = cfg.ood_synthetic;
    Dataset ds = gen_blobs(s.classes, s.dims, s.test_n_per_class, s.spread,
                           mix_seed(cfg.master_seed, kSeedOod));
    if (s.shift != 0.0) {
      for (double& v : ds.features.data) v += s.shift;
    }
    return ds;
  }
  if (cfg.ood_kind == "idx") return load_idx(cfg.ood_idx_images, cfg.ood_idx_labels);
  return load_embedding_csv(cfg.ood_csv);
}

// Aggregate rows are written in method-name order so a later `report` pass
// over the same directory reproduces the same layout.
std::vector<const MethodGrids*> sorted_by_name(const std::vector<MethodGrids>& grids) {
  std::vector<const MethodGrids*> out;
  for (const MethodGrids& g : grids) out.push_back(&g);
  std::sort(out.begin(), out.end(),
            [](const MethodGrids* a, const MethodGrids* b) { return a->method_name < b->method_name; });
  return out;
}

void write_compliance_csv(const std::vector<MethodGrids>& grids, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("compliance csv: cannot open " + path);
  out << "method,first_principle,second_principle\n";
  for (const MethodGrids* g : sorted_by_name(grids)) {
    const auto it = g->by_metric.find("mean_mi");
    if (it == g->by_metric.end()) continue;
    const ComplianceReport rep = compliance(it->second);
    out << g->method_name << ',' << format_g6(rep.first_principle_pct) << ','
        << format_g6(rep.second_principle_pct) << "\n";
  }
}

double heatmap_mean(const HeatmapGrid& grid) {
  double sum = 0.0;
  for (double v : grid.values.data) sum += v;
  return sum / grid.values.data.size();
}

void write_summary_csv(const std::vector<MethodGrids>& grids, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("summary csv: cannot open " + path);
  out << "method";
  std::vector<std::string> metrics;
  for (const char* name : kMetricOrder) {
    bool present = false;
    for (const MethodGrids& g : grids) present |= g.by_metric.count(name) > 0;
    if (present) {
      metrics.push_back(name);
      out << ',' << name;
    }
  }
  out << "\n";
  for (const MethodGrids* g : sorted_by_name(grids)) {
    if (g->by_metric.empty()) continue;
    out << g->method_name;
    for (const std::string& name : metrics) {
      const auto it = g->by_metric.find(name);
      out << ',' << (it == g->by_metric.end() ? "" : format_g6(heatmap_mean(it->second)));
    }
    out << "\n";
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  if (jobs < 1) throw InputError("run: jobs must be >= 1");

  Dataset train_full = load_configured_dataset(cfg, false);
  Dataset test = load_configured_dataset(cfg, true);
  if (test.dim() != train_full.dim()) {
    throw InputError("run: test feature dimension does not match the training set");
  }

  GridData data;
  SplitResult split = split_and_normalize(train_full, cfg.validation_fraction,
                                          mix_seed(cfg.master_seed, kSeedSplit));
  data.train = std::move(split.train);
  data.validation = std::move(split.validation);
  split.normalizer.apply(test.features);
  data.test = std::move(test);
  if (cfg.ood_kind != "none") {
    Dataset ood = load_ood_dataset(cfg);
    if (ood.dim() != data.train.dim()) {
      throw InputError("run: ood feature dimension does not match the training set");
    }
    split.normalizer.apply(ood.features);
    data.ood = std::move(ood);
  }

  const DataLadder ladder =
      build_data_ladder(data.train, cfg.fractions, mix_seed(cfg.master_seed, kSeedLadder));
  Architecture base;
  base.input_dim = data.train.dim();
  base.hidden_widths = cfg.base_widths;
  base.n_classes = data.train.n_classes;
  base.dropout_p = cfg.dropout_p;
  const std::vector<Architecture> chain = build_submodel_chain(base, cfg.chain_steps);

  std::vector<CellReport> reports;
  const std::vector<MethodGrids> grids =
      run_grid(cfg.methods, data, ladder, chain, cfg.master_seed, jobs, cfg.sce_bins, &reports);

  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);
  for (const MethodGrids& g : grids) {
    if (g.by_metric.empty()) continue;
    fs::create_directories(out_dir / g.method_name);
    for (const char* name : kMetricOrder) {
      const auto it = g.by_metric.find(name);
      if (it == g.by_metric.end()) continue;
      emit_heatmap_csv(it->second, (out_dir / g.method_name / (std::string(name) + ".csv")).string());
    }
  }
  write_compliance_csv(grids, (out_dir / "compliance.csv").string());
  write_summary_csv(grids, (out_dir / "summary.csv").string());

  RunResult result;
  result.output_dir = cfg.output_dir;
  {
    std::ofstream manifest(out_dir / "manifest.txt");
    char hash_buf[24];
    std::snprintf(hash_buf, sizeof hash_buf, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    manifest << "config_hash = " << hash_buf << "\n";
    manifest << "master_seed = " << cfg.master_seed << "\n";
    manifest << "cells = " << reports.size() << "\n";
    for (const CellReport& r : reports) {
      manifest << "cell " << r.method << " rung=" << r.rung << " arch=" << r.arch
               << " seed=" << r.seed << " wall_ms=" << format_g6(r.wall_ms)
               << (r.error.empty() ? " status=ok" : " status=failed: " + r.error) << "\n";
      if (!r.error.empty()) ++result.failed_cells;
    }
  }
  return result;
}

void reaggregate_outputs(const std::string& output_dir) {
  const fs::path dir(output_dir);
  if (!fs::is_directory(dir)) throw InputError("report: " + output_dir + " is not a directory");
  std::vector<std::string> method_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "mean_mi.csv")) {
      method_dirs.push_back(entry.path().filename().string());
    }
  }
  if (method_dirs.empty()) throw InputError("report: no method outputs under " + output_dir);
  std::sort(method_dirs.begin(), method_dirs.end());

  std::vector<MethodGrids> grids;
  for (const std::string& name : method_dirs) {
    MethodGrids g;
    g.method_name = name;
    for (const char* metric : kMetricOrder) {
      const fs::path p = dir / name / (std::string(metric) + ".csv");
      if (!fs::exists(p)) continue;
      HeatmapGrid grid = parse_heatmap_csv(p.string());
      grid.metric = metric;
      g.by_metric.emplace(metric, std::move(grid));
    }
    grids.push_back(std::move(g));
  }
  write_compliance_csv(grids, (dir / "compliance.csv").string());
  write_summary_csv(grids, (dir / "summary.csv").string());
}

bool oracle_check(std::ostream& out) {
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "PASS  " : "FAIL  ") << name << "  " << detail << "\n";
    all_ok &= ok;
  };

  // Closed-form epistemic variance vs its Monte Carlo estimate.
  {
    const int regressors[] = {2, 3, 5};
    const int data_sizes[] = {0, 30, 120};
    const double prior_stds[] = {0.5, 1.0, 2.0};
    bool ok = true;
    double worst = 0.0;
    int checked = 0;
    for (int m : regressors) {
      for (int n : data_sizes) {
        for (double s0 : prior_stds) {
          BLRConfig cfg{m, n, s0, 1.0};
          const double exact = blr_epistemic_variance(cfg);
          const MCEstimate mc = blr_posterior_mc(cfg, 100000, mix_seed(7, m, n) + static_cast<std::uint64_t>(s0 * 8));
          const double gap = std::abs(mc.value - exact);
          worst = std::max(worst, gap / mc.std_error);
          ok &= gap <= 3.0 * mc.std_error;
          ++checked;
        }
      }
    }
    report("regression variance closed form vs Monte Carlo", ok,
           std::to_string(checked) + " cells, worst gap " + format_g6(worst) + " SE");
  }

  // Exact monotonicity of the closed form in both directions.
  {
    bool ok = true;
    for (int n : {0, 5, 50}) {
      for (int m = 1; m < 8; ++m) {
        ok &= blr_epistemic_variance({m, n, 1.0, 1.0}) < blr_epistemic_variance({m + 1, n, 1.0, 1.0});
      }
    }
    for (int m : {1, 3, 6}) {
      for (int n = 0; n < 8; ++n) {
        ok &= blr_epistemic_variance({m, n + 1, 1.0, 1.0}) < blr_epistemic_variance({m, n, 1.0, 1.0});
      }
    }
    report("closed form monotone in regressors and data", ok, "exact comparisons");
  }

  // Expected information drop after one observation is never negative.
  {
    RngStream rng(424242);
    bool ok = true;
    double worst = 1.0;
    for (int i = 0; i < 1000; ++i) {
      const int c = 2 + static_cast<int>(rng.uniform_int(9));
      DirichletState state;
      state.alpha.resize(c);
      for (double& a : state.alpha) a = 0.1 + 99.9 * rng.uniform();
      const double delta = dirichlet_expected_information_drop(state);
      worst = std::min(worst, delta);
      ok &= delta >= -1e-12;
    }
    report("expected information drop non-negative", ok,
           "1000 posteriors, minimum " + format_g6(worst));
  }

  return all_ok;
}

}  // namespace epibench
