#include "epibench/principles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "epibench/errors.hpp"
#include "epibench/eval_metrics.hpp"
#include "epibench/parallel.hpp"
#include "epibench/rng.hpp"
#include "epibench/uncertainty.hpp"

namespace epibench {

DataLadder build_data_ladder(const Dataset& ds, const std::vector<double>& fractions,
                             std::uint64_t seed) {
  ds.validate();
  if (fractions.empty()) throw InputError("data ladder: need at least one fraction");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0.0 || fractions[i] > 1.0) {
      throw InputError("data ladder: fractions must lie in (0, 1]");
    }
    if (i > 0 && fractions[i] <= fractions[i - 1]) {
      throw InputError("data ladder: fractions must be strictly ascending");
    }
  }

  const int c = ds.n_classes;
  std::vector<std::vector<int>> by_class(c);
  for (int i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  RngStream rng(seed);
  for (auto& idx : by_class) rng.shuffle(idx);

  DataLadder ladder;
  ladder.fractions = fractions;
  for (double f : fractions) {
    std::vector<int> rung;
    if (f == 1.0) {
      rung.resize(ds.size());
      std::iota(rung.begin(), rung.end(), 0);
    } else {
      const long n = std::llround(f * ds.size());
      if (n < c) throw InputError("data ladder: smallest rung must hold one sample per class");
      for (int cls = 0; cls < c; ++cls) {
        // ceil((n - cls) / c): per-class counts within one of each other and
        // non-decreasing in n, which keeps the rungs nested.
        const long want = (n - cls + c - 1) / c;
        if (want > static_cast<long>(by_class[cls].size())) {
          throw InputError("data ladder: fraction " + std::to_string(f) +
                           " exceeds the balanced capacity of class " + std::to_string(cls));
        }
        rung.insert(rung.end(), by_class[cls].begin(), by_class[cls].begin() + want);
      }
      std::sort(rung.begin(), rung.end());
    }
    ladder.rungs.push_back(std::move(rung));
  }
  return ladder;
}

std::uint64_t cell_seed(std::uint64_t master_seed, MethodKind kind, int rung, int arch_index) {
  return mix_seed(master_seed, static_cast<std::uint64_t>(kind) + 1,
                  static_cast<std::uint64_t>(rung), static_cast<std::uint64_t>(arch_index));
}

CellMetrics run_single_cell(const MethodSpec& spec, const Architecture& arch,
                            const GridData& data, const std::vector<int>& rung_indices,
                            std::uint64_t seed, int sce_bins) {
  const Dataset cell_train = subset(data.train, rung_indices);
  const Predictor pred = train_method(spec, arch, cell_train, data.validation, seed, 1);

  const int n_test = data.test.size();
  EvalBatch batch;
  batch.probs = Matrix(n_test, arch.n_classes);
  batch.labels = data.test.labels;
  std::vector<double> mi_scores(n_test);
  std::vector<bool> misclassified(n_test);

  CellMetrics m;
  Vector x(data.test.dim());
  for (int i = 0; i < n_test; ++i) {
    std::copy(data.test.features.row(i), data.test.features.row(i) + data.test.dim(), x.begin());
    const Prediction p = predict(pred, x);
    const UncertaintyTriple t = p.alpha ? dirichlet_mutual_information(*p.alpha)
                                        : mutual_information(p.member_probs);
    const Vector mean = predictive_mean(p.member_probs);
    std::copy(mean.begin(), mean.end(), batch.probs.row(i));
    m.mean_mi += t.mutual_information;
    m.mean_total_entropy += t.total_entropy;
    mi_scores[i] = t.mutual_information;
    misclassified[i] = argmax_row(mean.data(), arch.n_classes) != data.test.labels[i];
  }
  m.mean_mi /= n_test;
  m.mean_total_entropy /= n_test;
  m.accuracy = accuracy(batch);
  m.brier = brier(batch);
  m.sce = sce(batch, sce_bins);

  bool any_mis = false, all_mis = true;
  for (bool b : misclassified) {
    any_mis |= b;
    all_mis &= b;
  }
  m.mis_auroc = (any_mis && !all_mis) ? auroc(mi_scores, misclassified) : 0.5;

  if (data.ood) {
    std::vector<double> scores = mi_scores;
    std::vector<bool> is_ood(n_test, false);
    Vector xo(data.ood->dim());
    for (int i = 0; i < data.ood->size(); ++i) {
      std::copy(data.ood->features.row(i), data.ood->features.row(i) + data.ood->dim(), xo.begin());
      const Prediction p = predict(pred, xo);
      const UncertaintyTriple t = p.alpha ? dirichlet_mutual_information(*p.alpha)
                                          : mutual_information(p.member_probs);
      scores.push_back(t.mutual_information);
      is_ood.push_back(true);
    }
    m.ood_auroc = auroc(scores, is_ood);
  }
  return m;
}

std::vector<MethodGrids> run_grid(const std::vector<MethodSpec>& methods, const GridData& data,
                                  const DataLadder& ladder, const std::vector<Architecture>& chain,
                                  std::uint64_t master_seed, int jobs, int sce_bins,
                                  std::vector<CellReport>* reports) {
  if (methods.empty()) throw InputError("run_grid: no methods");
  if (ladder.n_rungs() < 1 || chain.empty()) throw InputError("run_grid: empty grid axis");
  data.train.validate();
  data.test.validate();
  if (data.test.dim() != data.train.dim()) throw InputError("run_grid: test dimension mismatch");
  if (data.ood && data.ood->dim() != data.train.dim()) {
    throw InputError("run_grid: ood dimension mismatch");
  }
  for (const MethodSpec& spec : methods) spec.validate(data.train.n_classes);

  const int n_rungs = ladder.n_rungs();
  const int n_archs = static_cast<int>(chain.size());
  for (const Architecture& a : chain) {
    if (a.input_dim != data.train.dim()) throw InputError("run_grid: chain input_dim mismatch");
    if (a.n_classes != data.train.n_classes) throw InputError("run_grid: chain n_classes mismatch");
  }

  const int cells_per_method = n_rungs * n_archs;
  std::vector<CellMetrics> results(methods.size() * cells_per_method);
  std::vector<CellReport> cell_reports(results.size());

  parallel_for(static_cast<int>(results.size()), jobs, [&](int task) {
    const int mi = task / cells_per_method;
    const int cell = task % cells_per_method;
    const int r = cell / n_archs;
    const int a = cell % n_archs;
    CellReport& rep = cell_reports[task];
    rep.method = method_kind_name(methods[mi].kind);
    rep.rung = r;
    rep.arch = a;
    rep.seed = cell_seed(master_seed, methods[mi].kind, r, a);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      results[task] = run_single_cell(methods[mi], chain[a], data, ladder.rungs[r], rep.seed, sce_bins);
    } catch (const std::exception& e) {
      rep.error = e.what();
    }
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<bool> method_failed(methods.size(), false);
  for (std::size_t task = 0; task < cell_reports.size(); ++task) {
    const CellReport& rep = cell_reports[task];
    if (rep.error.empty()) continue;
    const int mi = static_cast<int>(task) / cells_per_method;
    method_failed[mi] = true;
    if (!reports) {
      throw TrainingError("grid cell (method " + rep.method + ", rung " + std::to_string(rep.rung) +
                              ", arch " + std::to_string(rep.arch) + ") failed: " + rep.error,
                          -1);
    }
  }
  if (reports) *reports = cell_reports;

  std::vector<long> sample_counts;
  for (const auto& rung : ladder.rungs) sample_counts.push_back(static_cast<long>(rung.size()));
  std::vector<std::string> labels;
  for (const Architecture& a : chain) labels.push_back(a.label());

  const std::vector<std::pair<std::string, double CellMetrics::*>> metric_fields = {
      {"mean_mi", &CellMetrics::mean_mi},
      {"mean_total_entropy", &CellMetrics::mean_total_entropy},
      {"accuracy", &CellMetrics::accuracy},
      {"brier", &CellMetrics::brier},
      {"sce", &CellMetrics::sce},
      {"ood_auroc", &CellMetrics::ood_auroc},
      {"mis_auroc", &CellMetrics::mis_auroc},
  };

  std::vector<MethodGrids> out(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    out[mi].method_name = method_kind_name(methods[mi].kind);
    if (method_failed[mi]) continue;  // no partial heatmaps for failed methods
    for (const auto& [name, field] : metric_fields) {
      if (name == "ood_auroc" && !data.ood) continue;
      HeatmapGrid grid;
      grid.metric = name;
      grid.values = Matrix(n_rungs, n_archs);
      grid.sample_counts = sample_counts;
      grid.arch_labels = labels;
      for (int r = 0; r < n_rungs; ++r) {
        for (int a = 0; a < n_archs; ++a) {
          grid.values(r, a) = results[mi * cells_per_method + r * n_archs + a].*field;
        }
      }
      out[mi].by_metric.emplace(name, std::move(grid));
    }
  }
  return out;
}

ComplianceReport compliance(const HeatmapGrid& mi_heatmap, double tolerance) {
  const Matrix& v = mi_heatmap.values;
  if (v.rows * v.cols <= 1) throw InputError("compliance: grid must have more than one cell");
  ComplianceReport rep;
  int first_ok = 0, second_ok = 0;
  // First principle: more data (next row) must not increase the metric.
  for (int a = 0; a < v.cols; ++a) {
    for (int r = 0; r + 1 < v.rows; ++r) {
      ++rep.first_transitions;
      if (v(r + 1, a) <= v(r, a) + tolerance) ++first_ok;
    }
  }
  // Second principle: the smaller model (previous column) must not exceed.
  for (int r = 0; r < v.rows; ++r) {
    for (int a = 0; a + 1 < v.cols; ++a) {
      ++rep.second_transitions;
      if (v(r, a) <= v(r, a + 1) + tolerance) ++second_ok;
    }
  }
  if (rep.first_transitions > 0) {
    rep.first_principle_pct = static_cast<double>(first_ok) / rep.first_transitions;
  }
  if (rep.second_transitions > 0) {
    rep.second_principle_pct = static_cast<double>(second_ok) / rep.second_transitions;
  }
  return rep;
}

namespace {

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void emit_heatmap_csv(const HeatmapGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("heatmap csv: cannot open " + path + " for writing");
  out << "samples";
  for (const std::string& l : grid.arch_labels) out << ',' << l;
  out << "\n";
  for (int r = 0; r < grid.values.rows; ++r) {
    out << grid.sample_counts[r];
    for (int a = 0; a < grid.values.cols; ++a) out << ',' << format_g6(grid.values(r, a));
    out << "\n";
  }
  if (!out) throw FormatError("heatmap csv: write to " + path + " failed");
}

HeatmapGrid parse_heatmap_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("heatmap csv: cannot open " + path);
  HeatmapGrid grid;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("heatmap csv: empty file " + path);
  {
    std::stringstream hdr(line);
    std::string field;
    if (!std::getline(hdr, field, ',') || field != "samples") {
      throw FormatError("heatmap csv: header must start with 'samples'");
    }
    while (std::getline(hdr, field, ',')) grid.arch_labels.push_back(field);
  }
  const int n_archs = static_cast<int>(grid.arch_labels.size());
  if (n_archs == 0) throw FormatError("heatmap csv: no architecture columns");
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    if (!std::getline(row, field, ',')) continue;
    grid.sample_counts.push_back(std::stol(field));
    int got = 0;
    while (std::getline(row, field, ',')) {
      values.push_back(std::stod(field));
      ++got;
    }
    if (got != n_archs) {
      throw FormatError("heatmap csv: row " + std::to_string(grid.sample_counts.size()) +
                        " has " + std::to_string(got) + " values, expected " +
                        std::to_string(n_archs));
    }
  }
  grid.values = Matrix(static_cast<int>(grid.sample_counts.size()), n_archs);
  std::copy(values.begin(), values.end(), grid.values.data.begin());
  return grid;
}

}  // namespace epibench
