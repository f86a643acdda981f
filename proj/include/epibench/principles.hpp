#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epibench/data.hpp"
#include "epibench/methods.hpp"

namespace epibench {

/// Strictly nested index sets into a base training set, class-balanced
/// within one sample at every rung.
struct DataLadder {
  std::vector<std::vector<int>> rungs;
  std::vector<double> fractions;

  int n_rungs() const { return static_cast<int>(rungs.size()); }
};

/// One metric over the (data size x model size) grid. Rows follow the data
/// ladder (small to large), columns the submodel chain (narrow to wide).
struct HeatmapGrid {
  std::string metric;
  Matrix values;
  std::vector<long> sample_counts;
  std::vector<std::string> arch_labels;
};

/// Table-style aggregation: fraction of adjacent transitions in which the
/// epistemic metric moves the expected way. first = growing data does not
/// increase it; second = shrinking the model does not increase it.
struct ComplianceReport {
  double first_principle_pct = 0.0;
  double second_principle_pct = 0.0;
  int first_transitions = 0;
  int second_transitions = 0;
};

/// Growing prefixes of a seeded per-class shuffle: every rung extends the
/// previous one with new balanced samples. A final fraction of exactly 1
/// takes the whole set.
DataLadder build_data_ladder(const Dataset& ds, const std::vector<double>& fractions,
                             std::uint64_t seed);

/// Everything run_grid needs besides the methods themselves.
struct GridData {
  Dataset train;                 // normalized base training set the ladder indexes into
  Dataset validation;            // shared across all cells; may be empty
  Dataset test;                  // normalized with the train-set normalizer
  std::optional<Dataset> ood;    // likewise, when OOD scoring is wanted
};

struct MethodGrids {
  std::string method_name;
  std::map<std::string, HeatmapGrid> by_metric;
};

/// Per-cell metrics, recomputable in isolation from the same seeds.
struct CellMetrics {
  double mean_mi = 0.0;
  double mean_total_entropy = 0.0;
  double accuracy = 0.0;
  double brier = 0.0;
  double sce = 0.0;
  double ood_auroc = 0.0;  // only meaningful when an OOD set is present
  double mis_auroc = 0.0;
};

/// Train and evaluate one grid cell. The cell seed depends on the method
/// kind and the cell coordinates only, so any cell can be reproduced without
/// running the rest of the grid.
CellMetrics run_single_cell(const MethodSpec& spec, const Architecture& arch,
                            const GridData& data, const std::vector<int>& rung_indices,
                            std::uint64_t cell_seed, int sce_bins);

std::uint64_t cell_seed(std::uint64_t master_seed, MethodKind kind, int rung, int arch_index);

struct CellReport {
  std::string method;
  int rung = 0;
  int arch = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::string error;  // empty when the cell succeeded
};

/// The full experiment: every method over every (rung, architecture) cell,
/// identical training indices across methods per cell. Cells may run
/// concurrently; results do not depend on the job count. When `reports` is
/// given, per-cell failures are recorded there (the failing method's grids
/// are dropped) instead of thrown; timing lands there as well.
std::vector<MethodGrids> run_grid(const std::vector<MethodSpec>& methods,
                                  const GridData& data, const DataLadder& ladder,
                                  const std::vector<Architecture>& chain,
                                  std::uint64_t master_seed, int jobs, int sce_bins = 15,
                                  std::vector<CellReport>* reports = nullptr);

ComplianceReport compliance(const HeatmapGrid& mi_heatmap, double tolerance = 1e-12);

/// CSV with a width-label header row and a leading sample-count column;
/// values with six significant digits; byte-stable for identical grids.
void emit_heatmap_csv(const HeatmapGrid& grid, const std::string& path);
HeatmapGrid parse_heatmap_csv(const std::string& path);

}  // namespace epibench
