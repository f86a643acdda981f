#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epibench/methods.hpp"

namespace epibench {

struct SyntheticSpec {
  int classes = 3;
  int dims = 16;
  int n_per_class = 700;
  int test_n_per_class = 200;
  double spread = 2.5;
  double shift = 0.0;  // added to every feature before normalization
};

/// Fully resolved experiment description. Every module precondition that can
/// be checked without loading data is validated at parse time.
struct ExperimentConfig {
  std::string dataset_kind;  // synthetic | idx | embedding_csv
  SyntheticSpec synthetic;
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
  std::string csv_train, csv_test;
  int csv_classes = 0;  // 0 = infer from the training file

  std::string ood_kind = "none";  // none | synthetic | idx | embedding_csv
  SyntheticSpec ood_synthetic;
  std::string ood_idx_images, ood_idx_labels, ood_csv;

  std::vector<double> fractions;
  std::vector<int> base_widths;
  int chain_steps = 1;
  double dropout_p = 0.3;

  std::vector<MethodSpec> methods;
  std::vector<std::string> method_names;

  double validation_fraction = 0.2;
  std::uint64_t master_seed = 1234;
  std::string output_dir;
  int sce_bins = 15;

  void validate() const;
};

/// Flat `key = value` file with '#' comments and dotted section prefixes.
/// Unknown keys are errors.
ExperimentConfig parse_config(const std::string& path);

/// Deterministic serialization of the resolved config; its FNV-1a hash is
/// recorded in the run manifest.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace epibench
