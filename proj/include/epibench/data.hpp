#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epibench/linalg.hpp"

namespace epibench {

struct Dataset {
  Matrix features;           // N x d
  std::vector<int> labels;   // in [0, n_classes)
  int n_classes = 0;
  std::string provenance;

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  void validate() const;
};

/// Per-feature standardization fitted on training data only; the same
/// transform is then applied to validation, test, and OOD sets.
struct Normalizer {
  Vector mean;
  Vector std_dev;  // floored at 1e-8

  static Normalizer fit(const Matrix& features);
  void apply(Matrix& features) const;
};

/// Big-endian IDX pair: images (magic 0x00000803, dims N x rows x cols) and
/// labels (magic 0x00000801, dim N). Pixels are scaled to [0,1] and images
/// flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CSV with header "label,f0,...,f{d-1}". When expected_classes > 0, labels
/// must fall below it; otherwise the class count is inferred as max+1.
Dataset load_embedding_csv(const std::string& path, int expected_classes = 0);
void save_embedding_csv(const Dataset& ds, const std::string& path);

/// Gaussian blobs: class c sits at a centered orthonormal-basis vertex scaled
/// by `spread` (requires d >= C), unit isotropic noise, n_per_class each.
Dataset gen_blobs(int n_classes, int dim, int n_per_class, double spread, std::uint64_t seed);

struct SplitResult {
  Dataset train;
  Dataset validation;
  Normalizer normalizer;
};

/// Seeded shuffle split; the normalizer is fitted on the train part and
/// already applied to both returned sets.
SplitResult split_and_normalize(const Dataset& ds, double validation_fraction,
                                std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<int>& indices);

}  // namespace epibench
