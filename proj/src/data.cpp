#include "epibench/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "epibench/errors.hpp"
#include "epibench/rng.hpp"

namespace epibench {

void Dataset::validate() const {
  if (features.rows != static_cast<int>(labels.size())) {
    throw InputError("dataset: feature rows and label count disagree");
  }
  if (n_classes < 1) throw InputError("dataset: n_classes must be >= 1");
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw InputError("dataset: label out of range");
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw InputError("dataset: non-finite feature");
  }
}

Normalizer Normalizer::fit(const Matrix& features) {
  Normalizer n;
  const int d = features.cols;
  n.mean.assign(d, 0.0);
  n.std_dev.assign(d, 0.0);
  if (features.rows == 0) {
    std::fill(n.std_dev.begin(), n.std_dev.end(), 1.0);
    return n;
  }
  for (int i = 0; i < features.rows; ++i) {
    const double* r = features.row(i);
    for (int j = 0; j < d; ++j) n.mean[j] += r[j];
  }
  for (double& m : n.mean) m /= features.rows;
  for (int i = 0; i < features.rows; ++i) {
    const double* r = features.row(i);
    for (int j = 0; j < d; ++j) {
      const double dev = r[j] - n.mean[j];
      n.std_dev[j] += dev * dev;
    }
  }
  for (double& s : n.std_dev) s = std::max(std::sqrt(s / features.rows), 1e-8);
  return n;
}

void Normalizer::apply(Matrix& features) const {
  if (features.cols != static_cast<int>(mean.size())) {
    throw InputError("normalizer: feature dimension mismatch");
  }
  for (int i = 0; i < features.rows; ++i) {
    double* r = features.row(i);
    for (int j = 0; j < features.cols; ++j) r[j] = (r[j] - mean[j]) / std_dev[j];
  }
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& field) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("idx: truncated reading " + field);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("idx: cannot open image file " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("idx: cannot open label file " + labels_path);

  const std::uint32_t img_magic = read_be_u32(img, "image magic");
  if (img_magic != 0x00000803u) {
    throw FormatError("idx: image magic mismatch (got " + std::to_string(img_magic) + ")");
  }
  const std::uint32_t n_images = read_be_u32(img, "image count");
  const std::uint32_t rows = read_be_u32(img, "image rows");
  const std::uint32_t cols = read_be_u32(img, "image cols");

  const std::uint32_t lab_magic = read_be_u32(lab, "label magic");
  if (lab_magic != 0x00000801u) {
    throw FormatError("idx: label magic mismatch (got " + std::to_string(lab_magic) + ")");
  }
  const std::uint32_t n_labels = read_be_u32(lab, "label count");
  if (n_images != n_labels) {
    throw FormatError("idx: image count " + std::to_string(n_images) +
                      " does not match label count " + std::to_string(n_labels));
  }

  const std::size_t pixels = std::size_t(rows) * cols;
  Dataset ds;
  ds.features = Matrix(static_cast<int>(n_images), static_cast<int>(pixels));
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!img) throw FormatError("idx: truncated pixel data at image " + std::to_string(i));
    double* r = ds.features.row(static_cast<int>(i));
    for (std::size_t j = 0; j < pixels; ++j) r[j] = buf[j] / 255.0;
  }
  ds.labels.resize(n_images);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    unsigned char y;
    lab.read(reinterpret_cast<char*>(&y), 1);
    if (!lab) throw FormatError("idx: truncated label data at index " + std::to_string(i));
    ds.labels[i] = y;
    max_label = std::max(max_label, static_cast<int>(y));
  }
  ds.n_classes = max_label + 1;
  ds.provenance = "idx:" + images_path;
  ds.validate();
  return ds;
}

Dataset load_embedding_csv(const std::string& path, int expected_classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("embedding csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  int d = 0;
  {
    std::stringstream hdr(line);
    std::string field;
    if (!std::getline(hdr, field, ',') || field != "label") {
      throw FormatError("embedding csv: header must start with 'label'");
    }
    while (std::getline(hdr, field, ',')) {
      if (field != "f" + std::to_string(d)) {
        throw FormatError("embedding csv: expected header column f" + std::to_string(d) +
                          ", got '" + field + "'");
      }
      ++d;
    }
    if (d == 0) throw FormatError("embedding csv: no feature columns in header");
  }

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    int col = 0;
    while (std::getline(row, field, ',')) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0') {
        throw FormatError("embedding csv: non-numeric cell '" + field + "' at line " +
                          std::to_string(line_no));
      }
      if (col == 0) {
        if (v != std::floor(v) || v < 0) {
          throw FormatError("embedding csv: bad label at line " + std::to_string(line_no));
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
      ++col;
    }
    if (col != d + 1) {
      throw FormatError("embedding csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(col) + " fields, expected " + std::to_string(d + 1));
    }
  }
  if (labels.empty()) throw FormatError("embedding csv: no data rows in " + path);

  Dataset ds;
  ds.features = Matrix(static_cast<int>(labels.size()), d);
  std::copy(values.begin(), values.end(), ds.features.data.begin());
  ds.labels = std::move(labels);
  const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  if (expected_classes > 0) {
    if (max_label >= expected_classes) {
      throw FormatError("embedding csv: label " + std::to_string(max_label) +
                        " out of range for " + std::to_string(expected_classes) + " classes");
    }
    ds.n_classes = expected_classes;
  } else {
    ds.n_classes = max_label + 1;
  }
  ds.provenance = "csv:" + path;
  ds.validate();
  return ds;
}

void save_embedding_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("embedding csv: cannot open " + path + " for writing");
  out << "label";
  for (int j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[40];
  for (int i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    const double* r = ds.features.row(i);
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", r[j]);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw FormatError("embedding csv: write to " + path + " failed");
}

Dataset gen_blobs(int n_classes, int dim, int n_per_class, double spread, std::uint64_t seed) {
  if (n_classes < 2) throw InputError("gen_blobs: need at least 2 classes");
  if (dim < 2) throw InputError("gen_blobs: need at least 2 dimensions");
  if (dim < n_classes) throw InputError("gen_blobs: dim must be >= n_classes for the vertex layout");
  if (n_per_class < 1) throw InputError("gen_blobs: n_per_class must be >= 1");
  if (spread < 0.0) throw InputError("gen_blobs: spread must be non-negative");

  // Vertex layout: basis vector e_c minus the common centroid, scaled.
  const double centroid = 1.0 / n_classes;
  RngStream rng(seed);
  Dataset ds;
  ds.n_classes = n_classes;
  ds.features = Matrix(n_classes * n_per_class, dim);
  ds.labels.resize(n_classes * n_per_class);
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int k = 0; k < n_per_class; ++k, ++row) {
      double* r = ds.features.row(row);
      for (int j = 0; j < dim; ++j) {
        const double center = j < n_classes ? spread * ((j == c ? 1.0 : 0.0) - centroid) : 0.0;
        r[j] = center + rng.gaussian();
      }
      ds.labels[row] = c;
    }
  }
  ds.provenance = "blobs";
  return ds;
}

SplitResult split_and_normalize(const Dataset& ds, double validation_fraction,
                                std::uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw InputError("split: validation_fraction must lie in [0, 1)");
  }
  ds.validate();
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  rng.shuffle(order);

  const int n_val = static_cast<int>(std::llround(validation_fraction * ds.size()));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  SplitResult r;
  r.train = subset(ds, train_idx);
  r.validation = subset(ds, val_idx);
  r.normalizer = Normalizer::fit(r.train.features);
  r.normalizer.apply(r.train.features);
  if (r.validation.size() > 0) r.normalizer.apply(r.validation.features);
  return r;
}

Dataset subset(const Dataset& ds, const std::vector<int>& indices) {
  Dataset out;
  out.n_classes = ds.n_classes;
  out.provenance = ds.provenance;
  out.features = Matrix(static_cast<int>(indices.size()), ds.dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int src = indices[i];
    if (src < 0 || src >= ds.size()) throw InputError("subset: index out of range");
    std::copy(ds.features.row(src), ds.features.row(src) + ds.dim(),
              out.features.row(static_cast<int>(i)));
    out.labels[i] = ds.labels[src];
  }
  return out;
}

}  // namespace epibench
