#include "epibench/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "epibench/errors.hpp"

using namespace epibench;

namespace {

void write_be_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx_images(const std::string& path, std::uint32_t magic, int n, int rows, int cols,
                      bool truncate = false) {
  std::ofstream out(path, std::ios::binary);
  write_be_u32(out, magic);
  write_be_u32(out, n);
  write_be_u32(out, rows);
  write_be_u32(out, cols);
  const int pixels = truncate ? n * rows * cols / 2 : n * rows * cols;
  for (int i = 0; i < pixels; ++i) {
    const unsigned char v = static_cast<unsigned char>((i * 37) % 256);
    out.write(reinterpret_cast<const char*>(&v), 1);
  }
}

void write_idx_labels(const std::string& path, std::uint32_t magic, const std::vector<int>& ys) {
  std::ofstream out(path, std::ios::binary);
  write_be_u32(out, magic);
  write_be_u32(out, static_cast<std::uint32_t>(ys.size()));
  for (int y : ys) {
    const unsigned char v = static_cast<unsigned char>(y);
    out.write(reinterpret_cast<const char*>(&v), 1);
  }
}

struct TempFiles {
  std::vector<std::string> paths;
  ~TempFiles() {
    for (const auto& p : paths) std::remove(p.c_str());
  }
};

}  // namespace

TEST_CASE("idx loader parses a well-formed pair and flattens 28x28 to 784") {
  TempFiles tmp;
  tmp.paths = {"ti.idx", "tl.idx"};
  write_idx_images("ti.idx", 0x00000803u, 3, 28, 28);
  write_idx_labels("tl.idx", 0x00000801u, {0, 2, 1});
  const Dataset ds = load_idx("ti.idx", "tl.idx");
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 784);
  CHECK(ds.n_classes == 3);
  CHECK(ds.labels[1] == 2);
  for (double v : ds.features.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // First pixel of image 0 is byte 0 -> 0/255.
  CHECK(ds.features(0, 0) == doctest::Approx(0.0));
  CHECK(ds.features(0, 1) == doctest::Approx(37.0 / 255.0));
}

TEST_CASE("idx loader rejects malformed files with named errors") {
  TempFiles tmp;
  tmp.paths = {"bi.idx", "bl.idx", "short.idx"};

  write_idx_images("bi.idx", 0x00000801u, 2, 4, 4);  // wrong magic for images
  write_idx_labels("bl.idx", 0x00000801u, {0, 1});
  CHECK_THROWS_WITH_AS(load_idx("bi.idx", "bl.idx"), doctest::Contains("image magic"), FormatError);

  write_idx_images("bi.idx", 0x00000803u, 2, 4, 4);
  write_idx_labels("bl.idx", 0x00000803u, {0, 1});  // image magic in the label file
  CHECK_THROWS_WITH_AS(load_idx("bi.idx", "bl.idx"), doctest::Contains("label magic"), FormatError);

  write_idx_labels("bl.idx", 0x00000801u, {0, 1, 1});  // count mismatch
  CHECK_THROWS_WITH_AS(load_idx("bi.idx", "bl.idx"), doctest::Contains("label count"), FormatError);

  write_idx_images("short.idx", 0x00000803u, 2, 4, 4, /*truncate=*/true);
  write_idx_labels("bl.idx", 0x00000801u, {0, 1});
  CHECK_THROWS_WITH_AS(load_idx("short.idx", "bl.idx"), doctest::Contains("truncated"), FormatError);
}

TEST_CASE("embedding csv parse, validation, and round trip") {
  TempFiles tmp;
  tmp.paths = {"emb.csv", "emb2.csv", "bad.csv"};
  {
    std::ofstream out("emb.csv");
    out << "label,f0,f1,f2\n";
    out << "0,0.25,-1.5,3.25\n";
    out << "1,0.5,2.125,-0.75\n";
  }
  const Dataset ds = load_embedding_csv("emb.csv");
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 3);
  CHECK(ds.n_classes == 2);
  CHECK(ds.features(0, 1) == doctest::Approx(-1.5));

  CHECK_THROWS_WITH_AS(load_embedding_csv("emb.csv", 1), doctest::Contains("out of range"),
                       FormatError);

  save_embedding_csv(ds, "emb2.csv");
  const Dataset back = load_embedding_csv("emb2.csv");
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.features.data.size(); ++i) {
    CHECK(back.features.data[i] == doctest::Approx(ds.features.data[i]).epsilon(1e-6));
  }

  {
    std::ofstream out("bad.csv");
    out << "label,f0,f1\n";
    out << "0,1.0\n";  // ragged
  }
  CHECK_THROWS_WITH_AS(load_embedding_csv("bad.csv"), doctest::Contains("line 2"), FormatError);
  {
    std::ofstream out("bad.csv");
    out << "label,f0,f1\n";
    out << "0,1.0,oops\n";
  }
  CHECK_THROWS_WITH_AS(load_embedding_csv("bad.csv"), doctest::Contains("non-numeric"), FormatError);
}

TEST_CASE("gen_blobs construction") {
  const Dataset ds = gen_blobs(3, 8, 100, 2.0, 42);
  CHECK(ds.size() == 300);
  CHECK(ds.dim() == 8);
  int per_class[3] = {0, 0, 0};
  for (int y : ds.labels) ++per_class[y];
  for (int c = 0; c < 3; ++c) CHECK(per_class[c] == 100);

  const Dataset again = gen_blobs(3, 8, 100, 2.0, 42);
  CHECK(ds.features.data == again.features.data);

  CHECK_THROWS_AS(gen_blobs(5, 3, 10, 1.0, 0), InputError);  // vertex layout needs d >= C
}

namespace {

// Nearest-centroid classifier; linear decision boundaries.
double centroid_accuracy(const Dataset& ds) {
  Matrix centroids(ds.n_classes, ds.dim());
  std::vector<int> counts(ds.n_classes, 0);
  for (int i = 0; i < ds.size(); ++i) {
    const double* r = ds.features.row(i);
    for (int j = 0; j < ds.dim(); ++j) centroids(ds.labels[i], j) += r[j];
    ++counts[ds.labels[i]];
  }
  for (int c = 0; c < ds.n_classes; ++c) {
    for (int j = 0; j < ds.dim(); ++j) centroids(c, j) /= counts[c];
  }
  int correct = 0;
  for (int i = 0; i < ds.size(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < ds.n_classes; ++c) {
      double d = 0.0;
      for (int j = 0; j < ds.dim(); ++j) {
        const double diff = ds.features(i, j) - centroids(c, j);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == ds.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / ds.size();
}

}  // namespace

TEST_CASE("blob separability tracks the spread") {
  CHECK(centroid_accuracy(gen_blobs(3, 8, 300, 10.0, 7)) >= 0.99);
  CHECK(centroid_accuracy(gen_blobs(3, 8, 300, 0.0, 7)) < 0.45);  // chance is 1/3
}

TEST_CASE("split_and_normalize") {
  const Dataset ds = gen_blobs(4, 6, 250, 3.0, 11);  // N = 1000
  const SplitResult r = split_and_normalize(ds, 0.2, 5);
  CHECK(r.train.size() == 800);
  CHECK(r.validation.size() == 200);

  // Train features standardized by construction.
  for (int j = 0; j < r.train.dim(); ++j) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < r.train.size(); ++i) mean += r.train.features(i, j);
    mean /= r.train.size();
    for (int i = 0; i < r.train.size(); ++i) {
      const double d = r.train.features(i, j) - mean;
      var += d * d;
    }
    var /= r.train.size();
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
  }

  const SplitResult none = split_and_normalize(ds, 0.0, 5);
  CHECK(none.validation.size() == 0);
  CHECK(none.train.size() == 1000);
}

TEST_CASE("normalizer floors constant features") {
  Matrix f(3, 2);
  f(0, 0) = f(1, 0) = f(2, 0) = 5.0;  // constant column
  f(0, 1) = 1.0;
  f(1, 1) = 2.0;
  f(2, 1) = 3.0;
  const Normalizer n = Normalizer::fit(f);
  CHECK(n.std_dev[0] == doctest::Approx(1e-8));
  Matrix g = f;
  n.apply(g);
  for (double v : g.data) CHECK(std::isfinite(v));
}
