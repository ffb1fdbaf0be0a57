#include "getuda/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace getuda;

namespace {

// Nearest-centroid classifier: an SVD-free accuracy oracle.
struct Centroids {
  Matrix centers;  // D x k
};

Centroids fit_centroids(const DomainDataset& ds) {
  Centroids c;
  c.centers = Matrix(ds.dim(), ds.num_classes);
  std::vector<long> counts(ds.num_classes, 0);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const int y = ds.labels[j];
    ++counts[y];
    for (std::size_t i = 0; i < ds.dim(); ++i) c.centers(i, y) += ds.x(i, j);
  }
  for (int y = 0; y < ds.num_classes; ++y)
    if (counts[y] > 0)
      for (std::size_t i = 0; i < ds.dim(); ++i) c.centers(i, y) /= counts[y];
  return c;
}

double centroid_accuracy(const Centroids& c, const DomainDataset& ds) {
  long hits = 0;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < c.centers.cols(); ++y) {
      double d2 = 0;
      for (std::size_t i = 0; i < ds.dim(); ++i) {
        const double d = ds.x(i, j) - c.centers(i, y);
        d2 += d * d;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(y);
      }
    }
    if (best == ds.labels[j]) ++hits;
  }
  return static_cast<double>(hits) / ds.size();
}

std::filesystem::path temp_csv(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(SyntheticShift, PerClassCountsMatchConfig) {
  SyntheticConfig cfg;
  cfg.samples_per_class = 7;
  cfg.num_classes = 4;
  const auto [src, tgt] = generate_synthetic_shift(cfg);
  ASSERT_EQ(src.size(), 28u);
  ASSERT_EQ(tgt.size(), 28u);
  std::vector<int> counts_s(4, 0), counts_t(4, 0);
  for (int y : src.labels) ++counts_s[y];
  for (int y : tgt.labels) ++counts_t[y];
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(counts_s[c], 7);
    EXPECT_EQ(counts_t[c], 7);
  }
  src.validate();
  tgt.validate();
  EXPECT_EQ(src.domain, Domain::Source);
  EXPECT_EQ(tgt.domain, Domain::Target);
}

TEST(SyntheticShift, SeedRepetitionIsByteIdentical) {
  SyntheticConfig cfg;
  cfg.seed = 99;
  const auto [s1, t1] = generate_synthetic_shift(cfg);
  const auto [s2, t2] = generate_synthetic_shift(cfg);
  EXPECT_EQ(s1.x.data(), s2.x.data());
  EXPECT_EQ(t1.x.data(), t2.x.data());
  EXPECT_EQ(s1.labels, s2.labels);
}

TEST(SyntheticShift, TargetShiftIsRigid) {
  SyntheticConfig cfg;
  cfg.seed = 5;
  cfg.samples_per_class = 10;
  cfg.rotation_angle = 0.7;
  cfg.translation = 2.3;
  SyntheticConfig base = cfg;
  base.rotation_angle = 0.0;
  base.translation = 0.0;
  const auto tgt = generate_synthetic_shift(cfg).second;
  const auto pre = generate_synthetic_shift(base).second;
  ASSERT_EQ(tgt.size(), pre.size());
  for (std::size_t a = 0; a < tgt.size(); ++a)
    for (std::size_t b = a + 1; b < tgt.size(); ++b) {
      double da = 0, db = 0;
      for (std::size_t i = 0; i < tgt.dim(); ++i) {
        const double xa = tgt.x(i, a) - tgt.x(i, b);
        const double xb = pre.x(i, a) - pre.x(i, b);
        da += xa * xa;
        db += xb * xb;
      }
      EXPECT_NEAR(std::sqrt(da), std::sqrt(db), 1e-10);
    }
}

TEST(SyntheticShift, NoShiftMeansNoAccuracyGap) {
  double gap_sum = 0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.rotation_angle = 0.0;
    cfg.translation = 0.0;
    const auto [src, tgt] = generate_synthetic_shift(cfg);
    const auto c = fit_centroids(src);
    gap_sum += centroid_accuracy(c, src) - centroid_accuracy(c, tgt);
  }
  EXPECT_LE(std::fabs(gap_sum / 5.0), 0.02);
}

TEST(SyntheticShift, DefaultShiftDegradesSourceClassifier) {
  double src_acc = 0, tgt_acc = 0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.translation = 2.0 * cfg.noise;
    const auto [src, tgt] = generate_synthetic_shift(cfg);
    const auto c = fit_centroids(src);
    src_acc += centroid_accuracy(c, src);
    tgt_acc += centroid_accuracy(c, tgt);
  }
  EXPECT_LT(tgt_acc, src_acc);
}

TEST(SyntheticShift, ConfigValidation) {
  SyntheticConfig cfg;
  cfg.num_classes = 1;
  EXPECT_THROW(generate_synthetic_shift(cfg), ConfigError);
  cfg = SyntheticConfig{};
  cfg.num_classes = 11;
  cfg.input_dim = 10;
  EXPECT_THROW(generate_synthetic_shift(cfg), ConfigError);
  cfg = SyntheticConfig{};
  cfg.noise = -1.0;
  EXPECT_THROW(generate_synthetic_shift(cfg), ConfigError);
}

TEST(DatasetCsv, RoundTripIsExact) {
  SyntheticConfig cfg;
  cfg.samples_per_class = 5;
  const auto [src, tgt] = generate_synthetic_shift(cfg);
  const auto path = temp_csv("getuda_roundtrip.csv");
  save_dataset_csv(tgt, path.string());
  const auto loaded = load_dataset_csv(path.string(), tgt.num_classes);
  std::filesystem::remove(path);
  ASSERT_EQ(loaded.size(), tgt.size());
  EXPECT_EQ(loaded.x.data(), tgt.x.data());
  EXPECT_EQ(loaded.labels, tgt.labels);
  EXPECT_EQ(loaded.domain, Domain::Target);
}

TEST(DatasetCsv, LabelOutOfRangeNamesLine) {
  const auto path = temp_csv("getuda_badlabel.csv");
  {
    std::ofstream f(path);
    f << "domain,label,f0,f1\n";
    f << "source,0,1.0,2.0\n";
    f << "source,7,1.0,2.0\n";
  }
  try {
    load_dataset_csv(path.string(), 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(DatasetCsv, EmptyFileMissingHeader) {
  const auto path = temp_csv("getuda_empty.csv");
  { std::ofstream f(path); }
  try {
    load_dataset_csv(path.string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("missing header"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(DatasetCsv, RaggedRowNamesLine) {
  const auto path = temp_csv("getuda_ragged.csv");
  {
    std::ofstream f(path);
    f << "domain,label,f0,f1\n";
    f << "source,0,1.0\n";
  }
  try {
    load_dataset_csv(path.string(), 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number, 2);
  }
  std::filesystem::remove(path);
}

TEST(DatasetCsv, MixedDomainsRejected) {
  const auto path = temp_csv("getuda_mixed.csv");
  {
    std::ofstream f(path);
    f << "domain,label,f0\n";
    f << "source,0,1.0\n";
    f << "target,1,2.0\n";
  }
  EXPECT_THROW(load_dataset_csv(path.string(), 2), ParseError);
  std::filesystem::remove(path);
}

TEST(DatasetCsv, SourceRowWithoutLabelRejected) {
  const auto path = temp_csv("getuda_srcunlabeled.csv");
  {
    std::ofstream f(path);
    f << "domain,label,f0\n";
    f << "source,-1,1.0\n";
  }
  EXPECT_THROW(load_dataset_csv(path.string(), 2), ParseError);
  std::filesystem::remove(path);
}

TEST(DatasetCsv, UnlabeledTargetLoadsWithExplicitK) {
  const auto path = temp_csv("getuda_unlabeled.csv");
  {
    std::ofstream f(path);
    f << "domain,label,f0,f1\n";
    f << "target,-1,0.5,1.5\n";
    f << "target,-1,0.25,0.75\n";
  }
  const auto ds = load_dataset_csv(path.string(), 3);
  std::filesystem::remove(path);
  EXPECT_EQ(ds.num_classes, 3);
  EXPECT_EQ(ds.labels, (std::vector<int>{-1, -1}));
  // Without k the class count cannot be inferred.
  {
    std::ofstream f(path);
    f << "domain,label,f0,f1\n";
    f << "target,-1,0.5,1.5\n";
  }
  EXPECT_THROW(load_dataset_csv(path.string()), ParseError);
  std::filesystem::remove(path);
}
