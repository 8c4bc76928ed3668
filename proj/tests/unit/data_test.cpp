#include "nemon/data.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>

namespace nemon {
namespace {

std::vector<std::uint8_t> image_fixture() {
  return encode_idx_images({0, 255, 51, 102, 255, 0, 0, 204}, 2, 2, 2);
}

IdxErrorKind error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_idx(bytes);
  } catch (const IdxError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected IdxError";
  return IdxErrorKind::Io;
}

TEST(Idx, ParsesImages) {
  const IdxTensor t = parse_idx(image_fixture());
  EXPECT_EQ(t.magic, kIdxImagesMagic);
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{2, 2, 2}));
  const Matrix m = t.images();
  ASSERT_EQ(m.rows(), 4);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(m(2, 0), 0.2);
  EXPECT_DOUBLE_EQ(m(3, 1), 0.8);
  EXPECT_EQ(m(0, 1), 1.0);
}

TEST(Idx, ExactBytes) {
  const std::vector<std::uint8_t> bytes = encode_idx_labels({3, 1, 4});
  const std::vector<std::uint8_t> expected{0, 0, 8, 1, 0, 0, 0, 3, 3, 1, 4};
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(parse_idx(bytes).labels(), (std::vector<int>{3, 1, 4}));
  const std::vector<std::uint8_t> img = image_fixture();
  EXPECT_EQ(std::vector<std::uint8_t>(img.begin(), img.begin() + 16),
            (std::vector<std::uint8_t>{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2}));
}

TEST(Idx, DistinctErrors) {
  std::vector<std::uint8_t> bad = image_fixture();
  bad[2] = 0x09;
  bad[3] = 0x99;
  EXPECT_EQ(error_kind(bad), IdxErrorKind::BadMagic);
  std::vector<std::uint8_t> short_payload = image_fixture();
  short_payload.pop_back();
  EXPECT_EQ(error_kind(short_payload), IdxErrorKind::Truncated);
  EXPECT_EQ(error_kind({0, 0, 8, 3, 0, 0}), IdxErrorKind::Truncated);
  EXPECT_EQ(error_kind({0, 0, 8}), IdxErrorKind::Truncated);
  const std::vector<std::uint8_t> huge{0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
  EXPECT_EQ(error_kind(huge), IdxErrorKind::DimOverflow);
  try {
    load_idx("/nonexistent/file");
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxErrorKind::Io);
  }
}

TEST(Idx, DatasetRoundTripThroughFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "nemon_idx_test";
  std::filesystem::create_directories(dir);
  write_bytes((dir / "img").string(), image_fixture());
  write_bytes((dir / "lbl").string(), encode_idx_labels({7, 2}));
  const Dataset d = load_idx_dataset((dir / "img").string(), (dir / "lbl").string(), 0, 10, "test");
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.labels, (std::vector<int>{7, 2}));
  const Dataset one = load_idx_dataset((dir / "img").string(), (dir / "lbl").string(), 1, 10, "test");
  EXPECT_EQ(one.size(), 1);
  write_bytes((dir / "lbl3").string(), encode_idx_labels({7, 2, 1}));
  EXPECT_THROW(load_idx_dataset((dir / "img").string(), (dir / "lbl3").string(), 0, 10, "x"), DimensionError);
  write_bytes((dir / "bad").string(), encode_idx_labels({7, 12}));
  EXPECT_THROW(load_idx_dataset((dir / "img").string(), (dir / "bad").string(), 0, 10, "x"), DomainError);
  std::filesystem::remove_all(dir);
}

TEST(Synth, DeterministicAndValidated) {
  SynthSpec spec;
  const Dataset a = synth_dataset(spec, 3);
  const Dataset b = synth_dataset(spec, 3);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.inputs, synth_dataset(spec, 4).inputs);
  spec.count = 0;
  EXPECT_THROW(synth_dataset(spec, 3), DomainError);
  spec = SynthSpec{};
  spec.classes = 5;
  spec.dim = 3;
  EXPECT_THROW(synth_dataset(spec, 3), DomainError);
}

TEST(Synth, MarginIsDistanceToBoundary) {
  for (int classes : {2, 4}) {
    SynthSpec spec;
    spec.classes = classes;
    spec.dim = 6;
    spec.margin = 2.0;
    const Matrix c = synth_centers(spec);
    for (int i = 0; i < classes; ++i)
      for (int j = i + 1; j < classes; ++j) EXPECT_NEAR((c.col(i) - c.col(j)).norm(), 4.0, 1e-12);
  }
}

TEST(Synth, LinearlySeparableAtThreeSigma) {
  // Offline logistic regression by plain gradient descent as the oracle.
  SynthSpec spec;
  spec.margin = 3.0;
  spec.count = 1000;
  const Dataset d = synth_dataset(spec, 5);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.dim);
  double b = 0.0;
  for (int it = 0; it < 300; ++it) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(spec.dim);
    double gb = 0.0;
    for (Index j = 0; j < d.size(); ++j) {
      const double y = d.labels[static_cast<std::size_t>(j)] == 0 ? 1.0 : 0.0;
      const double p = 1.0 / (1.0 + std::exp(-(w.dot(d.inputs.col(j)) + b)));
      gw += (p - y) * d.inputs.col(j);
      gb += p - y;
    }
    w -= 0.1 * gw / static_cast<double>(d.size());
    b -= 0.1 * gb / static_cast<double>(d.size());
  }
  int correct = 0;
  for (Index j = 0; j < d.size(); ++j) {
    const bool pred0 = w.dot(d.inputs.col(j)) + b > 0;
    correct += pred0 == (d.labels[static_cast<std::size_t>(j)] == 0) ? 1 : 0;
  }
  EXPECT_GE(correct / static_cast<double>(d.size()), 0.99);
}

TEST(DatasetTest, ValidateAndSlice) {
  Dataset d;
  d.inputs = Matrix::Zero(2, 3);
  d.labels = {0, 1, 1};
  d.num_classes = 2;
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.slice(1, 2).labels, (std::vector<int>{1, 1}));
  EXPECT_THROW(d.slice(2, 2), DimensionError);
  d.labels = {0, 1};
  EXPECT_THROW(d.validate(), DimensionError);
  d.labels = {0, 1, 2};
  EXPECT_THROW(d.validate(), DomainError);
  EXPECT_EQ(uniform01(0), 0.0);
  EXPECT_LT(uniform01(~std::uint64_t{0}), 1.0);
}

}  // namespace
}  // namespace nemon
