#pragma once

// IDX (MNIST container) reading and writing, plus seeded synthetic blobs.

#include "nemon/dataset.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nemon {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

enum class IdxErrorKind { Io, BadMagic, Truncated, DimOverflow };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const { return kind_; }

 private:
  IdxErrorKind kind_;
};

struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  /// Image files only: (rows * cols) x count, bytes scaled by 1/255.
  Matrix images() const;
  /// Label files only.
  std::vector<int> labels() const;
};

/// Parses an unsigned-byte IDX file: big-endian magic 0x803 (3 dims) or
/// 0x801 (1 dim), big-endian u32 dims, raw payload. Trailing bytes are ignored.
IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);
IdxTensor load_idx(const std::string& path);

std::vector<std::uint8_t> encode_idx_images(const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                                            std::uint32_t rows, std::uint32_t cols);
std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels);
void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// Images and labels from a pair of IDX files; `limit` > 0 keeps the first
/// `limit` samples in file order.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path, Index limit,
                         int num_classes, const std::string& split);

struct SynthSpec {
  int classes = 2;
  Index dim = 10;
  Index count = 500;
  double margin = 3.0;  // distance from each class mean to the nearest decision boundary
  double sigma = 1.0;   // per-coordinate standard deviation

  void validate() const;
};

/// Gaussian blobs. Two classes sit at +-margin along (1, ..., 1)/sqrt(dim);
/// k > 2 classes sit at margin * sqrt(2) along the first k coordinate axes.
/// Sample j has label j mod classes.
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed, const std::string& split = "synthetic");

/// Class means used by synth_dataset, one per column.
Matrix synth_centers(const SynthSpec& spec);

}  // namespace nemon
