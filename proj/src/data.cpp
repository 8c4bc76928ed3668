#include "nemon/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>

namespace nemon {

namespace {

// Anything larger than this is not a plausible dataset and is rejected
// before any allocation.
constexpr std::uint64_t kMaxIdxElements = std::uint64_t{1} << 36;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  return (static_cast<std::uint32_t>(bytes[at]) << 24) | (static_cast<std::uint32_t>(bytes[at + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 8) | static_cast<std::uint32_t>(bytes[at + 3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw IdxError(IdxErrorKind::Truncated, "idx: file shorter than the magic number");
  IdxTensor t;
  t.magic = read_be32(bytes, 0);
  std::size_t rank = 0;
  if (t.magic == kIdxImagesMagic) {
    rank = 3;
  } else if (t.magic == kIdxLabelsMagic) {
    rank = 1;
  } else {
    throw IdxError(IdxErrorKind::BadMagic, "idx: bad magic number");
  }
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw IdxError(IdxErrorKind::Truncated, "idx: truncated header");
  std::uint64_t elements = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    const std::uint32_t d = read_be32(bytes, 4 + 4 * k);
    t.dims.push_back(d);
    if (d != 0 && elements > kMaxIdxElements / d) {
      throw IdxError(IdxErrorKind::DimOverflow, "idx: dimensions overflow the element limit");
    }
    elements *= d;
  }
  if (elements > kMaxIdxElements) throw IdxError(IdxErrorKind::DimOverflow, "idx: dimensions overflow the element limit");
  if (bytes.size() - header < elements) throw IdxError(IdxErrorKind::Truncated, "idx: truncated payload");
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                   bytes.begin() + static_cast<std::ptrdiff_t>(header + elements));
  return t;
}

IdxTensor load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorKind::Io, "idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Matrix IdxTensor::images() const {
  if (magic != kIdxImagesMagic) throw DomainError("idx: not an image file");
  const Index count = dims[0];
  const Index pixels = static_cast<Index>(dims[1]) * static_cast<Index>(dims[2]);
  Matrix m(pixels, count);
  for (Index j = 0; j < count; ++j)
    for (Index i = 0; i < pixels; ++i) m(i, j) = payload[static_cast<std::size_t>(j * pixels + i)] / 255.0;
  return m;
}

std::vector<int> IdxTensor::labels() const {
  if (magic != kIdxLabelsMagic) throw DomainError("idx: not a label file");
  return std::vector<int>(payload.begin(), payload.end());
}

std::vector<std::uint8_t> encode_idx_images(const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                                            std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
    throw DimensionError("encode_idx_images: pixel count does not match dims");
  }
  std::vector<std::uint8_t> out;
  push_be32(out, kIdxImagesMagic);
  push_be32(out, count);
  push_be32(out, rows);
  push_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  push_be32(out, kIdxLabelsMagic);
  push_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IdxError(IdxErrorKind::Io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path, Index limit,
                         int num_classes, const std::string& split) {
  const IdxTensor images = load_idx(images_path);
  const IdxTensor labels = load_idx(labels_path);
  if (images.magic != kIdxImagesMagic) throw IdxError(IdxErrorKind::BadMagic, images_path + ": not an image file");
  if (labels.magic != kIdxLabelsMagic) throw IdxError(IdxErrorKind::BadMagic, labels_path + ": not a label file");
  if (images.dims[0] != labels.dims[0]) throw DimensionError("idx: image and label counts differ");
  Dataset d;
  d.inputs = images.images();
  d.labels = labels.labels();
  d.num_classes = num_classes;
  d.split = split;
  if (limit > 0 && limit < d.size()) d = d.slice(0, limit);
  d.validate();
  return d;
}

void SynthSpec::validate() const {
  if (classes < 2) throw DomainError("synth: need at least 2 classes");
  if (dim < 1) throw DomainError("synth: dim must be >= 1");
  if (classes > 2 && dim < classes) throw DomainError("synth: dim must be >= classes for k > 2");
  if (count < 1) throw DomainError("synth: count must be >= 1");
  if (!(margin >= 0.0) || !(sigma > 0.0)) throw DomainError("synth: margin >= 0 and sigma > 0 required");
}

Matrix synth_centers(const SynthSpec& spec) {
  spec.validate();
  Matrix centers = Matrix::Zero(spec.dim, spec.classes);
  if (spec.classes == 2) {
    const Vector dir = Vector::Constant(spec.dim, 1.0 / std::sqrt(static_cast<double>(spec.dim)));
    centers.col(0) = spec.margin * dir;
    centers.col(1) = -spec.margin * dir;
  } else {
    for (int k = 0; k < spec.classes; ++k) centers(k, k) = spec.margin * std::numbers::sqrt2;
  }
  return centers;
}

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed, const std::string& split) {
  const Matrix centers = synth_centers(spec);
  std::mt19937_64 rng(seed);
  // Box-Muller on the portable uniform; the standard normal_distribution
  // differs between library implementations.
  auto normal = [&]() {
    const double u1 = 1.0 - uniform01(rng());
    const double u2 = uniform01(rng());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  Dataset d;
  d.inputs.resize(spec.dim, spec.count);
  d.labels.resize(static_cast<std::size_t>(spec.count));
  d.num_classes = spec.classes;
  d.split = split;
  for (Index j = 0; j < spec.count; ++j) {
    const int label = static_cast<int>(j % spec.classes);
    d.labels[static_cast<std::size_t>(j)] = label;
    for (Index i = 0; i < spec.dim; ++i) d.inputs(i, j) = centers(i, label) + spec.sigma * normal();
  }
  return d;
}

}  // namespace nemon
