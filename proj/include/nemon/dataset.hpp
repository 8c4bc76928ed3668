#pragma once

#include "nemon/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nemon {

/// Column-major sample matrix: inputs is r x m, one sample per column.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::string split;

  Index size() const { return inputs.cols(); }
  Index input_dim() const { return inputs.rows(); }

  /// Throws DomainError when empty, sizes disagree, or a label is out of range.
  void validate() const;

  /// Columns [begin, begin + count).
  Dataset slice(Index begin, Index count) const;
};

/// Portable 53-bit uniform in [0, 1) from a 64-bit Mersenne Twister draw.
/// The standard distributions are implementation-defined; these are not.
double uniform01(std::uint64_t draw);

}  // namespace nemon
