#include "nemon/dataset.hpp"

namespace nemon {

void Dataset::validate() const {
  if (inputs.cols() < 1) throw DomainError("dataset '" + split + "' is empty");
  if (static_cast<Index>(labels.size()) != inputs.cols()) {
    throw DimensionError("dataset '" + split + "': label count does not match sample count");
  }
  if (num_classes < 1) throw DomainError("dataset '" + split + "': num_classes must be >= 1");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw DomainError("dataset '" + split + "': label out of range");
  }
  if (!inputs.allFinite()) throw DomainError("dataset '" + split + "': non-finite input");
}

Dataset Dataset::slice(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) {
    throw DimensionError("Dataset::slice: range out of bounds");
  }
  Dataset out;
  out.inputs = inputs.middleCols(begin, count);
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  out.num_classes = num_classes;
  out.split = split;
  return out;
}

double uniform01(std::uint64_t draw) { return static_cast<double>(draw >> 11) * 0x1.0p-53; }

}  // namespace nemon
