#pragma once

// Binary model container (all integers and floats little-endian):
//
//   offset  size      field
//   0       7         magic "NEMON1\0"
//   7       4         u32 n  (state dimension)
//   11      4         u32 r  (input dimension)
//   15      4         u32 q  (output dimension)
//   19      1         u8 activation tag (0 ReLU, 1 LeakyReLU, 2 Tanh, 3 SmoothReLU)
//   20      1         u8 output mode (0 y = Cx + Du, 1 y = Cx + b)
//   21      8         f64 activation parameter (slope / delta, else 0)
//   29      ...       f64 arrays, row-major: A (n*n), B (n*r), C (q*n), D (q*r),
//                     eta (n), b (q)
//
// D is all zeros in bias mode and b is all zeros in affine mode.

#include "nemon/network.hpp"

#include <iosfwd>
#include <string>

namespace nemon {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kModelMagic[7] = {'N', 'E', 'M', 'O', 'N', '1', '\0'};

void write_model(std::ostream& out, const ImplicitNetwork& net);
ImplicitNetwork read_model(std::istream& in);

void save_model(const std::string& path, const ImplicitNetwork& net);
ImplicitNetwork load_model(const std::string& path);

/// Human-readable equivalent of the binary container (JSON, round-trips exactly).
std::string model_to_json(const ImplicitNetwork& net);
ImplicitNetwork model_from_json(const std::string& text);

/// Raw matrix file: magic "NEMONT\0", u32 rows, u32 cols, f64 gamma, then
/// rows*cols f64 row-major. Used for the free training parameter T.
void save_raw_matrix(const std::string& path, const Matrix& m, double gamma);
Matrix load_raw_matrix(const std::string& path, double* gamma = nullptr);

}  // namespace nemon
