#include "nemon/model_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace nemon {

namespace {

using json = nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

void get_bytes(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw FormatError(std::string("model file truncated while reading ") + what);
  }
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  get_bytes(in, reinterpret_cast<char*>(b), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, const char* what) {
  unsigned char b[8];
  get_bytes(in, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  return std::bit_cast<double>(bits);
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

Matrix get_matrix(std::istream& in, Index rows, Index cols, const char* what) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = get_f64(in, what);
  return m;
}

std::uint32_t checked_dim(Index v) {
  if (v < 0 || v > static_cast<Index>(std::numeric_limits<std::uint32_t>::max())) {
    throw FormatError("dimension does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix json_matrix(const json& rows, Index r, Index c, const char* what) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != r) {
    throw FormatError(std::string("json model: bad row count for ") + what);
  }
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) {
      throw FormatError(std::string("json model: bad column count for ") + what);
    }
    for (Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector json_vector(const json& arr, Index n, const char* what) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != n) {
    throw FormatError(std::string("json model: bad length for ") + what);
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

const char* activation_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::LeakyReLU:
      return "leaky_relu";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::SmoothReLU:
      return "smooth_relu";
  }
  return "?";
}

ImplicitNetwork assemble(Matrix a, Matrix b, Matrix c, Matrix d, Vector eta, Vector bias,
                         Activation act, OutputMode mode) {
  if (mode == OutputMode::BiasOnly) {
    return ImplicitNetwork::with_bias(std::move(a), std::move(b), std::move(c), std::move(bias),
                                      std::move(eta), act);
  }
  return ImplicitNetwork(std::move(a), std::move(b), std::move(c), std::move(d), std::move(eta), act);
}

}  // namespace

void write_model(std::ostream& out, const ImplicitNetwork& net) {
  out.write(kModelMagic, sizeof(kModelMagic));
  put_u32(out, checked_dim(net.state_dim()));
  put_u32(out, checked_dim(net.input_dim()));
  put_u32(out, checked_dim(net.output_dim()));
  const char tags[2] = {static_cast<char>(net.activation().kind()),
                        static_cast<char>(net.output_mode())};
  out.write(tags, 2);
  put_f64(out, net.activation().parameter());
  put_matrix(out, net.A());
  put_matrix(out, net.B());
  put_matrix(out, net.C());
  put_matrix(out, net.D());
  put_matrix(out, net.eta());
  put_matrix(out, net.bias());
  if (!out) throw FormatError("write_model: stream error");
}

ImplicitNetwork read_model(std::istream& in) {
  char magic[sizeof(kModelMagic)];
  get_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kModelMagic, sizeof(kModelMagic)) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  const Index n = get_u32(in, "n");
  const Index r = get_u32(in, "r");
  const Index q = get_u32(in, "q");
  unsigned char tags[2];
  get_bytes(in, reinterpret_cast<char*>(tags), 2, "tags");
  if (tags[1] > 1) throw FormatError("unknown output mode tag");
  const double param = get_f64(in, "activation parameter");
  Activation act = Activation::from_tag(tags[0], param);
  Matrix a = get_matrix(in, n, n, "A");
  Matrix b = get_matrix(in, n, r, "B");
  Matrix c = get_matrix(in, q, n, "C");
  Matrix d = get_matrix(in, q, r, "D");
  Vector eta = get_matrix(in, n, 1, "eta");
  Vector bias = get_matrix(in, q, 1, "b");
  return assemble(std::move(a), std::move(b), std::move(c), std::move(d), std::move(eta),
                  std::move(bias), act, static_cast<OutputMode>(tags[1]));
}

void save_model(const std::string& path, const ImplicitNetwork& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_model(out, net);
}

ImplicitNetwork load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_model(in);
}

std::string model_to_json(const ImplicitNetwork& net) {
  json j;
  j["format"] = "nemon-model";
  j["version"] = 1;
  j["dims"] = {{"n", net.state_dim()}, {"r", net.input_dim()}, {"q", net.output_dim()}};
  j["activation"] = {{"kind", activation_name(net.activation().kind())},
                     {"tag", static_cast<int>(net.activation().kind())},
                     {"parameter", net.activation().parameter()}};
  j["output_mode"] = net.output_mode() == OutputMode::AffineDU ? "affine" : "bias";
  j["A"] = matrix_json(net.A());
  j["B"] = matrix_json(net.B());
  j["C"] = matrix_json(net.C());
  j["D"] = matrix_json(net.D());
  j["eta"] = vector_json(net.eta());
  j["b"] = vector_json(net.bias());
  return j.dump(1);
}

ImplicitNetwork model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("json model: ") + e.what());
  }
  try {
    const Index n = j.at("dims").at("n").get<Index>();
    const Index r = j.at("dims").at("r").get<Index>();
    const Index q = j.at("dims").at("q").get<Index>();
    const auto tag = j.at("activation").at("tag").get<int>();
    if (tag < 0 || tag > 255) throw FormatError("json model: bad activation tag");
    Activation act =
        Activation::from_tag(static_cast<std::uint8_t>(tag), j.at("activation").at("parameter").get<double>());
    const std::string mode = j.at("output_mode").get<std::string>();
    if (mode != "affine" && mode != "bias") throw FormatError("json model: bad output_mode");
    return assemble(json_matrix(j.at("A"), n, n, "A"), json_matrix(j.at("B"), n, r, "B"),
                    json_matrix(j.at("C"), q, n, "C"), json_matrix(j.at("D"), q, r, "D"),
                    json_vector(j.at("eta"), n, "eta"), json_vector(j.at("b"), q, "b"), act,
                    mode == "affine" ? OutputMode::AffineDU : OutputMode::BiasOnly);
  } catch (const json::exception& e) {
    throw FormatError(std::string("json model: ") + e.what());
  }
}

void save_raw_matrix(const std::string& path, const Matrix& m, double gamma) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  static constexpr char magic[7] = {'N', 'E', 'M', 'O', 'N', 'T', '\0'};
  out.write(magic, sizeof(magic));
  put_u32(out, checked_dim(m.rows()));
  put_u32(out, checked_dim(m.cols()));
  put_f64(out, gamma);
  put_matrix(out, m);
  if (!out) throw FormatError("save_raw_matrix: stream error");
}

Matrix load_raw_matrix(const std::string& path, double* gamma) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[7];
  get_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, "NEMONT\0", 7) != 0) throw FormatError("not a raw matrix file (bad magic)");
  const Index rows = get_u32(in, "rows");
  const Index cols = get_u32(in, "cols");
  const double g = get_f64(in, "gamma");
  if (gamma != nullptr) *gamma = g;
  return get_matrix(in, rows, cols, "matrix");
}

}  // namespace nemon
