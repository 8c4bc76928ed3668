#include "nemon/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nemon {

namespace {

void require_square(const Matrix& a, Index n, const char* op) {
  if (a.rows() != a.cols() || a.rows() != n) {
    std::ostringstream os;
    os << op << ": expected " << n << "x" << n << " matrix, got " << a.rows() << "x"
       << a.cols();
    throw DimensionError(os.str());
  }
}

void require_positive(const Vector& eta, const char* op) {
  if (eta.size() == 0) throw DimensionError(std::string(op) + ": empty weight vector");
  for (Index i = 0; i < eta.size(); ++i) {
    if (!(eta(i) > 0.0) || !std::isfinite(eta(i))) {
      throw DomainError(std::string(op) + ": weights must be finite and strictly positive");
    }
  }
}

// Row i of the closed form: sum_{j != i} |a_ij| eta_j / eta_i.
double offdiag_row_sum(const Matrix& a, const Vector& eta, Index i) {
  double r = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    if (j != i) r += std::abs(a(i, j)) * eta(j);
  }
  return r / eta(i);
}

double linf_norm(const Matrix& a, const Vector& eta) {
  double best = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    best = std::max(best, std::abs(a(i, i)) + offdiag_row_sum(a, eta, i));
  }
  return best;
}

double linf_measure(const Matrix& a, const Vector& eta) {
  double best = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < a.rows(); ++i) {
    best = std::max(best, a(i, i) + offdiag_row_sum(a, eta, i));
  }
  return best;
}

// The weighted l1 quantities are the l-infinity ones of the transpose with
// inverted weights: ||A||_{1,[eta]} = ||A^T||_{inf,[eta]^-1} with eta -> 1/eta.
Vector inverted(const Vector& eta) { return eta.cwiseInverse(); }

double symmetric_max_eigenvalue(const Matrix& s) { return jacobi_eigen(s).values.maxCoeff(); }

}  // namespace

NormSpec::NormSpec(NormKind kind, Vector eta, Matrix p)
    : kind_(kind), eta_(std::move(eta)), p_(std::move(p)) {}

NormSpec NormSpec::l1(Vector eta) {
  require_positive(eta, "NormSpec::l1");
  return NormSpec(NormKind::L1Weighted, std::move(eta), Matrix());
}

NormSpec NormSpec::linf(Vector eta) {
  require_positive(eta, "NormSpec::linf");
  return NormSpec(NormKind::LinfWeighted, std::move(eta), Matrix());
}

NormSpec NormSpec::l2(Matrix p_matrix) {
  if (p_matrix.rows() == 0 || p_matrix.rows() != p_matrix.cols()) {
    throw DimensionError("NormSpec::l2: P must be square and non-empty");
  }
  if (!p_matrix.allFinite()) throw DomainError("NormSpec::l2: P has non-finite entries");
  if ((p_matrix - p_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("NormSpec::l2: P is not symmetric");
  }
  SymmetricEigen eig = jacobi_eigen(p_matrix);
  if (!(eig.values.minCoeff() > 0.0)) {
    throw DomainError("NormSpec::l2: P is not positive definite");
  }
  NormSpec ns(NormKind::L2Weighted, Vector(), std::move(p_matrix));
  const Vector root = eig.values.cwiseSqrt();
  ns.p_sqrt_ = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  ns.p_inv_sqrt_ = eig.vectors * root.cwiseInverse().asDiagonal() * eig.vectors.transpose();
  return ns;
}

Index NormSpec::dim() const { return kind_ == NormKind::L2Weighted ? p_.rows() : eta_.size(); }

double vector_norm(const Vector& x, const NormSpec& ns) {
  if (x.size() != ns.dim()) throw DimensionError("vector_norm: dimension mismatch");
  switch (ns.kind()) {
    case NormKind::L1Weighted:
      return ns.eta().cwiseProduct(x.cwiseAbs()).sum();
    case NormKind::LinfWeighted:
      return x.cwiseAbs().cwiseQuotient(ns.eta()).maxCoeff();
    case NormKind::L2Weighted:
      return std::sqrt(std::max(0.0, x.dot(ns.p_matrix() * x)));
  }
  return 0.0;
}

double matrix_norm(const Matrix& a, const NormSpec& ns) {
  require_square(a, ns.dim(), "matrix_norm");
  switch (ns.kind()) {
    case NormKind::L1Weighted:
      return linf_norm(a.transpose(), inverted(ns.eta()));
    case NormKind::LinfWeighted:
      return linf_norm(a, ns.eta());
    case NormKind::L2Weighted:
      return spectral_norm(ns.p_sqrt_ * a * ns.p_inv_sqrt_);
  }
  return 0.0;
}

double matrix_measure(const Matrix& a, const NormSpec& ns) {
  require_square(a, ns.dim(), "matrix_measure");
  switch (ns.kind()) {
    case NormKind::L1Weighted:
      return linf_measure(a.transpose(), inverted(ns.eta()));
    case NormKind::LinfWeighted:
      return linf_measure(a, ns.eta());
    case NormKind::L2Weighted: {
      // (P A P^-1 + A^T)/2 is similar to the symmetric part of P^{1/2} A P^{-1/2}.
      const Matrix similar = ns.p_sqrt_ * a * ns.p_inv_sqrt_;
      return symmetric_max_eigenvalue(0.5 * (similar + similar.transpose()));
    }
  }
  return 0.0;
}

double measure_limit_oracle(const Matrix& a, const NormSpec& ns, double h) {
  if (!(h > 0.0)) throw DomainError("measure_limit_oracle: h must be positive");
  require_square(a, ns.dim(), "measure_limit_oracle");
  const Matrix shifted = Matrix::Identity(a.rows(), a.cols()) + h * a;
  return (matrix_norm(shifted, ns) - 1.0) / h;
}

double induced_linf_norm(const Matrix& m, const Vector& in_eta, const Vector& out_eta) {
  if (m.cols() != in_eta.size() || m.rows() != out_eta.size()) {
    throw DimensionError("induced_linf_norm: weight dimensions do not match matrix");
  }
  double best = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    best = std::max(best, m.row(i).cwiseAbs().dot(in_eta.transpose()) / out_eta(i));
  }
  return best;
}

double weak_pairing_inf(const Vector& x, const Vector& y, const Vector& eta) {
  if (x.size() != y.size() || y.size() != eta.size()) {
    throw DimensionError("weak_pairing_inf: dimension mismatch");
  }
  const Vector scaled = y.cwiseAbs().cwiseQuotient(eta);
  const double top = scaled.maxCoeff();
  if (top == 0.0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < y.size(); ++i) {
    if (scaled(i) == top) best = std::max(best, y(i) * x(i) / (eta(i) * eta(i)));
  }
  return best;
}

double lumer_bruteforce_inf(const Matrix& a, const Vector& eta) {
  require_square(a, eta.size(), "lumer_bruteforce_inf");
  const Index n = a.rows();
  if (n > 20) throw DomainError("lumer_bruteforce_inf: n too large for enumeration");
  double best = -std::numeric_limits<double>::infinity();
  Vector x(n);
  const unsigned long patterns = 1ul << n;
  for (unsigned long mask = 0; mask < patterns; ++mask) {
    for (Index j = 0; j < n; ++j) x(j) = ((mask >> j) & 1ul) ? -eta(j) : eta(j);
    const Vector ax = a * x;
    // Every coordinate of [eta]^-1 x has modulus one, so I_inf is all of 1..n.
    for (Index i = 0; i < n; ++i) {
      best = std::max(best, (x(i) / eta(i)) * (ax(i) / eta(i)));
    }
  }
  return best;
}

double norm_of_average_identity(const Matrix& a, const Vector& eta, double alpha) {
  require_square(a, eta.size(), "norm_of_average_identity");
  const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
  if (alpha < 0.0 || (max_diag > 0.0 && alpha * max_diag > 1.0)) {
    throw DomainError("norm_of_average_identity: alpha outside [0, 1/max|a_ii|]");
  }
  const NormSpec ns = NormSpec::linf(eta);
  const Matrix shifted = Matrix::Identity(a.rows(), a.cols()) + alpha * a;
  const double norm = matrix_norm(shifted, ns);
  const double predicted = 1.0 + alpha * matrix_measure(a, ns);
  const double scale = 1.0 + alpha * matrix_norm(a, ns);
  if (std::abs(norm - predicted) > 1e-12 * scale) {
    throw std::logic_error("norm_of_average_identity: norm and 1 + alpha*mu disagree");
  }
  return norm;
}

NormMinimizer optimal_alpha_norm_min(const Matrix& a, const Vector& eta) {
  require_square(a, eta.size(), "optimal_alpha_norm_min");
  const Index n = a.rows();
  // ||I + alpha A|| = max_i max(1 + alpha (a_ii + r_i), -1 + alpha (r_i - a_ii)).
  std::vector<double> intercept;
  std::vector<double> slope;
  intercept.reserve(2 * n);
  slope.reserve(2 * n);
  for (Index i = 0; i < n; ++i) {
    const double r = offdiag_row_sum(a, eta, i);
    intercept.push_back(1.0);
    slope.push_back(a(i, i) + r);
    intercept.push_back(-1.0);
    slope.push_back(r - a(i, i));
  }
  auto objective = [&](double alpha) {
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < slope.size(); ++k) v = std::max(v, intercept[k] + alpha * slope[k]);
    return v;
  };

  NormMinimizer best{0.0, objective(0.0)};
  for (std::size_t p = 0; p < slope.size(); ++p) {
    for (std::size_t q = p + 1; q < slope.size(); ++q) {
      const double ds = slope[p] - slope[q];
      if (ds == 0.0) continue;
      const double alpha = (intercept[q] - intercept[p]) / ds;
      if (!(alpha > 0.0) || !std::isfinite(alpha)) continue;
      const double v = objective(alpha);
      if (v < best.value || (v == best.value && alpha < best.alpha)) best = {alpha, v};
    }
  }
  return best;
}

Matrix parametrize_bounded_measure(const Matrix& t, double gamma) {
  if (t.rows() != t.cols()) throw DimensionError("parametrize_bounded_measure: T not square");
  Matrix a = t;
  const Vector abs_row_sums = t.cwiseAbs().rowwise().sum();
  a.diagonal() += (gamma - abs_row_sums.array()).matrix();
  return a;
}

Matrix recover_parametrization(const Matrix& a, double gamma) {
  if (a.rows() != a.cols()) throw DimensionError("recover_parametrization: A not square");
  const Index n = a.rows();
  const double slack = 1e-12 * std::max(1.0, std::abs(gamma));
  Matrix t = a;
  for (Index i = 0; i < n; ++i) {
    const double row = a(i, i) + offdiag_row_sum(a, Vector::Ones(n), i);
    if (row > gamma + slack) {
      throw DomainError("recover_parametrization: mu_inf(A) exceeds gamma");
    }
    // Rows sitting on the boundary may land an ulp above gamma; clamp so the
    // diagonal of T stays nonpositive.
    t(i, i) = std::min(0.0, 0.5 * (row - gamma));
  }
  return t;
}

SymmetricEigen jacobi_eigen(const Matrix& s, double tol, int max_sweeps) {
  if (s.rows() != s.cols()) throw DimensionError("jacobi_eigen: matrix not square");
  const Index n = s.rows();
  Matrix a = 0.5 * (s + s.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double threshold = tol * std::max(1.0, a.norm());

  auto off_norm = [&]() {
    double sum = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = 0; q < n; ++q)
        if (p != q) sum += a(p, q) * a(p, q);
    return std::sqrt(sum);
  };

  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() > threshold; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  out.sweeps = sweep;
  return out;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const SymmetricEigen eig = jacobi_eigen(a.transpose() * a);
  return std::sqrt(std::max(0.0, eig.values.maxCoeff()));
}

PowerIterationResult perron_frobenius(const Matrix& nonneg, double tol, int max_iter) {
  if (nonneg.rows() != nonneg.cols()) throw DimensionError("perron_frobenius: not square");
  if ((nonneg.array() < 0.0).any()) throw DomainError("perron_frobenius: negative entry");
  const Index n = nonneg.rows();
  PowerIterationResult out;
  out.eigenvector = Vector::Ones(n);
  if (n == 0) return out;

  const Matrix shifted = nonneg + Matrix::Identity(n, n);
  double estimate = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    const Vector next = shifted * out.eigenvector;
    const double scale = next.cwiseAbs().maxCoeff();
    const Vector normalized = next / scale;
    const double change = (normalized - out.eigenvector).cwiseAbs().maxCoeff();
    const double step = std::abs(scale - estimate);
    out.eigenvector = normalized;
    estimate = scale;
    out.iterations = k;
    if (change <= tol && step <= tol * std::max(1.0, scale)) {
      out.converged = true;
      break;
    }
  }
  out.eigenvalue = estimate - 1.0;
  return out;
}

}  // namespace nemon
