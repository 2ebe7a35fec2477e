#pragma once

// XY-model operators on qubit sites.
//
//   H_<u,v> = (sx sx + sy sy) / 2      exchange on span{|01>, |10>}, zero on |00>, |11>
//   K_<u,v> = exp(beta H_<u,v>) = I + sinh(beta) H + (cosh(beta) - 1) H^2
//
// The closed form follows from H^(2m) = H^2 = (I - sz sz) / 2 and H^(2m-1) = H.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cayley_qmc/linalg.hpp"

namespace cayley_qmc {

enum class Axis { X, Y, Z };

inline Matrix2 pauli(Axis axis) {
  Matrix2 m;
  switch (axis) {
    case Axis::X:
      m << 0, 1, 1, 0;
      break;
    case Axis::Y:
      m << 0, Complex(0, -1), Complex(0, 1), 0;
      break;
    case Axis::Z:
      m << 1, 0, 0, -1;
      break;
  }
  return m;
}

inline SiteOperator pauli(Axis axis, const TreeCoordinate& site) { return SiteOperator::single(site, pauli(axis)); }

/// The 4x4 edge Hamiltonian in the |u v> basis.
inline Matrix h_edge_matrix() {
  Matrix m = 0.5 * (Eigen::kroneckerProduct(pauli(Axis::X), pauli(Axis::X)).eval() +
                    Eigen::kroneckerProduct(pauli(Axis::Y), pauli(Axis::Y)).eval());
  return m;
}

inline SiteOperator h_edge(const TreeCoordinate& u, const TreeCoordinate& v) {
  if (u == v) throw SiteError("edge Hamiltonian needs two distinct sites");
  return SiteOperator({u, v}, h_edge_matrix());
}

inline void require_positive_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("beta must be a positive finite number");
}

/// Closed form of exp(beta H) as a raw 4x4 matrix. Real symmetric.
inline Matrix k_edge_matrix(double beta) {
  const Matrix h = h_edge_matrix();
  return Matrix::Identity(4, 4) + std::sinh(beta) * h + (std::cosh(beta) - 1.0) * (h * h);
}

/// K_<u,v> for a tree edge, v a direct successor of u.
struct EdgeOperator {
  TreeCoordinate parent;
  TreeCoordinate child;
  double beta = 0.0;
  SiteOperator op;  // on sites [parent, child]
};

inline EdgeOperator k_edge(const TreeCoordinate& u, const TreeCoordinate& v, double beta) {
  require_positive_beta(beta);
  if (v.is_root() || v.parent() != u) {
    throw SiteError("\"" + v.to_string() + "\" is not a direct successor of \"" + u.to_string() + "\"");
  }
  return EdgeOperator{u, v, beta, SiteOperator({u, v}, k_edge_matrix(beta))};
}

struct PowerIdentityReport {
  int m_max = 0;
  double max_even_residual = 0.0;         // max_m ||H^(2m) - H^2||
  double max_odd_residual = 0.0;          // max_m ||H^(2m-1) - H||
  double square_projector_residual = 0.0; // ||H^2 - (I - sz sz)/2||
  double max_closed_form_residual = 0.0;  // max_beta ||closed form - expm||
  bool pass(double tol = 1e-12) const {
    return max_even_residual <= tol && max_odd_residual <= tol && square_projector_residual <= tol &&
           max_closed_form_residual <= tol;
  }
};

/// Powers are formed by repeated multiplication; the closed form is compared
/// against the eigendecomposition exponential on `beta_grid`.
inline PowerIdentityReport verify_power_identities(int m_max, const std::vector<double>& beta_grid) {
  if (m_max < 1) throw ParameterError("m_max must be >= 1");
  const Matrix h = h_edge_matrix();
  const Matrix h2 = h * h;
  PowerIdentityReport report;
  report.m_max = m_max;

  Matrix power = h;  // H^1
  for (int p = 1; p <= 2 * m_max; ++p) {
    if (p > 1) power = power * h;
    const double r = (p % 2 == 0) ? (power - h2).norm() : (power - h).norm();
    double& slot = (p % 2 == 0) ? report.max_even_residual : report.max_odd_residual;
    slot = std::max(slot, r);
  }
  const Matrix zz = Eigen::kroneckerProduct(pauli(Axis::Z), pauli(Axis::Z)).eval();
  report.square_projector_residual = (h2 - 0.5 * (Matrix::Identity(4, 4) - zz)).norm();

  const SiteOperator hop({TreeCoordinate{1}, TreeCoordinate{2}}, h);
  for (double beta : beta_grid) {
    const Matrix expm = expm_hermitian(hop, beta).matrix();
    report.max_closed_form_residual = std::max(report.max_closed_form_residual, (k_edge_matrix(beta) - expm).norm());
  }
  return report;
}

}  // namespace cayley_qmc
