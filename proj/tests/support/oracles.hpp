#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's linear algebra: operators are placed on registers by explicit
// index loops, exponentials use scaled Taylor series, and partial traces are
// plain index sums.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// Values computed offline with numpy/scipy (expm, sqrtm, explicit Kronecker
// products on the big-endian basis) and frozen here.
namespace frozen {
// <sz(root) sz((1))> on Lambda_1, beta = 1, fixed-point family.
inline constexpr double kZZRootChild = -0.5800256583859746;
// <sx(root) sx((1))>, same state; equals tanh(1).
inline constexpr double kXXRootChild = 0.7615941559557656;
// <sx((1)) sx((2))>, same state.
inline constexpr double kXXSiblings = 0.37588810675173967;
// <sx((1)) sx((1,1))> on Lambda_2, beta = 1, fixed-point family.
inline constexpr double kXXChildGrandchild = 0.49355434756457395;
// ||[K_<0,(1)>, K_<0,(2)>]||_F on Lambda_1 at beta = 1.
inline constexpr double kSharedParentCommutator = 3.2997598688907517;
// Orbit of (1, 0.5) at beta = 1: one pullup, then no admissible preimage.
inline constexpr int kOrbitHalfSteps = 1;
inline constexpr double kOrbitHalfX1 = 0.38228858284630346;
inline constexpr double kOrbitHalfY1 = 0.2836074929080907;
}  // namespace frozen

inline Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}
inline Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline int bit(int index, int leg, int nlegs) { return (index >> (nlegs - 1 - leg)) & 1; }

/// Places a 2^k x 2^k matrix on the listed legs of an nlegs register.
inline Matrix place(const Matrix& local, const std::vector<int>& legs, int nlegs) {
  const int dim = 1 << nlegs;
  Matrix out = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      bool spectators_match = true;
      for (int s = 0; s < nlegs && spectators_match; ++s) {
        bool on = false;
        for (int l : legs) on = on || l == s;
        if (!on && bit(i, s, nlegs) != bit(j, s, nlegs)) spectators_match = false;
      }
      if (!spectators_match) continue;
      int li = 0, lj = 0;
      for (int l : legs) {
        li = li * 2 + bit(i, l, nlegs);
        lj = lj * 2 + bit(j, l, nlegs);
      }
      out(i, j) = local(li, lj);
    }
  }
  return out;
}

/// exp(A) by scaling and squaring with a 30-term Taylor series.
inline Matrix expm_taylor(const Matrix& a) {
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const Matrix scaled = a / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Normalized partial trace keeping the listed legs (in the given order).
inline Matrix keep_legs(const Matrix& m, const std::vector<int>& keep, int nlegs) {
  const int kd = 1 << keep.size();
  Matrix out = Matrix::Zero(kd, kd);
  const int dim = 1 << nlegs;
  int traced = nlegs - static_cast<int>(keep.size());
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      bool same_traced = true;
      for (int s = 0; s < nlegs; ++s) {
        bool kept = false;
        for (int l : keep) kept = kept || l == s;
        if (!kept && bit(i, s, nlegs) != bit(j, s, nlegs)) same_traced = false;
      }
      if (!same_traced) continue;
      int ki = 0, kj = 0;
      for (int l : keep) {
        ki = ki * 2 + bit(i, l, nlegs);
        kj = kj * 2 + bit(j, l, nlegs);
      }
      out(ki, kj) += m(i, j);
    }
  }
  return out / std::pow(2.0, traced);
}

inline Matrix edge_hamiltonian() {
  Matrix xx = place(pauli_x(), {0}, 2) * place(pauli_x(), {1}, 2);
  Matrix yy = place(pauli_y(), {0}, 2) * place(pauli_y(), {1}, 2);
  return 0.5 * (xx + yy);
}

inline Matrix edge_exponential(double beta) { return expm_taylor(beta * edge_hamiltonian()); }

/// Brute-force consistency map: parent leg 0, children legs 1 and 2.
inline Matrix consistency_map(const Matrix& hy, const Matrix& hz, double beta) {
  const Matrix k = edge_exponential(beta);
  const Matrix kxy = place(k, {0, 1}, 3);
  const Matrix kxz = place(k, {0, 2}, 3);
  const Matrix hh = place(hy, {1}, 3) * place(hz, {2}, 3);
  return keep_legs(kxy * kxz * hh * kxz.adjoint() * kxy.adjoint(), {0}, 3);
}

inline Matrix random_matrix(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  Matrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) m(r, c) = Complex(g(rng), g(rng));
  }
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, int dim) {
  Matrix m = random_matrix(rng, dim);
  return 0.5 * (m + m.adjoint());
}

inline Matrix random_positive(std::mt19937_64& rng, int dim) {
  Matrix m = random_matrix(rng, dim);
  return m * m.adjoint() + 0.1 * Matrix::Identity(dim, dim);
}

/// beta in {0.1, 0.25, 0.5, ..., 3.0}.
inline std::vector<double> beta_grid() {
  std::vector<double> g{0.1};
  for (int i = 1; i <= 12; ++i) g.push_back(0.25 * i);
  return g;
}

}  // namespace oracle
