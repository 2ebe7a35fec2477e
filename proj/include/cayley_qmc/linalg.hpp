#pragma once

// Dense operators on labeled collections of qubit sites.
//
// A SiteOperator pairs an ordered site list with a 2^N x 2^N complex matrix.
// Leg order is big-endian: the first site is the most significant bit of the
// basis index, so for sites [u, v] the basis is |u v> = |00>, |01>, |10>, |11>.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cayley_qmc/errors.hpp"
#include "cayley_qmc/tree.hpp"

namespace cayley_qmc {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Matrix2 = Eigen::Matrix2cd;
using Vector = Eigen::VectorXcd;

inline constexpr double kDefaultRelTol = 1e-10;

namespace detail {

inline std::size_t find_site(const std::vector<TreeCoordinate>& sites, const TreeCoordinate& x) {
  auto it = std::find(sites.begin(), sites.end(), x);
  return it == sites.end() ? sites.size() : static_cast<std::size_t>(it - sites.begin());
}

// Bit mask of leg `pos` in a register of `n` legs (big-endian).
inline std::uint64_t leg_bit(std::size_t pos, std::size_t n) { return std::uint64_t{1} << (n - 1 - pos); }

// Spread the bits of `value` (|positions| bits, MSB first) onto the legs `positions`.
inline std::uint64_t scatter(std::uint64_t value, const std::vector<std::size_t>& positions, std::size_t n) {
  std::uint64_t out = 0;
  const std::size_t m = positions.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (value & (std::uint64_t{1} << (m - 1 - i))) out |= leg_bit(positions[i], n);
  }
  return out;
}

inline std::uint64_t gather(std::uint64_t index, const std::vector<std::size_t>& positions, std::size_t n) {
  std::uint64_t out = 0;
  for (std::size_t pos : positions) out = (out << 1) | ((index & leg_bit(pos, n)) ? 1u : 0u);
  return out;
}

inline double fro(const Matrix& m) { return m.norm(); }

}  // namespace detail

class SiteOperator {
 public:
  SiteOperator() : entries_(Matrix::Identity(1, 1)) {}

  SiteOperator(std::vector<TreeCoordinate> sites, Matrix entries)
      : sites_(std::move(sites)), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      for (std::size_t j = i + 1; j < sites_.size(); ++j) {
        if (sites_[i] == sites_[j]) throw SiteError("duplicate site \"" + sites_[i].to_string() + "\"");
      }
    }
    if (sites_.size() > 30) throw FeasibilityError("too many sites for a dense operator");
    const Eigen::Index dim = Eigen::Index{1} << sites_.size();
    if (entries_.rows() != dim || entries_.cols() != dim) {
      throw SiteError("matrix dimension " + std::to_string(entries_.rows()) + "x" + std::to_string(entries_.cols()) +
                      " does not match " + std::to_string(sites_.size()) + " sites");
    }
  }

  static SiteOperator identity(std::vector<TreeCoordinate> sites) {
    const Eigen::Index dim = Eigen::Index{1} << sites.size();
    return SiteOperator(std::move(sites), Matrix::Identity(dim, dim));
  }

  static SiteOperator single(const TreeCoordinate& site, const Matrix2& m) { return SiteOperator({site}, Matrix(m)); }

  const std::vector<TreeCoordinate>& sites() const noexcept { return sites_; }
  const Matrix& matrix() const noexcept { return entries_; }
  Eigen::Index dimension() const noexcept { return entries_.rows(); }
  std::size_t num_sites() const noexcept { return sites_.size(); }

  SiteOperator adjoint() const { return SiteOperator(sites_, entries_.adjoint()); }

  bool is_hermitian(double rel_tol = kDefaultRelTol) const {
    return detail::fro(entries_ - entries_.adjoint()) <= rel_tol * detail::fro(entries_);
  }

  /// Smallest eigenvalue of the Hermitian part.
  double min_eigenvalue() const {
    Matrix h = 0.5 * (entries_ + entries_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// Hermitian with every eigenvalue >= -rel_tol * ||M||_2.
  bool is_positive(double rel_tol = kDefaultRelTol) const {
    if (!is_hermitian(rel_tol)) return false;
    Matrix h = 0.5 * (entries_ + entries_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    return ev.minCoeff() >= -rel_tol * scale;
  }

  SiteOperator& operator*=(Complex c) {
    entries_ *= c;
    return *this;
  }

  friend SiteOperator operator*(const SiteOperator& a, const SiteOperator& b) {
    require_same_sites(a, b, "product");
    return SiteOperator(a.sites_, a.entries_ * b.entries_);
  }
  friend SiteOperator operator+(const SiteOperator& a, const SiteOperator& b) {
    require_same_sites(a, b, "sum");
    return SiteOperator(a.sites_, a.entries_ + b.entries_);
  }
  friend SiteOperator operator-(const SiteOperator& a, const SiteOperator& b) {
    require_same_sites(a, b, "difference");
    return SiteOperator(a.sites_, a.entries_ - b.entries_);
  }
  friend SiteOperator operator*(Complex c, const SiteOperator& a) { return SiteOperator(a.sites_, c * a.entries_); }

 private:
  static void require_same_sites(const SiteOperator& a, const SiteOperator& b, const char* what) {
    if (a.sites_ != b.sites_) throw SiteError(std::string(what) + " of operators on different site lists; embed first");
  }

  std::vector<TreeCoordinate> sites_;
  Matrix entries_;
};

/// Frobenius norm of the difference; the residual used throughout.
inline double distance(const SiteOperator& a, const SiteOperator& b) {
  if (a.sites() != b.sites()) throw SiteError("distance between operators on different site lists");
  return (a.matrix() - b.matrix()).norm();
}

inline SiteOperator tensor(const SiteOperator& a, const SiteOperator& b) {
  for (const auto& x : b.sites()) {
    if (detail::find_site(a.sites(), x) != a.num_sites()) {
      throw SiteError("tensor of operators sharing site \"" + x.to_string() + "\"");
    }
  }
  std::vector<TreeCoordinate> sites = a.sites();
  sites.insert(sites.end(), b.sites().begin(), b.sites().end());
  return SiteOperator(std::move(sites), Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval());
}

/// Extends `a` by identities to `target` and reorders legs to match it.
inline SiteOperator embed(const SiteOperator& a, const std::vector<TreeCoordinate>& target) {
  const std::size_t n = target.size();
  std::vector<std::size_t> pos;
  pos.reserve(a.num_sites());
  for (const auto& x : a.sites()) {
    std::size_t p = detail::find_site(target, x);
    if (p == n) throw SiteError("cannot embed: site \"" + x.to_string() + "\" missing from target");
    pos.push_back(p);
  }
  // Target validity (no duplicates) is checked by the SiteOperator constructor.
  std::uint64_t own_mask = 0;
  for (std::size_t p : pos) own_mask |= detail::leg_bit(p, n);

  const Eigen::Index dim = Eigen::Index{1} << n;
  const std::uint64_t local_dim = std::uint64_t{1} << pos.size();
  std::vector<std::uint64_t> spread(local_dim);
  for (std::uint64_t c = 0; c < local_dim; ++c) spread[c] = detail::scatter(c, pos, n);

  Matrix out = Matrix::Zero(dim, dim);
  const Matrix& m = a.matrix();
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(dim); ++i) {
    const std::uint64_t rest = i & ~own_mask;
    const std::uint64_t r = detail::gather(i, pos, n);
    for (std::uint64_t c = 0; c < local_dim; ++c) {
      const Complex v = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v != Complex{}) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(rest | spread[c])) = v;
    }
  }
  return SiteOperator(target, std::move(out));
}

/// Tr(M) / 2^N, so the identity has trace one.
inline Complex normalized_trace(const SiteOperator& a) {
  return a.matrix().trace() / static_cast<double>(a.dimension());
}

/// Traces out every site not in `keep` and divides by the traced dimension.
/// The result's legs follow the order of `keep`.
inline SiteOperator normalized_partial_trace(const SiteOperator& a, const std::vector<TreeCoordinate>& keep) {
  const std::size_t n = a.num_sites();
  std::vector<std::size_t> kept;
  for (const auto& x : keep) {
    std::size_t p = detail::find_site(a.sites(), x);
    if (p == n) throw SiteError("cannot keep site \"" + x.to_string() + "\": not in operator support");
    kept.push_back(p);
  }
  std::vector<std::size_t> traced;
  for (std::size_t p = 0; p < n; ++p) {
    if (std::find(kept.begin(), kept.end(), p) == kept.end()) traced.push_back(p);
  }
  const std::uint64_t keep_dim = std::uint64_t{1} << kept.size();
  const std::uint64_t trace_dim = std::uint64_t{1} << traced.size();
  std::vector<std::uint64_t> keep_spread(keep_dim), trace_spread(trace_dim);
  for (std::uint64_t i = 0; i < keep_dim; ++i) keep_spread[i] = detail::scatter(i, kept, n);
  for (std::uint64_t t = 0; t < trace_dim; ++t) trace_spread[t] = detail::scatter(t, traced, n);

  const Matrix& m = a.matrix();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(keep_dim), static_cast<Eigen::Index>(keep_dim));
  for (std::uint64_t r = 0; r < keep_dim; ++r) {
    for (std::uint64_t c = 0; c < keep_dim; ++c) {
      Complex acc{};
      for (std::uint64_t t = 0; t < trace_dim; ++t) {
        acc += m(static_cast<Eigen::Index>(keep_spread[r] | trace_spread[t]),
                 static_cast<Eigen::Index>(keep_spread[c] | trace_spread[t]));
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc / static_cast<double>(trace_dim);
    }
  }
  return SiteOperator(keep, std::move(out));
}

/// Applies f to the spectrum of a Hermitian matrix.
template <typename F>
Matrix hermitian_function(const Matrix& m, F&& f, double rel_tol = kDefaultRelTol) {
  if ((m - m.adjoint()).norm() > rel_tol * m.norm()) throw HermiticityError("matrix function of a non-Hermitian matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  Eigen::VectorXd mapped = es.eigenvalues().unaryExpr([&](double x) { return f(x); });
  return es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().adjoint();
}

/// exp(scale * a) by eigendecomposition.
inline SiteOperator expm_hermitian(const SiteOperator& a, double scale, double rel_tol = kDefaultRelTol) {
  return SiteOperator(a.sites(), hermitian_function(a.matrix(), [scale](double x) { return std::exp(scale * x); }, rel_tol));
}

/// Positive square root of a positive semidefinite Hermitian matrix.
inline Matrix positive_sqrt(const Matrix& m, double rel_tol = kDefaultRelTol) {
  return hermitian_function(m, [](double x) { return std::sqrt(std::max(x, 0.0)); }, rel_tol);
}

inline double commutator_norm(const SiteOperator& a, const SiteOperator& b) {
  return (a * b - b * a).matrix().norm();
}

}  // namespace cayley_qmc
