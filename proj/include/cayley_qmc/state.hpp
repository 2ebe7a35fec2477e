#pragma once

// Finite-volume states of the forward chain on the binary tree.
//
// With K_<x,y> the edge operators and boundary data (w0, h^(n)):
//
//   K_[m-1,m] = prod_{x in W_{m-1} fwd} prod_{y in S(x) fwd} K_<x,y>
//   K_n       = w0^{1/2} K_[0,1] ... K_[n-1,n] prod_{x in W_n} h_x^{1/2}
//   W_n]      = K_n K_n^*
//
// phi^(n)(a) = tr(W_{n+1]} (a (x) 1)) on the volume Lambda_n ("padded" form).
// When the boundary data is consistent the padded level drops out and
// phi^(n)(a) = tr(W_n] a) ("reduced" form).
//
// Two engines evaluate phi^(n):
//   * dense: builds W on Lambda_L (L <= 2), or applies K_L to every basis
//     vector of Lambda_3 without storing it (matrix-free, opt-in);
//   * transfer: per-vertex messages from the leaves to the root,
//       m_x = tr_x[ S_x (1 (x) m_y (x) m_z) S_x^* (1 (x) a_y (x) a_z) ],
//       S_x = K_<x,y> K_<x,z>,
//     closed at the root by tr(w0^{1/2} m_root w0^{1/2} a_root).
//
// Edge operators sharing a parent do not commute; every product here keeps
// the forward order on the left and its reverse on the adjoint side.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "cayley_qmc/boundary.hpp"
#include "cayley_qmc/linalg.hpp"
#include "cayley_qmc/model.hpp"
#include "cayley_qmc/tree.hpp"

namespace cayley_qmc {

inline constexpr int kBinary = 2;
inline constexpr std::size_t kMaxDenseSites = 7;   // Lambda_2, 128 x 128
inline constexpr int kMaxMatrixFreeLevel = 3;      // Lambda_3, 2^15 amplitudes
inline constexpr int kMaxTransferLevel = 12;

// ---------------------------------------------------------------------------
// Observables

struct ProductTerm {
  Complex coeff{1.0, 0.0};
  std::map<TreeCoordinate, Matrix2> factors;  // missing vertex = identity

  const Matrix2* factor(const TreeCoordinate& x) const {
    auto it = factors.find(x);
    return it == factors.end() ? nullptr : &it->second;
  }
};

class ProductObservable {
 public:
  ProductObservable() = default;
  explicit ProductObservable(std::vector<ProductTerm> terms) : terms_(std::move(terms)) {}

  static ProductObservable identity() { return ProductObservable({ProductTerm{}}); }

  static ProductObservable product(std::map<TreeCoordinate, Matrix2> factors, Complex coeff = 1.0) {
    return ProductObservable({ProductTerm{coeff, std::move(factors)}});
  }

  static ProductObservable single(const TreeCoordinate& x, const Matrix2& m) { return product({{x, m}}); }

  const std::vector<ProductTerm>& terms() const noexcept { return terms_; }

  void add(ProductTerm term) { terms_.push_back(std::move(term)); }

  /// Deepest level carrying a non-identity factor; 0 for scalar observables.
  int support_level() const {
    int level = 0;
    for (const auto& t : terms_) {
      for (const auto& [x, m] : t.factors) level = std::max(level, x.level());
    }
    return level;
  }

  friend ProductObservable operator+(ProductObservable a, const ProductObservable& b) {
    a.terms_.insert(a.terms_.end(), b.terms_.begin(), b.terms_.end());
    return a;
  }

  friend ProductObservable operator*(Complex c, ProductObservable a) {
    for (auto& t : a.terms_) t.coeff *= c;
    return a;
  }

  ProductObservable adjoint() const {
    ProductObservable out = *this;
    for (auto& t : out.terms_) {
      t.coeff = std::conj(t.coeff);
      for (auto& [x, m] : t.factors) m = m.adjoint().eval();
    }
    return out;
  }

 private:
  std::vector<ProductTerm> terms_;
};

/// Dense matrix of `obs` on the given site list (identity off support).
inline SiteOperator observable_operator(const ProductObservable& obs, const std::vector<TreeCoordinate>& sites) {
  const Eigen::Index dim = Eigen::Index{1} << sites.size();
  Matrix total = Matrix::Zero(dim, dim);
  for (const auto& t : obs.terms()) {
    for (const auto& [x, m] : t.factors) {
      if (std::find(sites.begin(), sites.end(), x) == sites.end()) {
        throw SupportError("factor at \"" + x.to_string() + "\" lies outside the volume");
      }
    }
    Matrix prod = Matrix::Identity(1, 1);
    for (const auto& x : sites) {
      const Matrix2* f = t.factor(x);
      Matrix local = f ? Matrix(*f) : Matrix(Matrix::Identity(2, 2));
      prod = Eigen::kroneckerProduct(prod, local).eval();
    }
    total += t.coeff * prod;
  }
  return SiteOperator(sites, std::move(total));
}

namespace detail {

inline void require_binary_support(const ProductObservable& obs) {
  for (const auto& t : obs.terms()) {
    for (const auto& [x, m] : t.factors) {
      if (!x.valid_for_order(kBinary)) throw SiteError("vertex \"" + x.to_string() + "\" is not on the binary tree");
    }
  }
}

inline void require_support_within(const ProductObservable& obs, int n) {
  if (n < 0) throw ParameterError("volume level must be >= 0");
  if (obs.support_level() > n) {
    throw SupportError("observable reaches level " + std::to_string(obs.support_level()) + " beyond volume " +
                       std::to_string(n));
  }
  require_binary_support(obs);
}

inline Matrix sqrt2(const Matrix2& m) { return positive_sqrt(Matrix(m)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-vertex consistency map

/// S_x (1 (x) h_y (x) h_z) S_x^* traced down to the parent, computed by brute
/// force on 8x8 matrices. A consistent boundary has check_eq2(h^(n+1), h^(n+1)) = h^(n).
inline Matrix2 check_eq2(const Matrix2& h_y, const Matrix2& h_z, double beta) {
  const TreeCoordinate x = TreeCoordinate::root();
  const TreeCoordinate y{1}, z{2};
  const std::vector<TreeCoordinate> sites{x, y, z};
  const SiteOperator kxy = embed(k_edge(x, y, beta).op, sites);
  const SiteOperator kxz = embed(k_edge(x, z, beta).op, sites);
  const SiteOperator hh = embed(tensor(SiteOperator::single(y, h_y), SiteOperator::single(z, h_z)), sites);
  const SiteOperator inner = kxy * kxz * hh * kxz.adjoint() * kxy.adjoint();
  return normalized_partial_trace(inner, {x}).matrix();
}

struct BoundaryResiduals {
  double eq1 = 0.0;
  std::vector<double> eq2;  // eq2[n] = ||check_eq2(h^(n+1), h^(n+1)) - h^(n)||

  double max_eq2() const { return eq2.empty() ? 0.0 : *std::max_element(eq2.begin(), eq2.end()); }
};

/// Residuals for levels 0..up_to (clipped to the levels the condition defines).
inline BoundaryResiduals boundary_residuals(const BoundaryCondition& bc, double beta, int up_to) {
  BoundaryResiduals r;
  r.eq1 = bc.eq1_residual();
  for (int n = 0; n <= std::min(up_to, bc.max_level() - 1); ++n) {
    r.eq2.push_back((check_eq2(bc.h(n + 1), bc.h(n + 1), beta) - bc.h(n)).norm());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dense construction

inline void require_dense_feasible(std::size_t sites) {
  if (sites > kMaxDenseSites) {
    throw FeasibilityError("dense operator on " + std::to_string(sites) + " sites exceeds the " +
                           std::to_string(kMaxDenseSites) + "-site limit; use the transfer engine");
  }
}

/// K_[m-1,m] embedded in Lambda_m.
inline SiteOperator build_level_coupler(int m, double beta, int k = kBinary) {
  if (m < 1) throw ParameterError("coupler level must be >= 1");
  require_positive_beta(beta);
  require_dense_feasible(ball_size(m, k));
  const auto sites = ball(m, k);
  SiteOperator out = SiteOperator::identity(sites);
  const Matrix kmat = k_edge_matrix(beta);
  for (const auto& x : level_set(m - 1, k).vertices) {
    for (const auto& y : successors(x, k)) out = out * embed(SiteOperator({x, y}, kmat), sites);
  }
  return out;
}

struct DensityResult {
  SiteOperator density;  // W_n] on Lambda_n
  BoundaryResiduals residuals;
  bool bc_warning = false;  // boundary data fails the consistency test
};

inline DensityResult build_density(int n, double beta, const BoundaryCondition& bc, double tol = kDefaultRelTol) {
  require_positive_beta(beta);
  if (n < 0) throw ParameterError("volume level must be >= 0");
  require_dense_feasible(ball_size(n, kBinary));
  const auto sites = ball(n, kBinary);
  SiteOperator kn = embed(SiteOperator::single(TreeCoordinate::root(), detail::sqrt2(bc.w0())), sites);
  for (int m = 1; m <= n; ++m) {
    const SiteOperator coupler = build_level_coupler(m, beta);
    kn = kn * embed(coupler, sites);
  }
  const Matrix h_sqrt = detail::sqrt2(bc.h(n));
  for (const auto& x : level_set(n, kBinary).vertices) kn = kn * embed(SiteOperator({x}, h_sqrt), sites);

  DensityResult out{kn * kn.adjoint(), boundary_residuals(bc, beta, n - 1), false};
  out.bc_warning = out.residuals.eq1 > tol || out.residuals.max_eq2() > tol;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation form

enum class EvalForm { Auto, Reduced, Padded };

inline const char* to_string(EvalForm f) {
  switch (f) {
    case EvalForm::Auto:
      return "auto";
    case EvalForm::Reduced:
      return "reduced";
    case EvalForm::Padded:
      return "padded";
  }
  return "?";
}

struct EvalOptions {
  EvalForm form = EvalForm::Auto;
  bool allow_matrix_free = false;
  double residual_tol = kDefaultRelTol;
  unsigned threads = 0;  // matrix-free workers; 0 = hardware concurrency
};

/// Auto resolves to Reduced when tr(w0 h^(0)) = 1 and the consistency map
/// reproduces h^(m) from h^(m+1) for every m <= n; otherwise Padded.
inline EvalForm resolve_form(const BoundaryCondition& bc, double beta, int n, const EvalOptions& opts) {
  if (opts.form != EvalForm::Auto) return opts.form;
  if (bc.max_level() < n + 1) {
    throw ParameterError("boundary condition needs level " + std::to_string(n + 1) +
                         " to test consistency; pass more levels or choose a form explicitly");
  }
  const auto r = boundary_residuals(bc, beta, n);
  return (r.eq1 <= opts.residual_tol && r.max_eq2() <= opts.residual_tol) ? EvalForm::Reduced : EvalForm::Padded;
}

inline int evaluation_volume(int n, EvalForm resolved) { return resolved == EvalForm::Padded ? n + 1 : n; }

// ---------------------------------------------------------------------------
// Matrix-free trace oracle

namespace detail {

using Block = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LocalGate {
  std::vector<std::size_t> legs;  // positions in the register
  Matrix m;
};

/// Precomputed index data for applying one gate to a register of n legs.
struct PreparedGate {
  std::uint64_t mask = 0;
  std::vector<std::uint64_t> spread;  // local basis index -> register bits
  std::vector<std::pair<int, std::vector<std::pair<int, Complex>>>> rows;  // nonzero rows and their entries
  int local = 0;

  PreparedGate(const LocalGate& g, std::size_t n) : local(1 << g.legs.size()) {
    for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(local); ++c) spread.push_back(scatter(c, g.legs, n));
    for (std::size_t p : g.legs) mask |= leg_bit(p, n);
    for (int r = 0; r < local; ++r) {
      std::vector<std::pair<int, Complex>> entries;
      for (int c = 0; c < local; ++c) {
        if (g.m(r, c) != Complex{}) entries.push_back({c, g.m(r, c)});
      }
      rows.push_back({r, std::move(entries)});
    }
  }
};

// Rows of `v` are register amplitudes, columns independent vectors: v <- G v.
inline void apply_gate(Block& v, const PreparedGate& g, Block& scratch) {
  const std::uint64_t dim = static_cast<std::uint64_t>(v.rows());
  scratch.resize(g.local, v.cols());
  for (std::uint64_t base = 0; base < dim; ++base) {
    if (base & g.mask) continue;
    for (const auto& [r, entries] : g.rows) {
      auto out = scratch.row(r);
      out.setZero();
      for (const auto& [c, val] : entries) {
        const auto in = v.row(static_cast<Eigen::Index>(base | g.spread[c]));
        if (val.imag() == 0.0) {
          out += val.real() * in;
        } else {
          out += val * in;
        }
      }
    }
    for (int r = 0; r < g.local; ++r) v.row(static_cast<Eigen::Index>(base | g.spread[r])) = scratch.row(r);
  }
}

// K_L without its leaf factor, as gates in application order (rightmost first).
inline std::vector<LocalGate> coupling_gates(int level, double beta, const BoundaryCondition& bc) {
  const auto sites = ball(level, kBinary);
  const LegIndex legs(sites);
  std::vector<LocalGate> gates;
  const Matrix kmat = k_edge_matrix(beta);
  for (int m = level; m >= 1; --m) {
    const auto parents = level_set(m - 1, kBinary).backward();
    for (const auto& x : parents) {
      auto kids = successors(x, kBinary);
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) gates.push_back({{legs.at(x), legs.at(*it)}, kmat});
    }
  }
  gates.push_back({{legs.at(TreeCoordinate::root())}, sqrt2(bc.w0())});
  return gates;
}

}  // namespace detail

/// tr(W_L] a) = 2^-N sum_e <K_L e, a K_L e>, never storing W_L].
/// Basis vectors are pushed through the local factors of K_L in blocks of
/// fixed width; the product of leaf factors is written down directly. Block
/// partial sums are added in block order, so the result does not depend on
/// the worker count. Lambda_3 takes on the order of a minute per product term.
inline Complex matrix_free_expectation(const ProductObservable& obs, int level, double beta, const BoundaryCondition& bc,
                                       unsigned threads = 0) {
  require_positive_beta(beta);
  detail::require_support_within(obs, level);
  if (level > kMaxMatrixFreeLevel) throw FeasibilityError("matrix-free oracle is limited to Lambda_3");
  const auto sites = ball(level, kBinary);
  const LegIndex legs(sites);
  const std::size_t n = sites.size();

  std::vector<detail::PreparedGate> chain;
  for (const auto& g : detail::coupling_gates(level, beta, bc)) chain.emplace_back(g, n);
  std::vector<std::pair<Complex, std::vector<detail::PreparedGate>>> terms;
  for (const auto& t : obs.terms()) {
    std::vector<detail::PreparedGate> fs;
    for (const auto& [x, m] : t.factors) fs.emplace_back(detail::LocalGate{{legs.at(x)}, Matrix(m)}, n);
    terms.push_back({t.coeff, std::move(fs)});
  }

  // Leaf factor prod_x h^{1/2}: entry (i, e) is nonzero only when i and e agree off the leaves.
  const Matrix h_sqrt = detail::sqrt2(bc.h(level));
  std::vector<std::size_t> leaf_legs;
  for (const auto& x : level_set(level, kBinary).vertices) leaf_legs.push_back(legs.at(x));
  std::uint64_t leaf_mask = 0;
  for (std::size_t p : leaf_legs) leaf_mask |= detail::leg_bit(p, n);

  const std::uint64_t dim = std::uint64_t{1} << n;
  const std::uint64_t width = std::min<std::uint64_t>(dim, 32);
  const std::uint64_t blocks = dim / width;
  std::vector<Complex> partial(blocks);
  std::atomic<std::uint64_t> next{0};

  auto worker = [&]() {
    detail::Block v(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(width)), u, scratch;
    for (std::uint64_t block = next++; block < blocks; block = next++) {
      v.setZero();
      for (std::uint64_t j = 0; j < width; ++j) {
        const std::uint64_t e = block * width + j;
        const std::uint64_t fixed = e & ~leaf_mask;
        const std::uint64_t leaf_bits = detail::gather(e, leaf_legs, n);
        for (std::uint64_t l = 0; l < (std::uint64_t{1} << leaf_legs.size()); ++l) {
          Complex amp = 1.0;
          for (std::size_t k = 0; k < leaf_legs.size(); ++k) {
            const std::size_t shift = leaf_legs.size() - 1 - k;
            amp *= h_sqrt(static_cast<Eigen::Index>((l >> shift) & 1), static_cast<Eigen::Index>((leaf_bits >> shift) & 1));
          }
          v(static_cast<Eigen::Index>(fixed | detail::scatter(l, leaf_legs, n)), static_cast<Eigen::Index>(j)) = amp;
        }
      }
      for (const auto& g : chain) detail::apply_gate(v, g, scratch);
      Complex acc{};
      for (const auto& [coeff, fs] : terms) {
        u = v;
        for (const auto& g : fs) detail::apply_gate(u, g, scratch);
        acc += coeff * (v.conjugate().cwiseProduct(u)).sum();
      }
      partial[block] = acc;
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, blocks));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Complex total{};
  for (const auto& p : partial) total += p;
  return total / static_cast<double>(dim);
}

// ---------------------------------------------------------------------------
// Dense engine

inline Complex expectation_dense(const ProductObservable& obs, int n, double beta, const BoundaryCondition& bc,
                                 const EvalOptions& opts = {}) {
  require_positive_beta(beta);
  detail::require_support_within(obs, n);
  const int volume = evaluation_volume(n, resolve_form(bc, beta, n, opts));
  const std::size_t sites = ball_size(volume, kBinary);
  if (sites <= kMaxDenseSites) {
    const auto density = build_density(volume, beta, bc, opts.residual_tol);
    const SiteOperator a = observable_operator(obs, density.density.sites());
    return normalized_trace(density.density * a);
  }
  if (volume <= kMaxMatrixFreeLevel && opts.allow_matrix_free) {
    return matrix_free_expectation(obs, volume, beta, bc, opts.threads);
  }
  throw FeasibilityError("dense evaluation on Lambda_" + std::to_string(volume) +
                         (volume <= kMaxMatrixFreeLevel ? " needs the matrix-free oracle (opt-in)" : " is not supported"));
}

// ---------------------------------------------------------------------------
// Transfer engine

/// S_x = K_<x,(x,1)> K_<x,(x,2)> on [x, (x,1), (x,2)].
inline Matrix star_operator(double beta) {
  const Matrix k = k_edge_matrix(beta);
  const Matrix i2 = Matrix::Identity(2, 2);
  // K on (x, y) with z spectator, then K on (x, z) with y spectator.
  const Matrix kxy = Eigen::kroneckerProduct(k, i2).eval();
  Matrix kxz = Matrix::Zero(8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (((r >> 1) & 1) != ((c >> 1) & 1)) continue;
      kxz(r, c) = k(((r >> 2) & 1) * 2 + (r & 1), ((c >> 2) & 1) * 2 + (c & 1));
    }
  }
  return kxy * kxz;
}

struct TransferMessage {
  TreeCoordinate vertex;
  Matrix2 matrix;
};

namespace detail {

class TransferPass {
 public:
  TransferPass(int leaf_level, double beta, const BoundaryCondition& bc)
      : leaf_level_(leaf_level), star_(star_operator(beta)), star_adj_(star_.adjoint()), bc_(bc),
        identity_cache_(static_cast<std::size_t>(leaf_level) + 1) {}

  /// Message sent up by x for one product term; identity subtrees are cached per level.
  Matrix2 message(const TreeCoordinate& x, const ProductTerm& term, const std::set<TreeCoordinate>& active,
                  std::vector<TransferMessage>* record = nullptr) {
    const bool trivial = active.count(x) == 0;
    auto& cached = identity_cache_[static_cast<std::size_t>(x.level())];
    if (trivial && cached && !record) return *cached;

    Matrix2 out;
    if (x.level() == leaf_level_) {
      out = bc_.h(leaf_level_);
    } else {
      const TreeCoordinate y = x.child(1), z = x.child(2);
      const Matrix2 my = message(y, term, active, record);
      const Matrix2 mz = message(z, term, active, record);
      const Matrix2* ay = term.factor(y);
      const Matrix2* az = term.factor(z);
      out = combine(my, mz, ay, az);
    }
    if (trivial) cached = out;
    if (record) record->push_back({x, out});
    return out;
  }

  Matrix2 combine(const Matrix2& my, const Matrix2& mz, const Matrix2* ay, const Matrix2* az) const {
    Matrix mid = Eigen::kroneckerProduct(Matrix::Identity(2, 2), Eigen::kroneckerProduct(my, mz).eval()).eval();
    Matrix full = star_ * mid * star_adj_;
    if (ay || az) {
      const Matrix2 fy = ay ? *ay : Matrix2::Identity();
      const Matrix2 fz = az ? *az : Matrix2::Identity();
      full = full * Eigen::kroneckerProduct(Matrix::Identity(2, 2), Eigen::kroneckerProduct(fy, fz).eval()).eval();
    }
    Matrix2 out = Matrix2::Zero();
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        Complex acc{};
        for (int t = 0; t < 4; ++t) acc += full(r * 4 + t, c * 4 + t);
        out(r, c) = acc / 4.0;
      }
    }
    return out;
  }

 private:
  int leaf_level_;
  Matrix star_;
  Matrix star_adj_;
  const BoundaryCondition& bc_;
  std::vector<std::optional<Matrix2>> identity_cache_;
};

inline std::set<TreeCoordinate> active_vertices(const ProductTerm& term) {
  std::set<TreeCoordinate> active;
  for (const auto& [x, m] : term.factors) {
    TreeCoordinate y = x;
    while (true) {
      active.insert(y);
      if (y.is_root()) break;
      y = y.parent();
    }
  }
  return active;
}

}  // namespace detail

inline Complex transfer_evaluate(const ProductObservable& obs, int leaf_level, double beta, const BoundaryCondition& bc) {
  if (leaf_level > kMaxTransferLevel) throw FeasibilityError("transfer engine is limited to level " + std::to_string(kMaxTransferLevel));
  detail::TransferPass pass(leaf_level, beta, bc);
  const Matrix2 w_sqrt = detail::sqrt2(bc.w0());
  const TreeCoordinate root = TreeCoordinate::root();
  Complex total{};
  for (const auto& term : obs.terms()) {
    const auto active = detail::active_vertices(term);
    const Matrix2 m_root = pass.message(root, term, active);
    const Matrix2* a_root = term.factor(root);
    Matrix2 closed = w_sqrt * m_root * w_sqrt;
    if (a_root) closed = closed * *a_root;
    total += term.coeff * closed.trace() / 2.0;
  }
  return total;
}

inline Complex expectation_transfer(const ProductObservable& obs, int n, double beta, const BoundaryCondition& bc,
                                    const EvalOptions& opts = {}) {
  require_positive_beta(beta);
  detail::require_support_within(obs, n);
  const int volume = evaluation_volume(n, resolve_form(bc, beta, n, opts));
  return transfer_evaluate(obs, volume, beta, bc);
}

/// Every message of one product term, leaves first.
inline std::vector<TransferMessage> transfer_messages(const ProductTerm& term, int leaf_level, double beta,
                                                      const BoundaryCondition& bc) {
  require_positive_beta(beta);
  if (leaf_level > 10) throw FeasibilityError("message dump is limited to level 10");
  detail::TransferPass pass(leaf_level, beta, bc);
  std::vector<TransferMessage> out;
  pass.message(TreeCoordinate::root(), term, detail::active_vertices(term), &out);
  return out;
}

/// |reduced - padded| for the same boundary data (zero for consistent data).
inline double form_gap(const ProductObservable& obs, int n, double beta, const BoundaryCondition& bc) {
  detail::require_support_within(obs, n);
  return std::abs(transfer_evaluate(obs, n, beta, bc) - transfer_evaluate(obs, n + 1, beta, bc));
}

// ---------------------------------------------------------------------------

enum class Engine { Dense, Transfer };

inline const char* to_string(Engine e) { return e == Engine::Dense ? "dense" : "transfer"; }

/// phi^(n) bound to its parameters.
class FiniteVolumeState {
 public:
  FiniteVolumeState(int n, double beta, BoundaryCondition bc, Engine engine, EvalOptions opts = {})
      : n_(n), beta_(beta), bc_(std::move(bc)), engine_(engine), opts_(opts) {
    require_positive_beta(beta_);
    if (n_ < 0) throw ParameterError("volume level must be >= 0");
    form_ = resolve_form(bc_, beta_, n_, opts_);
    const int volume = evaluation_volume(n_, form_);
    if (engine_ == Engine::Dense) {
      const bool dense_ok = ball_size(volume, kBinary) <= kMaxDenseSites ||
                            (opts_.allow_matrix_free && volume <= kMaxMatrixFreeLevel);
      if (!dense_ok) throw FeasibilityError("dense engine cannot reach this volume");
    } else if (volume > kMaxTransferLevel) {
      throw FeasibilityError("transfer engine cannot reach this volume");
    }
    opts_.form = form_;
  }

  Complex expect(const ProductObservable& obs) const {
    return engine_ == Engine::Dense ? expectation_dense(obs, n_, beta_, bc_, opts_)
                                    : expectation_transfer(obs, n_, beta_, bc_, opts_);
  }

  int n() const noexcept { return n_; }
  double beta() const noexcept { return beta_; }
  const BoundaryCondition& boundary() const noexcept { return bc_; }
  Engine engine() const noexcept { return engine_; }
  EvalForm form() const noexcept { return form_; }

 private:
  int n_;
  double beta_;
  BoundaryCondition bc_;
  Engine engine_;
  EvalOptions opts_;
  EvalForm form_ = EvalForm::Reduced;
};

// ---------------------------------------------------------------------------
// Quasi-conditional expectations
//
//   E_hat(X) = tr_{drop root}( K_[0,1]^* w0^{1/2} X w0^{1/2} K_[0,1] )
//   E_m(X)   = tr_{drop W_{m-1}}( K_[m-1,m]^* X K_[m-1,m] )
//
// chained as phi(a_L1 (x) a_W2 (x) ...) = tr( h_{n+1} E_{n+1}( ... E_2(E_hat(a_L1) a_W2) ... ) ).

namespace detail {

inline std::vector<TreeCoordinate> without(const std::vector<TreeCoordinate>& sites, const std::vector<TreeCoordinate>& drop) {
  std::vector<TreeCoordinate> out;
  for (const auto& x : sites) {
    if (std::find(drop.begin(), drop.end(), x) == drop.end()) out.push_back(x);
  }
  return out;
}

inline SiteOperator coupler_on(int m, double beta, const std::vector<TreeCoordinate>& sites) {
  SiteOperator out = SiteOperator::identity(sites);
  const Matrix kmat = k_edge_matrix(beta);
  for (const auto& x : level_set(m - 1, kBinary).vertices) {
    for (const auto& y : successors(x, kBinary)) out = out * embed(SiteOperator({x, y}, kmat), sites);
  }
  return out;
}

}  // namespace detail

/// E_hat on an operator whose sites include Lambda_1; the root is traced out.
inline SiteOperator hat_conditional(const SiteOperator& x, double beta, const BoundaryCondition& bc) {
  const auto& sites = x.sites();
  const SiteOperator k01 = detail::coupler_on(1, beta, sites);
  const SiteOperator w = embed(SiteOperator::single(TreeCoordinate::root(), detail::sqrt2(bc.w0())), sites);
  const SiteOperator inner = k01.adjoint() * w * x * w * k01;
  return normalized_partial_trace(inner, detail::without(sites, {TreeCoordinate::root()}));
}

/// E_m on an operator whose sites include W_{m-1} and W_m; W_{m-1} is traced out.
inline SiteOperator level_conditional(int m, const SiteOperator& x, double beta) {
  if (m < 1) throw ParameterError("conditional level must be >= 1");
  const auto& sites = x.sites();
  const SiteOperator k = detail::coupler_on(m, beta, sites);
  const SiteOperator inner = k.adjoint() * x * k;
  return normalized_partial_trace(inner, detail::without(sites, level_set(m - 1, kBinary).vertices));
}

/// One parent's factor of E_m: X on [x, (x,1), (x,2)] -> [(x,1), (x,2)].
inline SiteOperator star_conditional(const SiteOperator& x_op, double beta) {
  if (x_op.num_sites() != 3) throw SiteError("star conditional acts on a parent and its two children");
  const Matrix s = star_operator(beta);
  const SiteOperator star(x_op.sites(), s);
  const SiteOperator inner = star.adjoint() * x_op * star;
  return normalized_partial_trace(inner, {x_op.sites()[1], x_op.sites()[2]});
}

/// Choi matrix sum_ij E_ij (x) Phi(E_ij) of a map on operators over `in_sites`.
template <typename Map>
Matrix choi_matrix(Map&& phi, const std::vector<TreeCoordinate>& in_sites) {
  const Eigen::Index din = Eigen::Index{1} << in_sites.size();
  Matrix choi;
  for (Eigen::Index i = 0; i < din; ++i) {
    for (Eigen::Index j = 0; j < din; ++j) {
      Matrix unit = Matrix::Zero(din, din);
      unit(i, j) = 1.0;
      const Matrix img = phi(SiteOperator(in_sites, unit)).matrix();
      const Eigen::Index dout = img.rows();
      if (choi.size() == 0) choi = Matrix::Zero(din * dout, din * dout);
      choi.block(i * dout, j * dout, dout, dout) = img;
    }
  }
  return choi;
}

inline double min_hermitian_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct QuasiConditionalReport {
  int n_window = 1;
  SiteOperator hat_identity;    // E_hat(1) on W_1
  SiteOperator level2_identity; // E_2(1) on W_2
  double phi0_identity = 0.0;   // tr(h_1 E_hat(1)), equals phi^(0)(1)
  double choi_min_hat = 0.0;
  double choi_min_level2 = 0.0; // one parent's factor of E_2
  std::optional<double> module_residual;    // ||E_hat(c a) - c E_hat(a)|| with c at a W_2 site
  std::vector<double> chain_residuals_phi1; // chained maps vs phi^(1)(a) = tr(W_2] (a (x) 1)), a on Lambda_1
  std::vector<double> chain_residuals_lambda2;  // chained maps vs tr(W_2] a), a a monomial on Lambda_2
};

namespace detail {

inline Matrix2 random_matrix2(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix2 m;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) m(r, c) = Complex(g(rng), g(rng));
  }
  return m;
}

inline Matrix leaf_product(const Matrix2& h, std::size_t count) {
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < count; ++i) out = Eigen::kroneckerProduct(out, Matrix(h)).eval();
  return out;
}

}  // namespace detail

/// Materializes E_hat and E_2 on the window Lambda_{n_window} (1 or 2) and checks
/// complete positivity, the module property, and the chained evaluation.
inline QuasiConditionalReport quasi_conditional_window(int n_window, double beta, const BoundaryCondition& bc,
                                                       int monomials = 3, std::uint64_t seed = 7) {
  require_positive_beta(beta);
  if (n_window < 1 || n_window > 2) throw FeasibilityError("quasi-conditional window supports Lambda_1 and Lambda_2");
  if (bc.max_level() < 2) throw ParameterError("window checks need boundary levels up to 2");
  QuasiConditionalReport rep;
  rep.n_window = n_window;
  const auto l1 = ball(1, kBinary);
  const auto w1 = level_set(1, kBinary).vertices;
  const auto w2 = level_set(2, kBinary).vertices;
  std::vector<TreeCoordinate> w12 = w1;
  w12.insert(w12.end(), w2.begin(), w2.end());

  rep.hat_identity = hat_conditional(SiteOperator::identity(l1), beta, bc);
  rep.level2_identity = level_conditional(2, SiteOperator::identity(w12), beta);
  const SiteOperator h1(w1, detail::leaf_product(bc.h(1), w1.size()));
  rep.phi0_identity = normalized_trace(h1 * rep.hat_identity).real();

  rep.choi_min_hat = min_hermitian_eigenvalue(choi_matrix([&](const SiteOperator& x) { return hat_conditional(x, beta, bc); }, l1));
  const std::vector<TreeCoordinate> star_sites{TreeCoordinate{1}, TreeCoordinate{1, 1}, TreeCoordinate{1, 2}};
  rep.choi_min_level2 =
      min_hermitian_eigenvalue(choi_matrix([&](const SiteOperator& x) { return star_conditional(x, beta); }, star_sites));

  std::mt19937_64 rng(seed);
  const SiteOperator h2(w2, detail::leaf_product(bc.h(2), w2.size()));
  const auto l2 = ball(2, kBinary);
  EvalOptions padded;
  padded.form = EvalForm::Padded;

  for (int i = 0; i < monomials; ++i) {
    std::map<TreeCoordinate, Matrix2> f;
    for (const auto& x : l1) f[x] = detail::random_matrix2(rng);
    const auto obs = ProductObservable::product(f);
    const SiteOperator a = observable_operator(obs, l1);
    const SiteOperator lifted = embed(hat_conditional(a, beta, bc), w12);
    const Complex chained = normalized_trace(h2 * level_conditional(2, lifted, beta));
    const Complex direct = expectation_dense(obs, 1, beta, bc, padded);
    rep.chain_residuals_phi1.push_back(std::abs(chained - direct));
  }

  if (n_window == 2) {
    const auto density = build_density(2, beta, bc).density;
    for (int i = 0; i < monomials; ++i) {
      std::map<TreeCoordinate, Matrix2> f;
      for (const auto& x : l2) f[x] = detail::random_matrix2(rng);
      std::map<TreeCoordinate, Matrix2> f1, f2;
      for (const auto& [x, m] : f) (x.level() <= 1 ? f1 : f2)[x] = m;
      const SiteOperator a1 = observable_operator(ProductObservable::product(f1), l1);
      const SiteOperator a2 = observable_operator(ProductObservable::product(f2), w2);
      const SiteOperator mid = embed(hat_conditional(a1, beta, bc), w12) * embed(a2, w12);
      const Complex chained = normalized_trace(h2 * level_conditional(2, mid, beta));
      const Complex direct = normalized_trace(density * observable_operator(ProductObservable::product(f), l2));
      rep.chain_residuals_lambda2.push_back(std::abs(chained - direct));
    }

    // E_hat on the whole window commutes with multiplication by c at a W_2 site.
    std::map<TreeCoordinate, Matrix2> f;
    for (const auto& x : l2) f[x] = detail::random_matrix2(rng);
    const SiteOperator a = observable_operator(ProductObservable::product(f), l2);
    const SiteOperator c = embed(pauli(Axis::X, TreeCoordinate{1, 1}), l2);
    const auto rest = detail::without(l2, {TreeCoordinate::root()});
    const SiteOperator lhs = hat_conditional(c * a, beta, bc);
    const SiteOperator rhs = embed(pauli(Axis::X, TreeCoordinate{1, 1}), rest) * hat_conditional(a, beta, bc);
    rep.module_residual = distance(lhs, rhs);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Uniqueness and free energy

struct UniquenessReport {
  std::vector<double> alphas;
  std::vector<std::vector<Complex>> values;  // values[obs][alpha]
  double max_deviation = 0.0;
};

/// phi^(n) under solution_family(alpha) for each alpha, transfer engine.
inline UniquenessReport uniqueness_check(const std::vector<double>& alphas, const std::vector<ProductObservable>& obs_list,
                                         int n, double beta, const EvalOptions& opts = {}) {
  UniquenessReport rep;
  rep.alphas = alphas;
  std::vector<BoundaryCondition> bcs;
  for (double a : alphas) bcs.push_back(solution_family(a, beta, n + 1));
  for (const auto& obs : obs_list) {
    std::vector<Complex> row;
    for (const auto& bc : bcs) row.push_back(expectation_transfer(obs, n, beta, bc, opts));
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = i + 1; j < row.size(); ++j) rep.max_deviation = std::max(rep.max_deviation, std::abs(row[i] - row[j]));
    }
    rep.values.push_back(std::move(row));
  }
  return rep;
}

/// |V_n| is taken as |Lambda_n| = 2^(n+1) - 1.
inline double free_energy(int n, double beta, double alpha) {
  require_positive_beta(beta);
  if (n < 1) throw ParameterError("free energy needs n >= 1");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  const double boundary = std::ldexp(1.0, n + 1);  // |W_{n+1}|
  const double volume = boundary - 1.0;            // |Lambda_n|
  const double c4_log = 4.0 * std::log(std::cosh(beta));
  const double bracket = -(boundary / std::ldexp(1.0, n + 1)) * (std::log(alpha) + c4_log) + boundary * c4_log;
  return bracket / (beta * volume);
}

/// (4 / beta) log cosh beta.
inline double free_energy_limit(double beta) {
  require_positive_beta(beta);
  return 4.0 * std::log(std::cosh(beta)) / beta;
}

}  // namespace cayley_qmc
