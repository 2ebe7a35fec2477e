#pragma once

// Boundary data for the XY-model chain on the binary tree.
//
// Level-homogeneous boundary matrices h^(n) = [[x, y e^{i phi}], [y e^{-i phi}, x]]
// are tracked through the point (x, y) = (a11, |a12|). The recursion that links
// level n+1 to level n is
//
//   x = x'^2 cosh^4 b + y'^2 sinh^2 b cosh b                      (pushdown)
//   y = x' y' sinh b cosh b (1 + cosh b)
//
// and pullup is its explicit inverse, defined when
//
//   x >= 2 y sqrt(cosh^3 b) / (1 + cosh b).
//
// Points live in Delta = {x > y >= 0}; positivity of h^(n) requires it.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cayley_qmc/linalg.hpp"
#include "cayley_qmc/model.hpp"

namespace cayley_qmc {

struct BoundaryPoint {
  double x = 0.0;
  double y = 0.0;

  bool in_domain() const noexcept { return std::isfinite(x) && std::isfinite(y) && y >= 0.0 && x > y; }
  friend bool operator==(const BoundaryPoint&, const BoundaryPoint&) = default;
};

inline double point_distance(const BoundaryPoint& a, const BoundaryPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Why a point has no admissible preimage.
enum class ViolationKind {
  Admissibility,      // x < threshold: the square roots are undefined
  PreimageOutsideDomain,  // roots exist but give x' <= y'
};

struct DomainViolation {
  ViolationKind kind = ViolationKind::Admissibility;
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;  // 2 y sqrt(cosh^3 b) / (1 + cosh b)
  double deficit = 0.0;    // threshold - x for Admissibility, y' - x' otherwise
};

using PullupResult = std::variant<BoundaryPoint, DomainViolation>;

namespace detail {

struct Hyperbolics {
  double c, s;
  explicit Hyperbolics(double beta) : c(std::cosh(beta)), s(std::sinh(beta)) {}
  double c4() const { return c * c * c * c; }
  // 2 sqrt(cosh^3) / (1 + cosh)
  double threshold_slope() const { return 2.0 * std::sqrt(c * c * c) / (1.0 + c); }
};

}  // namespace detail

/// Level n+1 data -> level n data. Polynomial, defined everywhere.
inline BoundaryPoint pushdown(const BoundaryPoint& p, double beta) {
  const detail::Hyperbolics hb(beta);
  return {p.x * p.x * hb.c4() + p.y * p.y * hb.s * hb.s * hb.c, p.x * p.y * hb.s * hb.c * (1.0 + hb.c)};
}

inline double admissibility_threshold(const BoundaryPoint& p, double beta) {
  return p.y * detail::Hyperbolics(beta).threshold_slope();
}

namespace detail {

// The square-root formulas themselves; nullopt when x is below the threshold.
inline std::optional<BoundaryPoint> pullup_roots(const BoundaryPoint& p, double beta) {
  const Hyperbolics hb(beta);
  const double threshold = p.y * hb.threshold_slope();
  if (p.x < threshold) return std::nullopt;
  const double coef = hb.c * hb.c * hb.c / ((1.0 + hb.c) * (1.0 + hb.c));
  const double d = std::sqrt(std::max(p.x * p.x - 4.0 * p.y * p.y * coef, 0.0));
  const double xp = std::sqrt((p.x + d) / (2.0 * hb.c4()));
  if (p.y == 0.0) return BoundaryPoint{xp, 0.0};
  if (xp == 0.0) return BoundaryPoint{0.0, 0.0};
  // y' from the second recursion equation; same value as the closed-form root
  // sqrt((x - d) / (2 sinh^2 cosh)) without its cancellation at small y.
  const double yp = p.y / (xp * hb.s * hb.c * (1.0 + hb.c));
  return BoundaryPoint{xp, yp};
}

inline void require_nonnegative(const BoundaryPoint& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0) {
    throw DomainError("boundary point must have finite nonnegative coordinates");
  }
}

}  // namespace detail

/// Level n data -> the unique level n+1 data in Delta, or the reason none exists.
inline PullupResult pullup(const BoundaryPoint& p, double beta) {
  require_positive_beta(beta);
  detail::require_nonnegative(p);
  const double threshold = admissibility_threshold(p, beta);
  auto roots = detail::pullup_roots(p, beta);
  if (!roots) return DomainViolation{ViolationKind::Admissibility, p.x, p.y, threshold, threshold - p.x};
  if (!roots->in_domain()) {
    return DomainViolation{ViolationKind::PreimageOutsideDomain, p.x, p.y, threshold, roots->y - roots->x};
  }
  return *roots;
}

inline bool is_admissible(const PullupResult& r) { return std::holds_alternative<BoundaryPoint>(r); }

inline BoundaryPoint fixed_point(double beta) {
  require_positive_beta(beta);
  return {1.0 / detail::Hyperbolics(beta).c4(), 0.0};
}

enum class Termination { Converged, DomainViolation, MaxSteps };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "Converged";
    case Termination::DomainViolation:
      return "DomainViolation";
    case Termination::MaxSteps:
      return "MaxSteps";
  }
  return "?";
}

struct OrbitResult {
  std::vector<BoundaryPoint> points;  // points[0] is the start
  Termination termination = Termination::MaxSteps;
  // Index of the last point; for DomainViolation it is the point with no admissible preimage.
  int final_step = 0;
  std::optional<DomainViolation> violation;

  /// Whether points[i] can be pulled up.
  bool admissible(std::size_t i) const {
    return !(termination == Termination::DomainViolation && i + 1 == points.size());
  }
};

inline constexpr double kOrbitConvergenceTol = 1e-13;

/// Iterates pullup from p0 until the step length drops to `convergence_tol`,
/// no admissible preimage exists, or `max_steps` pullups were taken.
inline OrbitResult orbit(const BoundaryPoint& p0, double beta, int max_steps,
                         double convergence_tol = kOrbitConvergenceTol) {
  require_positive_beta(beta);
  if (max_steps < 1) throw ParameterError("max_steps must be >= 1");
  if (!p0.in_domain()) throw DomainError("orbit start must satisfy x > y >= 0");
  OrbitResult out;
  out.points.push_back(p0);
  for (int step = 1; step <= max_steps; ++step) {
    const auto next = pullup(out.points.back(), beta);
    if (const auto* v = std::get_if<DomainViolation>(&next)) {
      out.termination = Termination::DomainViolation;
      out.violation = *v;
      out.final_step = step - 1;
      return out;
    }
    const BoundaryPoint q = std::get<BoundaryPoint>(next);
    const double moved = point_distance(q, out.points.back());
    out.points.push_back(q);
    if (moved <= convergence_tol) {
      out.termination = Termination::Converged;
      out.final_step = step;
      return out;
    }
  }
  out.termination = Termination::MaxSteps;
  out.final_step = max_steps;
  return out;
}

/// x^(n) = (x0 cosh^4 b)^(1/2^n) / cosh^4 b for a start on the diagonal y = 0.
inline double diagonal_orbit_closed_form(double x0, double beta, int n) {
  const double c4 = detail::Hyperbolics(beta).c4();
  return std::pow(x0 * c4, std::ldexp(1.0, -n)) / c4;
}

inline double contraction_factor(double beta) {
  const detail::Hyperbolics hb(beta);
  return hb.s * (1.0 + hb.c) / (hb.c * hb.c * hb.c);
}

/// x'/y' < contraction_factor(b) * x/y for the pullup image of p.
inline bool ratio_contraction_check(const BoundaryPoint& p, double beta) {
  require_positive_beta(beta);
  if (p.y == 0.0) throw ParameterError("ratio contraction needs y > 0");
  if (!p.in_domain()) throw DomainError("ratio contraction needs a point in the domain");
  auto roots = detail::pullup_roots(p, beta);
  if (!roots) throw DomainError("ratio contraction needs an admissible point");
  return roots->x / roots->y < contraction_factor(beta) * (p.x / p.y);
}

/// Root weight w0 and per-level boundary matrices h^(n), n = 0..max_level().
class BoundaryCondition {
 public:
  BoundaryCondition(double alpha, Matrix2 w0, std::vector<Matrix2> h_levels)
      : alpha_(alpha), w0_(std::move(w0)), h_(std::move(h_levels)) {
    if (h_.empty()) throw ParameterError("boundary condition needs at least h^(0)");
    require_positive_definite(w0_, "w0");
    for (std::size_t n = 0; n < h_.size(); ++n) require_positive_definite(h_[n], "h^(" + std::to_string(n) + ")");
  }

  double alpha() const noexcept { return alpha_; }
  const Matrix2& w0() const noexcept { return w0_; }
  const Matrix2& h(int level) const {
    if (level < 0 || level > max_level()) {
      throw ParameterError("boundary condition has no level " + std::to_string(level) + " (max " +
                           std::to_string(max_level()) + ")");
    }
    return h_[static_cast<std::size_t>(level)];
  }
  int max_level() const noexcept { return static_cast<int>(h_.size()) - 1; }
  const std::vector<Matrix2>& h_levels() const noexcept { return h_; }

  /// |tr(w0 h^(0)) - 1| with the normalized trace.
  double eq1_residual() const { return std::abs((w0_ * h_[0]).trace() / 2.0 - 1.0); }

 private:
  static void require_positive_definite(const Matrix2& m, const std::string& name) {
    if ((m - m.adjoint()).norm() > kDefaultRelTol * m.norm()) throw ParameterError(name + " is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix2> es(m, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw ParameterError(name + " is not positive definite");
  }

  double alpha_;
  Matrix2 w0_;
  std::vector<Matrix2> h_;
};

inline Matrix2 h_from_point(const BoundaryPoint& p, double phase = 0.0) {
  Matrix2 h;
  const Complex off = std::polar(p.y, phase);
  h << p.x, off, std::conj(off), p.x;
  return h;
}

inline BoundaryPoint point_from_h(const Matrix2& h) { return {h(0, 0).real(), std::abs(h(0, 1))}; }

/// w0 = I / alpha, h^(n) = (alpha cosh^4 b)^(1/2^n) / cosh^4 b * I.
/// alpha = 1 / cosh^4 b gives the constant fixed-point family.
inline BoundaryCondition solution_family(double alpha, double beta, int n_max) {
  require_positive_beta(beta);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be a positive finite number");
  if (n_max < 0) throw ParameterError("n_max must be >= 0");
  const double c4 = detail::Hyperbolics(beta).c4();
  std::vector<Matrix2> h;
  h.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) {
    h.push_back(Matrix2::Identity() * (std::pow(alpha * c4, std::ldexp(1.0, -n)) / c4));
  }
  return BoundaryCondition(alpha, Matrix2::Identity() / alpha, std::move(h));
}

inline double alpha_fixed(double beta) { return 1.0 / detail::Hyperbolics(beta).c4(); }

/// Boundary data read off a pulled-up orbit: h^(n) from points[n] with a common
/// off-diagonal phase, w0 = I / x0 so that tr(w0 h^(0)) = 1.
inline BoundaryCondition boundary_from_orbit(const OrbitResult& orb, double phase = 0.0) {
  std::vector<Matrix2> h;
  for (const auto& p : orb.points) h.push_back(h_from_point(p, phase));
  const double x0 = orb.points.front().x;
  return BoundaryCondition(1.0 / x0, Matrix2::Identity() / x0, std::move(h));
}

struct LemmaInequality {
  double lhs;  // sinh b cosh b (1 + cosh b)
  double rhs;  // cosh^4 b
  bool holds;  // 0 < lhs < rhs
};

inline LemmaInequality lemma_inequality(double beta) {
  require_positive_beta(beta);
  const detail::Hyperbolics hb(beta);
  const double lhs = hb.s * hb.c * (1.0 + hb.c);
  const double rhs = hb.c4();
  return {lhs, rhs, 0.0 < lhs && lhs < rhs};
}

/// p(t) = t^6 - 2t^5 - t^4 + 7t^2 + 2t + 1.
inline double appendix_polynomial(double t) {
  return ((((t - 2.0) * t - 1.0) * t * t + 7.0) * t + 2.0) * t + 1.0;
}

/// cosh^3 b - sinh b (1 + cosh b) rewritten through p: equals p(e^b) / (8 e^{3b}).
inline double appendix_substitution(double beta) { return appendix_polynomial(std::exp(beta)) / (8.0 * std::exp(3.0 * beta)); }

/// Sum-of-nonnegative-terms split of p(t) on one of four ranges of t > 1.
/// `scale` * p(t) equals the sum of `terms`.
struct AppendixCase {
  int index = 0;  // 1: t >= 1+sqrt2, 2: [2, 1+sqrt2], 3: [sqrt(7/2), 2], 4: (1, sqrt(7/2)]
  double scale = 1.0;
  std::vector<double> terms;

  double sum() const {
    double s = 0.0;
    for (double v : terms) s += v;
    return s;
  }
};

inline AppendixCase appendix_case(double t) {
  if (!(t > 1.0)) throw ParameterError("the case split covers t > 1 only");
  const double r2 = std::sqrt(2.0);
  const double t2 = t * t, t4 = t2 * t2, t5 = t4 * t;
  if (t >= 1.0 + r2) {
    return {1, 1.0, {t4 * (t - (1.0 + r2)) * (t - (1.0 - r2)), 7.0 * t2, 2.0 * t, 1.0}};
  }
  if (t >= 2.0) {
    return {2, 1.0, {t5 * (t - 2.0), t2 * (7.0 - t2), 2.0 * t, 1.0}};
  }
  if (t >= std::sqrt(3.5)) {
    return {3, 2.0, {2.0 * t4 * (t2 - 3.5), 2.5 * t4 * (2.0 - t), 1.5 * t2 * (8.0 - t2 * t), 2.0 * t2, 4.0 * t, 2.0}};
  }
  return {4, 1.0, {t4 * (t - 1.0) * (t - 1.0), t2 * (7.0 - 2.0 * t2), 2.0 * t, 1.0}};
}

struct PeriodicHit {
  BoundaryPoint start;
  int period = 0;
  int step = 0;
};

struct PeriodicSearchReport {
  double beta = 0.0;
  int samples = 0;
  int k_max = 0;
  int diagonal_starts = 0;
  int converged = 0;
  int violated = 0;
  std::vector<PeriodicHit> hits;
};

/// Samples starts in Delta and looks for orbits that return within `tol` of an
/// earlier point after p >= 2 steps (excluding orbits sitting at a fixed point).
/// Every tenth start lies on the diagonal.
inline PeriodicSearchReport periodic_point_search(double beta, int k_max, int samples, std::uint64_t seed = 0,
                                                  int max_steps = 200, double tol = 1e-10) {
  require_positive_beta(beta);
  if (k_max < 2) throw ParameterError("k_max must be >= 2");
  PeriodicSearchReport report{beta, samples, k_max, 0, 0, 0, {}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_x(std::log(1e-3), std::log(1e2));
  std::uniform_real_distribution<double> ratio(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    BoundaryPoint p0{std::exp(log_x(rng)), 0.0};
    const double u = ratio(rng);
    if (s % 10 == 0) {
      ++report.diagonal_starts;
    } else {
      p0.y = p0.x * u;
    }
    if (!p0.in_domain()) continue;
    const OrbitResult orb = orbit(p0, beta, max_steps, 0.0);
    if (orb.termination == Termination::DomainViolation) ++report.violated;
    const auto& pts = orb.points;
    bool settled = false;
    for (std::size_t j = 1; j < pts.size() && !settled; ++j) {
      if (point_distance(pts[j], pts[j - 1]) <= tol) {
        ++report.converged;
        settled = true;
        break;
      }
      for (int period = 2; period <= k_max && static_cast<std::size_t>(period) <= j; ++period) {
        if (point_distance(pts[j], pts[j - static_cast<std::size_t>(period)]) <= tol) {
          report.hits.push_back({p0, period, static_cast<int>(j)});
          settled = true;
          break;
        }
      }
    }
  }
  return report;
}

}  // namespace cayley_qmc
