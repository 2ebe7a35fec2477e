#include <gtest/gtest.h>

#include <random>

#include "cayley_qmc/boundary.hpp"
#include "oracles.hpp"

using namespace cayley_qmc;

namespace {

double c4(double beta) { return std::pow(std::cosh(beta), 4); }

BoundaryPoint expect_point(const PullupResult& r) {
  EXPECT_TRUE(is_admissible(r));
  return std::get<BoundaryPoint>(r);
}

}  // namespace

TEST(Boundary, PushdownExamples) {
  const auto p = pushdown({1.0, 0.0}, 1.0);
  EXPECT_NEAR(p.x, 5.669626950043876, 1e-12);
  EXPECT_EQ(p.y, 0.0);
  const auto z = pushdown({0.0, 0.0}, 0.7);
  EXPECT_EQ(z.x, 0.0);
  EXPECT_EQ(z.y, 0.0);
}

TEST(Boundary, PullupExamples) {
  const auto q = expect_point(pullup({c4(1.0), 0.0}, 1.0));
  EXPECT_NEAR(q.x, 1.0, 1e-14);
  EXPECT_EQ(q.y, 0.0);

  const auto r = pullup({1.0, 0.9}, 1.0);
  ASSERT_FALSE(is_admissible(r));
  const auto& v = std::get<DomainViolation>(r);
  EXPECT_EQ(v.kind, ViolationKind::Admissibility);
  EXPECT_NEAR(v.threshold, 1.3567358657082547, 1e-12);
  EXPECT_NEAR(admissibility_threshold({1.0, 1.0}, 1.0), 1.507481, 5e-6);
  EXPECT_GT(v.deficit, 0.0);

  EXPECT_THROW(pullup({-1.0, 0.0}, 1.0), DomainError);
  EXPECT_THROW(pullup({1.0, 0.0}, 0.0), ParameterError);
}

TEST(Boundary, RoundTrip) {
  const BoundaryPoint p{1.0, 0.5};
  const auto q = expect_point(pullup(p, 1.0));
  const auto back = pushdown(q, 1.0);
  EXPECT_NEAR(back.x, 1.0, 1e-12);
  EXPECT_NEAR(back.y, 0.5, 1e-12);
}

// Inverse pair on random admissible points, relative error.
TEST(Boundary, InversePairProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> logx(std::log(1e-3), std::log(1e3)), u(0.0, 1.0);
  int checked = 0;
  for (double beta : oracle::beta_grid()) {
    for (int i = 0; i < 500; ++i) {
      const double x = std::exp(logx(rng));
      const BoundaryPoint p{x, x * u(rng)};
      const auto r = pullup(p, beta);
      if (!is_admissible(r)) continue;
      const auto q = std::get<BoundaryPoint>(r);
      EXPECT_TRUE(q.in_domain());
      const auto back = pushdown(q, beta);
      EXPECT_LE(std::abs(back.x - p.x), 1e-12 * p.x);
      EXPECT_LE(std::abs(back.y - p.y), 1e-12 * p.x);
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

// Right at the admissibility threshold the square-root formulas produce
// x' < y', so such points are reported as having no preimage in the domain.
TEST(Boundary, PreimageOutsideDomainAtThreshold) {
  const double beta = 1.0, y = 0.4;
  const BoundaryPoint p{admissibility_threshold({1.0, y}, beta) * (1.0 + 1e-15), y};
  const auto r = pullup(p, beta);
  ASSERT_FALSE(is_admissible(r));
  EXPECT_EQ(std::get<DomainViolation>(r).kind, ViolationKind::PreimageOutsideDomain);
}

TEST(Boundary, FixedPoint) {
  const auto fp = fixed_point(1.0);
  EXPECT_NEAR(fp.x, 0.1763784476141347, 1e-15);
  EXPECT_EQ(fp.y, 0.0);
  EXPECT_NEAR(fixed_point(0.5).x, 1.0 / c4(0.5), 1e-16);
  for (double beta : oracle::beta_grid()) {
    const auto f = fixed_point(beta);
    EXPECT_LE(point_distance(expect_point(pullup(f, beta)), f), 1e-14);
    EXPECT_LE(point_distance(pushdown(f, beta), f), 1e-14);
  }
}

TEST(Boundary, DiagonalOrbit) {
  const auto orb = orbit({1.0, 0.0}, 1.0, 200);
  EXPECT_EQ(orb.termination, Termination::Converged);
  ASSERT_GE(orb.points.size(), 3u);
  EXPECT_NEAR(orb.points[1].x, 0.419974, 1e-6);
  for (std::size_t i = 1; i < orb.points.size(); ++i) {
    EXPECT_LE(orb.points[i].x, orb.points[i - 1].x);
    EXPECT_GE(orb.points[i].x, fixed_point(1.0).x - 1e-15);
  }
  EXPECT_NEAR(orb.points.back().x, fixed_point(1.0).x, 1e-13);

  for (double beta : oracle::beta_grid()) {
    for (double x0 : {1e-2, 0.5, 3.0, 40.0}) {
      const auto o = orbit({x0, 0.0}, beta, 20, 0.0);
      for (std::size_t n = 0; n < o.points.size() && n <= 20; ++n) {
        const double closed = diagonal_orbit_closed_form(x0, beta, static_cast<int>(n));
        EXPECT_LE(std::abs(o.points[n].x - closed), 1e-10 * closed) << beta << " " << x0 << " " << n;
      }
    }
  }
}

TEST(Boundary, OffDiagonalOrbitDies) {
  const auto orb = orbit({1.0, 0.5}, 1.0, 200);
  EXPECT_EQ(orb.termination, Termination::DomainViolation);
  EXPECT_EQ(orb.final_step, oracle::frozen::kOrbitHalfSteps);
  ASSERT_EQ(orb.points.size(), 2u);
  EXPECT_NEAR(orb.points[1].x, oracle::frozen::kOrbitHalfX1, 1e-13);
  EXPECT_NEAR(orb.points[1].y, oracle::frozen::kOrbitHalfY1, 1e-13);
  ASSERT_TRUE(orb.violation.has_value());

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> logx(std::log(1e-3), std::log(1e2)), u(1e-9, 1.0);
  for (double beta : {0.3, 0.7, 1.0, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const double x = std::exp(logx(rng));
      const auto o = orbit({x, x * u(rng)}, beta, 200);
      EXPECT_EQ(o.termination, Termination::DomainViolation);
      for (const auto& p : o.points) EXPECT_TRUE(p.in_domain());
    }
  }
}

TEST(Boundary, OrbitEdgeCases) {
  const auto fp = orbit(fixed_point(1.0), 1.0, 10);
  EXPECT_EQ(fp.termination, Termination::Converged);
  EXPECT_EQ(fp.final_step, 1);
  const auto capped = orbit({50.0, 0.0}, 0.3, 2);
  EXPECT_EQ(capped.termination, Termination::MaxSteps);
  EXPECT_EQ(capped.points.size(), 3u);
  EXPECT_THROW(orbit({1.0, 1.0}, 1.0, 10), DomainError);
  EXPECT_THROW(orbit({1.0, 0.0}, 1.0, 0), ParameterError);
  EXPECT_STREQ(to_string(Termination::MaxSteps), "MaxSteps");
}

TEST(Boundary, RatioContraction) {
  EXPECT_NEAR(1.0 / contraction_factor(1.0), 1.22941, 1e-5);
  EXPECT_TRUE(ratio_contraction_check({1.0, 0.5}, 1.0));
  EXPECT_THROW(ratio_contraction_check({1.0, 0.0}, 1.0), ParameterError);
  EXPECT_THROW(ratio_contraction_check({1.0, 0.9}, 1.0), DomainError);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> logx(std::log(1e-3), std::log(1e3)), u(1e-6, 1.0), b(0.05, 5.0);
  int checked = 0;
  while (checked < 10000) {
    const double beta = b(rng);
    const double x = std::exp(logx(rng));
    const BoundaryPoint p{x, x * u(rng) / contraction_factor(beta) * 0.5};
    if (!p.in_domain() || !is_admissible(pullup(p, beta))) continue;
    ASSERT_TRUE(ratio_contraction_check(p, beta)) << beta << " " << p.x << " " << p.y;
    ++checked;
  }
}

TEST(Boundary, SolutionFamily) {
  const auto two = solution_family(2.0, 1.0, 5);
  EXPECT_LE(two.eq1_residual(), 1e-15);
  EXPECT_EQ(two.max_level(), 5);
  for (double beta : {0.5, 1.0, 2.0}) {
    const double a0 = alpha_fixed(beta);
    const auto fixed = solution_family(a0, beta, 6);
    for (int n = 0; n <= 6; ++n) {
      EXPECT_LT((fixed.h(n) - Matrix2::Identity() / c4(beta)).norm(), 1e-15);
    }
    // Consecutive levels are related by pushdown.
    for (double alpha : {0.3, 1.0, 5.0}) {
      const auto bc = solution_family(alpha, beta, 8);
      for (int n = 0; n < 8; ++n) {
        const auto down = pushdown(point_from_h(bc.h(n + 1)), beta);
        EXPECT_NEAR(down.x, bc.h(n)(0, 0).real(), 1e-12 * down.x);
      }
      const auto far = solution_family(alpha, beta, 60);
      EXPECT_NEAR(far.h(60)(0, 0).real(), 1.0 / c4(beta), 1e-12);
    }
  }
  EXPECT_THROW(solution_family(0.0, 1.0, 2), ParameterError);
  EXPECT_THROW(solution_family(1.0, -1.0, 2), ParameterError);
  EXPECT_THROW(two.h(6), ParameterError);
}

TEST(Boundary, BoundaryConditionValidation) {
  Matrix2 bad;
  bad << 1, 2, 2, 1;  // indefinite
  EXPECT_THROW(BoundaryCondition(1.0, Matrix2::Identity(), {bad}), ParameterError);
  EXPECT_THROW(BoundaryCondition(1.0, Matrix2::Identity(), {}), ParameterError);
  const auto h = h_from_point({2.0, 0.5}, 0.3);
  EXPECT_NEAR(std::arg(h(0, 1)), 0.3, 1e-15);
  EXPECT_NEAR(point_from_h(h).y, 0.5, 1e-15);
}

TEST(Boundary, BoundaryFromOrbit) {
  const auto orb = orbit({1.0, 0.5}, 1.0, 50);
  const auto bc = boundary_from_orbit(orb, 0.2);
  EXPECT_EQ(bc.max_level(), static_cast<int>(orb.points.size()) - 1);
  EXPECT_LE(bc.eq1_residual(), 1e-15);
}

TEST(Boundary, LemmaInequality) {
  const auto one = lemma_inequality(1.0);
  EXPECT_NEAR(one.lhs, 4.611702, 5e-6);
  EXPECT_NEAR(one.rhs, 5.669627, 1e-6);
  EXPECT_TRUE(one.holds);
  const auto small = lemma_inequality(0.01);
  EXPECT_TRUE(small.holds);
  EXPECT_NEAR(small.rhs, 1.0002000166674225, 1e-12);
  EXPECT_TRUE(lemma_inequality(10.0).holds);
  for (int i = 1; i <= 1000; ++i) EXPECT_TRUE(lemma_inequality(0.01 * i).holds);
}

TEST(Boundary, AppendixPolynomial) {
  EXPECT_EQ(appendix_polynomial(1.0), 8.0);
  EXPECT_EQ(appendix_polynomial(2.0), 17.0);
  for (int i = 1; i <= 10000; ++i) {
    const double t = 1.0 + 99.0 * i / 10000.0;
    ASSERT_GT(appendix_polynomial(t), 0.0) << t;
  }
  for (double beta : oracle::beta_grid()) {
    const double c = std::cosh(beta), s = std::sinh(beta);
    const double direct = c * c * c - s * (1.0 + c);
    EXPECT_NEAR(appendix_substitution(beta), direct, 1e-12 * c * c * c);
    EXPECT_GT(direct, 0.0);
  }
}

TEST(Boundary, AppendixCases) {
  std::vector<int> seen(5, 0);
  for (int i = 1; i <= 4000; ++i) {
    const double t = 1.0 + 5.0 * i / 4000.0;
    const auto c = appendix_case(t);
    ++seen[static_cast<std::size_t>(c.index)];
    for (double term : c.terms) EXPECT_GE(term, -1e-12) << "case " << c.index << " t=" << t;
    EXPECT_NEAR(c.sum(), c.scale * appendix_polynomial(t), 1e-9 * std::max(1.0, c.sum())) << t;
  }
  for (int k = 1; k <= 4; ++k) EXPECT_GT(seen[static_cast<std::size_t>(k)], 0);
  EXPECT_THROW(appendix_case(1.0), ParameterError);
}

TEST(Boundary, PeriodicSearch) {
  const auto r = periodic_point_search(0.7, 6, 1000, 3);
  EXPECT_TRUE(r.hits.empty());
  EXPECT_EQ(r.samples, 1000);
  EXPECT_EQ(r.diagonal_starts, 100);
  EXPECT_EQ(r.converged, r.diagonal_starts);
  EXPECT_EQ(r.violated, r.samples - r.diagonal_starts);
  EXPECT_THROW(periodic_point_search(0.7, 1, 10), ParameterError);
}
