#include <gtest/gtest.h>

#include <set>

#include "cayley_qmc/tree.hpp"

using namespace cayley_qmc;

TEST(Tree, LevelSetForwardOrder) {
  const auto w2 = level_set(2, 2);
  ASSERT_EQ(w2.size(), 4u);
  EXPECT_EQ(w2.vertices[0], (TreeCoordinate{1, 1}));
  EXPECT_EQ(w2.vertices[1], (TreeCoordinate{1, 2}));
  EXPECT_EQ(w2.vertices[3], (TreeCoordinate{2, 2}));
  EXPECT_EQ(level_set(3, 2).size(), 8u);
  const auto w0 = level_set(0, 2);
  ASSERT_EQ(w0.size(), 1u);
  EXPECT_TRUE(w0.vertices[0].is_root());
}

TEST(Tree, LevelSetGeneralOrder) {
  const auto w3 = level_set(3, 3);
  EXPECT_EQ(w3.size(), 27u);
  EXPECT_EQ(w3.vertices.front(), (TreeCoordinate{1, 1, 1}));
  EXPECT_EQ(w3.vertices[2], (TreeCoordinate{1, 1, 3}));
  EXPECT_EQ(w3.vertices[3], (TreeCoordinate{1, 2, 1}));
  EXPECT_EQ(w3.vertices.back(), (TreeCoordinate{3, 3, 3}));
  auto back = w3.backward();
  std::reverse(back.begin(), back.end());
  EXPECT_EQ(back, w3.vertices);
}

TEST(Tree, Successors) {
  const auto s = successors(TreeCoordinate{1, 2}, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], (TreeCoordinate{1, 2, 1}));
  EXPECT_EQ(s[1], (TreeCoordinate{1, 2, 2}));
  const auto r = successors(TreeCoordinate::root(), 2);
  EXPECT_EQ(r[0], TreeCoordinate{1});
  EXPECT_EQ(r[1], TreeCoordinate{2});
  for (const auto& y : successors(TreeCoordinate{2, 1}, 4)) EXPECT_EQ(y.level(), 3);
}

TEST(Tree, Ball) {
  EXPECT_EQ(ball(2, 2).size(), 7u);
  EXPECT_EQ(ball(3, 2).size(), 15u);
  EXPECT_EQ(ball_size(3, 2), 15u);
  EXPECT_EQ(ball_size(2, 3), 13u);
  const auto b1 = ball(1, 2);
  ASSERT_EQ(b1.size(), 3u);
  EXPECT_TRUE(b1[0].is_root());
  EXPECT_EQ(b1[1], TreeCoordinate{1});
  EXPECT_EQ(b1[2], TreeCoordinate{2});
}

// Structural invariants over a few orders and depths.
TEST(Tree, Invariants) {
  for (int k = 1; k <= 4; ++k) {
    for (int n = 0; n <= 4; ++n) {
      const auto b = ball(n, k);
      std::set<TreeCoordinate> seen(b.begin(), b.end());
      EXPECT_EQ(seen.size(), b.size()) << "ball has duplicates";
      std::size_t offset = 0;
      for (int m = 0; m <= n; ++m) {
        const auto w = level_set(m, k).vertices;
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(b[offset + i], w[i]);
        offset += w.size();
      }
      EXPECT_EQ(offset, b.size());
      for (const auto& x : b) {
        if (!x.is_root()) {
          EXPECT_TRUE(seen.count(x.parent()));
        }
      }
      if (n > 0) {
        std::vector<TreeCoordinate> expanded;
        for (const auto& x : level_set(n - 1, k).vertices) {
          for (const auto& y : successors(x, k)) expanded.push_back(y);
        }
        EXPECT_EQ(expanded, level_set(n, k).vertices);
      }
    }
  }
}

TEST(Tree, TextRoundTrip) {
  EXPECT_EQ(TreeCoordinate::parse(""), TreeCoordinate::root());
  EXPECT_EQ(TreeCoordinate::parse("1.2.1"), (TreeCoordinate{1, 2, 1}));
  EXPECT_EQ((TreeCoordinate{2, 1}).to_string(), "2.1");
  for (const auto& x : ball(3, 2)) EXPECT_EQ(TreeCoordinate::parse(x.to_string()), x);
  EXPECT_THROW(TreeCoordinate::parse("1..2"), ParseError);
  EXPECT_THROW(TreeCoordinate::parse("1.a"), ParseError);
  EXPECT_THROW(TreeCoordinate::parse("0"), ParseError);
  EXPECT_THROW(TreeCoordinate::parse("1."), ParseError);
}

TEST(Tree, LegIndexAndErrors) {
  const auto b = ball(2, 2);
  const LegIndex legs(b);
  EXPECT_EQ(legs.at(TreeCoordinate::root()), 0u);
  EXPECT_EQ(legs.at(TreeCoordinate{2, 1}), 5u);
  EXPECT_THROW(legs.at(TreeCoordinate{1, 1, 1}), SiteError);
  EXPECT_THROW(level_set(-1, 2), ParameterError);
  EXPECT_THROW(level_set(1, 0), ParameterError);
  EXPECT_THROW(TreeCoordinate::root().parent(), SiteError);
  EXPECT_TRUE((TreeCoordinate{1, 2, 1}).descends_from(TreeCoordinate{1, 2}));
  EXPECT_FALSE((TreeCoordinate{1, 1}).descends_from(TreeCoordinate{1, 2}));
}
