#pragma once

// Geometry of the rooted Cayley tree of order k: every vertex has k direct
// successors. A vertex is addressed by its path from the root, (i_1,...,i_n)
// with each i_m in 1..k; the root is the empty path.
//
// Orderings:
//   * forward order of a level is lexicographic in the path, so the first
//     vertex of W_n is (1,...,1) and the last is (k,...,k);
//   * backward order is its exact reverse;
//   * ball(n) concatenates W_0, W_1, ..., W_n, each in forward order. The
//     position of a vertex in this list is its tensor leg index, with the
//     first leg the most significant qubit.

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cayley_qmc/errors.hpp"

namespace cayley_qmc {

class TreeCoordinate {
 public:
  TreeCoordinate() = default;

  explicit TreeCoordinate(std::vector<int> digits) : digits_(std::move(digits)) {
    for (int d : digits_) {
      if (d < 1) throw ParameterError("tree coordinate digits must be >= 1");
    }
  }

  TreeCoordinate(std::initializer_list<int> digits) : TreeCoordinate(std::vector<int>(digits)) {}

  static TreeCoordinate root() { return TreeCoordinate(); }

  int level() const noexcept { return static_cast<int>(digits_.size()); }
  bool is_root() const noexcept { return digits_.empty(); }
  const std::vector<int>& digits() const noexcept { return digits_; }

  TreeCoordinate child(int i) const {
    std::vector<int> d = digits_;
    d.push_back(i);
    return TreeCoordinate(std::move(d));
  }

  TreeCoordinate parent() const {
    if (is_root()) throw SiteError("the root has no parent");
    return TreeCoordinate(std::vector<int>(digits_.begin(), digits_.end() - 1));
  }

  /// True if this vertex lies in the subtree rooted at `ancestor` (inclusive).
  bool descends_from(const TreeCoordinate& ancestor) const noexcept {
    if (ancestor.level() > level()) return false;
    return std::equal(ancestor.digits_.begin(), ancestor.digits_.end(), digits_.begin());
  }

  bool valid_for_order(int k) const noexcept {
    return std::all_of(digits_.begin(), digits_.end(), [k](int d) { return d >= 1 && d <= k; });
  }

  /// Dot-separated digits, "" for the root.
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < digits_.size(); ++i) {
      if (i) out += '.';
      out += std::to_string(digits_[i]);
    }
    return out;
  }

  static TreeCoordinate parse(std::string_view text) {
    std::vector<int> digits;
    if (text.empty()) return TreeCoordinate();
    std::size_t start = 0;
    while (true) {
      std::size_t dot = text.find('.', start);
      std::string_view part = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
      int value = 0;
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
      if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() || value < 1) {
        throw ParseError("invalid vertex \"" + std::string(text) + "\"", start);
      }
      digits.push_back(value);
      if (dot == std::string_view::npos) break;
      start = dot + 1;
    }
    return TreeCoordinate(std::move(digits));
  }

  // Lexicographic on the path; within one level this is the forward order.
  auto operator<=>(const TreeCoordinate&) const = default;
  bool operator==(const TreeCoordinate&) const = default;

 private:
  std::vector<int> digits_;
};

struct TreeCoordinateHash {
  std::size_t operator()(const TreeCoordinate& x) const noexcept {
    std::size_t h = 0x9e3779b97f4a7c15ull;
    for (int d : x.digits()) h ^= static_cast<std::size_t>(d) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h ^ static_cast<std::size_t>(x.level());
  }
};

struct LevelSet {
  int n = 0;
  int k = 2;
  std::vector<TreeCoordinate> vertices;  // forward order

  std::size_t size() const noexcept { return vertices.size(); }

  std::vector<TreeCoordinate> backward() const { return {vertices.rbegin(), vertices.rend()}; }
};

/// Direct successors ((x,1),...,(x,k)) in forward order.
inline std::vector<TreeCoordinate> successors(const TreeCoordinate& x, int k) {
  if (k < 1) throw ParameterError("tree order k must be >= 1");
  std::vector<TreeCoordinate> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) out.push_back(x.child(i));
  return out;
}

inline LevelSet level_set(int n, int k) {
  if (n < 0) throw ParameterError("level must be >= 0");
  if (k < 1) throw ParameterError("tree order k must be >= 1");
  std::vector<TreeCoordinate> current{TreeCoordinate::root()};
  for (int m = 0; m < n; ++m) {
    std::vector<TreeCoordinate> next;
    next.reserve(current.size() * static_cast<std::size_t>(k));
    for (const auto& x : current) {
      for (auto& y : successors(x, k)) next.push_back(std::move(y));
    }
    current = std::move(next);
  }
  return LevelSet{n, k, std::move(current)};
}

/// Lambda_n in leg order.
inline std::vector<TreeCoordinate> ball(int n, int k) {
  std::vector<TreeCoordinate> out;
  for (int m = 0; m <= n; ++m) {
    auto level = level_set(m, k);
    out.insert(out.end(), level.vertices.begin(), level.vertices.end());
  }
  return out;
}

/// |Lambda_n| = 1 + k + ... + k^n.
inline std::size_t ball_size(int n, int k) {
  std::size_t total = 0;
  std::size_t layer = 1;
  for (int m = 0; m <= n; ++m) {
    total += layer;
    layer *= static_cast<std::size_t>(k);
  }
  return total;
}

/// Vertex -> leg lookup for a ball.
class LegIndex {
 public:
  explicit LegIndex(const std::vector<TreeCoordinate>& sites) {
    for (std::size_t i = 0; i < sites.size(); ++i) index_.emplace(sites[i], i);
  }

  bool contains(const TreeCoordinate& x) const { return index_.count(x) != 0; }

  std::size_t at(const TreeCoordinate& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) throw SiteError("vertex \"" + x.to_string() + "\" is not in the volume");
    return it->second;
  }

 private:
  std::unordered_map<TreeCoordinate, std::size_t, TreeCoordinateHash> index_;
};

}  // namespace cayley_qmc
