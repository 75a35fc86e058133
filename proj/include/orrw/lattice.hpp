#pragma once

#include <absl/container/flat_hash_set.h>

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace orrw {

// Points carry their coordinates inline; dimensions above this are rejected.
inline constexpr int kMaxDim = 8;

/// A vertex of Z^d.
class Point {
 public:
  Point() = default;
  explicit Point(int dim);
  Point(std::initializer_list<std::int32_t> coords);
  explicit Point(std::span<const std::int32_t> coords);

  static Point origin(int dim) { return Point(dim); }

  int dim() const noexcept { return dim_; }
  std::int32_t operator[](int i) const noexcept { return c_[static_cast<std::size_t>(i)]; }
  std::int32_t& operator[](int i) noexcept { return c_[static_cast<std::size_t>(i)]; }
  std::span<const std::int32_t> coords() const noexcept {
    return {c_.data(), static_cast<std::size_t>(dim_)};
  }

  Point operator+(const Point& o) const noexcept;
  Point operator-(const Point& o) const noexcept;

  friend bool operator==(const Point& x, const Point& y) noexcept {
    return x.dim_ == y.dim_ && x.c_ == y.c_;
  }
  friend std::strong_ordering operator<=>(const Point& x, const Point& y) noexcept;

  template <typename H>
  friend H AbslHashValue(H h, const Point& p) {
    return H::combine_contiguous(std::move(h), p.c_.data(), static_cast<std::size_t>(p.dim_));
  }

 private:
  std::array<std::int32_t, kMaxDim> c_{};
  std::int32_t dim_ = 0;
};

using PointSet = absl::flat_hash_set<Point>;

std::int64_t norm_linf(const Point& p) noexcept;
std::int64_t norm_l1(const Point& p) noexcept;
std::int64_t norm_l2_squared(const Point& p) noexcept;
double norm_l2(const Point& p) noexcept;

/// Neighbour `i` in the fixed order +e1, -e1, +e2, -e2, ..., +ed, -ed.
Point neighbor(const Point& u, int i) noexcept;
std::vector<Point> neighbors(const Point& u);
/// Index i with neighbor(u, i) == v, or -1 when u and v are not adjacent.
int direction_to(const Point& u, const Point& v) noexcept;
bool adjacent(const Point& u, const Point& v) noexcept;

/// Undirected nearest-neighbour edge stored with the lexicographically smaller endpoint first.
class Edge {
 public:
  Edge(const Point& a, const Point& b);

  const Point& lo() const noexcept { return lo_; }
  const Point& hi() const noexcept { return hi_; }
  int axis() const noexcept;
  bool has_endpoint(const Point& p) const noexcept { return p == lo_ || p == hi_; }
  const Point& other(const Point& p) const noexcept { return p == lo_ ? hi_ : lo_; }

  friend bool operator==(const Edge&, const Edge&) = default;
  friend std::strong_ordering operator<=>(const Edge& x, const Edge& y) noexcept {
    if (auto c = x.lo_ <=> y.lo_; c != 0) return c;
    return x.hi_ <=> y.hi_;
  }
  template <typename H>
  friend H AbslHashValue(H h, const Edge& e) {
    return H::combine(std::move(h), e.lo_, e.hi_);
  }

 private:
  Point lo_;
  Point hi_;
};

/// L-infinity ball center + [-radius, radius]^d.
struct Box {
  Point center;
  std::int32_t radius = 0;

  int dim() const noexcept { return center.dim(); }
  bool contains(const Point& u) const noexcept;
  /// Membership in the closure: the box plus every vertex with a neighbour in it.
  bool closure_contains(const Point& u) const noexcept;
  bool contains_box(const Box& other) const noexcept;
  std::int64_t volume() const noexcept;
  /// All vertices in lexicographic order.
  std::vector<Point> vertices() const;

  friend bool operator==(const Box&, const Box&) = default;
};

std::vector<Edge> boundary_edges(const Box& box);
std::vector<Point> closure(const Box& box);

/// A strict nearest-neighbour path, or a teleporting path relative to `box`.
struct PathSeq {
  enum class Kind { kStrict, kTeleporter };

  std::vector<Point> vertices;
  Kind kind = Kind::kStrict;
  Box box;  // only meaningful for teleporters

  static PathSeq strict(std::vector<Point> vertices);
  static PathSeq teleporter(std::vector<Point> vertices, Box box);

  bool empty() const noexcept { return vertices.empty(); }
  std::size_t length() const noexcept { return vertices.empty() ? 0 : vertices.size() - 1; }
  bool is_valid() const;
};

/// Restriction of a path (or of a teleporter in a strictly larger box) to `box`, keeping
/// entries and exits and dropping the excursions between them.
PathSeq restrict_to(const PathSeq& path, const Box& box);

}  // namespace orrw
