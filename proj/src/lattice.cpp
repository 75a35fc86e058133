#include "orrw/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "orrw/error.hpp"

namespace orrw {

namespace {

void check_dim(std::size_t dim) {
  if (dim < 1 || dim > static_cast<std::size_t>(kMaxDim)) {
    throw InvalidArgument("dimension must be in [1, " + std::to_string(kMaxDim) + "], got " +
                          std::to_string(dim));
  }
}

}  // namespace

Point::Point(int dim) : dim_(dim) { check_dim(static_cast<std::size_t>(dim)); }

Point::Point(std::initializer_list<std::int32_t> coords)
    : dim_(static_cast<std::int32_t>(coords.size())) {
  check_dim(coords.size());
  std::copy(coords.begin(), coords.end(), c_.begin());
}

Point::Point(std::span<const std::int32_t> coords) : dim_(static_cast<std::int32_t>(coords.size())) {
  check_dim(coords.size());
  std::copy(coords.begin(), coords.end(), c_.begin());
}

Point Point::operator+(const Point& o) const noexcept {
  Point r = *this;
  for (int i = 0; i < dim_; ++i) r[i] += o[i];
  return r;
}

Point Point::operator-(const Point& o) const noexcept {
  Point r = *this;
  for (int i = 0; i < dim_; ++i) r[i] -= o[i];
  return r;
}

std::strong_ordering operator<=>(const Point& x, const Point& y) noexcept {
  if (auto c = x.dim_ <=> y.dim_; c != 0) return c;
  for (int i = 0; i < x.dim_; ++i) {
    if (auto c = x[i] <=> y[i]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::int64_t norm_linf(const Point& p) noexcept {
  std::int64_t m = 0;
  for (int i = 0; i < p.dim(); ++i) m = std::max<std::int64_t>(m, std::abs(std::int64_t{p[i]}));
  return m;
}

std::int64_t norm_l1(const Point& p) noexcept {
  std::int64_t s = 0;
  for (int i = 0; i < p.dim(); ++i) s += std::abs(std::int64_t{p[i]});
  return s;
}

std::int64_t norm_l2_squared(const Point& p) noexcept {
  std::int64_t s = 0;
  for (int i = 0; i < p.dim(); ++i) s += std::int64_t{p[i]} * p[i];
  return s;
}

double norm_l2(const Point& p) noexcept { return std::sqrt(static_cast<double>(norm_l2_squared(p))); }

Point neighbor(const Point& u, int i) noexcept {
  Point v = u;
  v[i / 2] += (i % 2 == 0) ? 1 : -1;
  return v;
}

std::vector<Point> neighbors(const Point& u) {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(2 * u.dim()));
  for (int i = 0; i < 2 * u.dim(); ++i) out.push_back(neighbor(u, i));
  return out;
}

int direction_to(const Point& u, const Point& v) noexcept {
  if (u.dim() != v.dim()) return -1;
  int axis = -1;
  int sign = 0;
  for (int i = 0; i < u.dim(); ++i) {
    const std::int64_t diff = std::int64_t{v[i]} - u[i];
    if (diff == 0) continue;
    if (axis >= 0 || (diff != 1 && diff != -1)) return -1;
    axis = i;
    sign = static_cast<int>(diff);
  }
  if (axis < 0) return -1;
  return 2 * axis + (sign > 0 ? 0 : 1);
}

bool adjacent(const Point& u, const Point& v) noexcept { return direction_to(u, v) >= 0; }

Edge::Edge(const Point& a, const Point& b) {
  if (!adjacent(a, b)) throw InvalidArgument("edge endpoints must be lattice neighbours");
  if (a < b) {
    lo_ = a;
    hi_ = b;
  } else {
    lo_ = b;
    hi_ = a;
  }
}

int Edge::axis() const noexcept { return direction_to(lo_, hi_) / 2; }

bool Box::contains(const Point& u) const noexcept {
  if (u.dim() != center.dim()) return false;
  for (int i = 0; i < u.dim(); ++i) {
    if (std::abs(std::int64_t{u[i]} - center[i]) > radius) return false;
  }
  return true;
}

bool Box::closure_contains(const Point& u) const noexcept {
  if (u.dim() != center.dim()) return false;
  int on_shell = 0;
  for (int i = 0; i < u.dim(); ++i) {
    const std::int64_t dist = std::abs(std::int64_t{u[i]} - center[i]);
    if (dist == radius + 1) {
      ++on_shell;
    } else if (dist > radius) {
      return false;
    }
  }
  return on_shell <= 1;
}

bool Box::contains_box(const Box& other) const noexcept {
  if (other.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (std::abs(std::int64_t{other.center[i]} - center[i]) + other.radius > radius) return false;
  }
  return true;
}

std::int64_t Box::volume() const noexcept {
  std::int64_t v = 1;
  for (int i = 0; i < dim(); ++i) v *= 2 * std::int64_t{radius} + 1;
  return v;
}

std::vector<Point> Box::vertices() const {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(volume()));
  Point p = center;
  for (int i = 0; i < dim(); ++i) p[i] = center[i] - radius;
  while (true) {
    out.push_back(p);
    int i = dim() - 1;
    while (i >= 0 && p[i] == center[i] + radius) {
      p[i] = center[i] - radius;
      --i;
    }
    if (i < 0) break;
    ++p[i];
  }
  return out;
}

std::vector<Edge> boundary_edges(const Box& box) {
  std::vector<Edge> out;
  for (const Point& u : box.vertices()) {
    for (int i = 0; i < 2 * u.dim(); ++i) {
      const Point v = neighbor(u, i);
      if (!box.contains(v)) out.emplace_back(u, v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Point> closure(const Box& box) {
  std::vector<Point> out = box.vertices();
  for (const Edge& e : boundary_edges(box)) {
    out.push_back(box.contains(e.lo()) ? e.hi() : e.lo());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PathSeq PathSeq::strict(std::vector<Point> vertices) {
  PathSeq p;
  p.vertices = std::move(vertices);
  p.kind = Kind::kStrict;
  return p;
}

PathSeq PathSeq::teleporter(std::vector<Point> vertices, Box box) {
  PathSeq p;
  p.vertices = std::move(vertices);
  p.kind = Kind::kTeleporter;
  p.box = std::move(box);
  return p;
}

bool PathSeq::is_valid() const {
  if (kind == Kind::kStrict) {
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
      if (!adjacent(vertices[i], vertices[i + 1])) return false;
    }
    return true;
  }
  std::size_t outside_run = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Point& v = vertices[i];
    if (!box.closure_contains(v)) return false;
    outside_run = box.contains(v) ? 0 : outside_run + 1;
    if (outside_run >= 3) return false;
    if (i + 1 < vertices.size()) {
      const Point& w = vertices[i + 1];
      const bool teleport = !box.contains(v) && !box.contains(w);
      if (!teleport && !adjacent(v, w)) return false;
    }
  }
  return true;
}

PathSeq restrict_to(const PathSeq& path, const Box& box) {
  if (path.kind == PathSeq::Kind::kTeleporter &&
      (!path.box.contains_box(box) || path.box == box)) {
    throw InvalidArgument("restriction of a teleporter requires a strictly larger source box");
  }
  const auto& g = path.vertices;
  const std::size_t n = g.size();
  auto inside_at = [&](std::size_t t) { return t < n && box.contains(g[t]); };
  // First t >= from with g(t) or g(t+1) inside.
  auto next_relevant = [&](std::size_t from) -> std::size_t {
    for (std::size_t t = from; t < n; ++t) {
      if (inside_at(t) || inside_at(t + 1)) return t;
    }
    return n;
  };

  std::vector<Point> out;
  if (n == 0) return PathSeq::teleporter(std::move(out), box);

  std::size_t t = 0;
  if (!inside_at(0)) {
    t = n;
    for (std::size_t s = 0; s + 1 < n; ++s) {
      if (inside_at(s + 1)) {
        t = s;
        break;
      }
    }
  }
  while (t < n) {
    out.push_back(g[t]);
    t = inside_at(t) ? t + 1 : next_relevant(t + 1);
  }
  return PathSeq::teleporter(std::move(out), box);
}

}  // namespace orrw
