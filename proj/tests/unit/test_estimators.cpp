#include <doctest.h>

#include <cmath>

#include "../oracle_support.hpp"
#include "orrw/error.hpp"
#include "orrw/estimators.hpp"
#include "orrw/oracles.hpp"

using namespace orrw;

namespace {

EscapeConfig escape(Point center, std::int64_t r, std::int64_t R, std::vector<Point> avoid) {
  EscapeConfig c;
  c.center = center;
  c.r = r;
  c.scale = R;
  c.avoid.insert(avoid.begin(), avoid.end());
  return c;
}

}  // namespace

TEST_CASE("escape indicator on crafted paths") {
  const auto cfg = escape(Point{0, 0}, 1, 5, {Point{1, 0}});
  std::vector<Point> bad{Point{0, 0}, Point{1, 0}};
  while (bad.size() < 51) bad.push_back(bad.back());
  CHECK_FALSE(escape_indicator(bad, cfg));

  // Leave to (4, 0), then rock between (4, 0) and (4, 1).
  const auto open = escape(Point{0, 0}, 1, 5, {});
  std::vector<Point> good{Point{0, 0}, Point{0, 1}, Point{1, 1}, Point{2, 1}, Point{3, 1}, Point{4, 1}};
  while (good.size() < 51) good.push_back(good.size() % 2 ? Point{4, 0} : Point{4, 1});
  CHECK(escape_indicator(good, open));
  CHECK(oracle::escape_path_ok({Point{0, 0}, 1, 5, {}}, good));
  good.pop_back();
  CHECK_THROWS_AS(escape_indicator(good, open), InvalidArgument);
}

TEST_CASE("escape indicator agrees with the reference rule") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  const auto cfg = escape(Point{0, 0}, 1, 3, {Point{0, 0}, Point{1, 1}, Point{-1, 0}});
  const oracle::EscapeRule rule{Point{0, 0}, 1, 3, {Point{0, 0}, Point{1, 1}, Point{-1, 0}}};
  int agree = 0, escapes = 0;
  for (std::uint64_t seed = 0; seed < 3000; ++seed) {
    const auto tr = simulate(params, Point{0, 0}, cfg.horizon(), UniformSource::time_stream(seed));
    const bool mine = escape_indicator(tr, cfg);
    agree += mine == oracle::escape_path_ok(rule, tr.path.vertices);
    escapes += mine;
    CHECK(run_escape(params, Point{0, 0}, cfg, seed) == mine);
  }
  CHECK(agree == 3000);
  CHECK(escapes > 0);
}

TEST_CASE("capacity of empty or far sets is zero") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  CHECK(estimate_capacity(escape(Point{0, 0}, 1, 2, {}), params, 100, 1, 1).total == 0.0);
  const auto far = estimate_capacity(escape(Point{0, 0}, 1, 2, {Point{7, 7}}), params, 100, 1, 1);
  CHECK(far.total == 0.0);
  CHECK(far.points.empty());
}

TEST_CASE("capacity estimate matches the exact value") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  const auto cfg = escape(Point{0, 0}, 1, 2, {Point{0, 0}, Point{1, 0}});
  const auto est = estimate_capacity(cfg, params, 20000, 3, 1);
  const double exact = exact_capacity(cfg, params);
  CHECK(est.points.size() == 2);
  CHECK(std::abs(est.total - exact) <= 3 * est.stderr_total);
}

TEST_CASE("nowhere heavy") {
  CHECK(nowhere_heavy({}, 16, 0.5, 3.5).holds);
  CHECK(nowhere_heavy({Point{1, 1}}, 16, 0.5, 3.5).holds);
  PointSet packed;
  for (const Point& p : Box{Point{3, 3}, 2}.vertices()) {
    if (packed.size() < 13) packed.insert(p);
  }
  const auto nh = nowhere_heavy(packed, 4, 0.5, 3.5);
  CHECK(nowhere_heavy(packed, 16, 0.5, 3.5).holds);
  CHECK_FALSE(nh.holds);
  REQUIRE(nh.witness.has_value());
  std::size_t in = 0;
  for (const Point& p : packed) in += nh.witness->contains(p);
  CHECK(static_cast<double>(in) >= std::pow(static_cast<double>(nh.witness->radius), 3.5));
}

TEST_CASE("capacity over volume") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  const auto single = capvol_ratio(escape(Point{0, 0}, 1, 2, {Point{0, 0}}), params, 5000, 2, 1);
  CHECK(single.inner_count == 1);
  CHECK(single.ratio == doctest::Approx(single.capacity.total * std::pow(1.0, 6 * params.nu)));
  CHECK(single.ratio > 0.0);
  PointSet full;
  for (const Point& p : Box{Point{0, 0}, 2}.vertices()) full.insert(p);
  auto cfg = escape(Point{0, 0}, 1, 4, {});
  cfg.avoid = full;
  CHECK_THROWS_AS(capvol_ratio(cfg, params, 10, 1, 1), GateFailure);
}

TEST_CASE("variance at small times") {
  for (double a : {0.0, 1.0}) {
    const auto params = ModelParams::with_defaults(3, a);
    std::vector<std::uint64_t> grid{1, 2};
    const auto curve = variance_curve(params, grid, 40000, 5, 1);
    CHECK(std::abs(curve.entries[0].v - 1.0 / 3) <= 3 * curve.entries[0].stderr_v);
    CHECK(std::abs(curve.entries[1].v - exact_moments(params, 2)) <= 3 * curve.entries[1].stderr_v);
  }
}

TEST_CASE("simple random walk variance is additive") {
  const auto e = additivity_defect(ModelParams::with_defaults(2, 0.0), 50, 50, 20000, 1, 1);
  CHECK(e.value <= 3 * e.stderr_value);
  const auto params = ModelParams::with_defaults(1, 1.0);
  const auto one = additivity_defect(params, 1, 1, 200000, 2, 1);
  CHECK(std::abs(one.value - std::abs(exact_moments(params, 2) - 2.0)) <= 3 * one.stderr_value);
}

TEST_CASE("displacement tails") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  CHECK(displacement_tail(params, 100, 1.1, 500, 1, 1).hits == 0);
  const auto all = displacement_tail(params, 100, 0.0, 500, 1, 1);
  CHECK(all.hits == 500);
  CHECK(all.p == 1.0);
}

TEST_CASE("site histogram respects speed and parity") {
  const auto hist = h1_histogram(ModelParams::with_defaults(2, 1.0), 5, 20000, 3, 1);
  std::uint64_t total = 0;
  for (const auto& s : hist.sites) {
    CHECK(norm_l1(s.v) <= 5);
    CHECK(norm_l1(s.v) % 2 == 1);
    total += s.count;
  }
  CHECK(total == 20000);
}

TEST_CASE("Gaussian fit of simple random walk") {
  const auto fit = gaussian_fit(ModelParams::with_defaults(2, 0.0), 10000, 10000, 1, 1);
  CHECK(fit.ks <= 0.02);
  CHECK(std::abs(fit.sigma_hat - 1 / std::sqrt(2.0)) <= 3 * fit.sigma_stderr);
  CHECK(fit.covariance.size() == 4);
}

TEST_CASE("one-dimensional range grows like sqrt(t)") {
  std::vector<double> as{0.0};
  std::vector<std::uint64_t> grid{100, 1000, 10000};
  const auto fits = phase_scan(ModelParams::with_defaults(1, 0.0), as, grid, 400, 1, 1);
  REQUIRE(fits.size() == 1);
  CHECK(std::abs(fits[0].range_fit.slope - 0.5) <= 0.05);
  CHECK(std::abs(fits[0].radius_fit.slope - 0.5) <= 0.05);
}

TEST_CASE("return probabilities") {
  std::vector<std::uint64_t> grid{0, 100};
  const auto r1 = return_probability(ModelParams::with_defaults(1, 0.0), grid, 10000, 500, 1, 1);
  CHECK(r1[0].p == 1.0);
  CHECK(r1[1].p > 0.85);
  const auto r3 = return_probability(ModelParams::with_defaults(3, 0.0), std::vector<std::uint64_t>{1, 10, 100}, 2000, 2000, 1, 1);
  CHECK(r3[0].p >= r3[1].p);
  CHECK(r3[1].p >= r3[2].p);
  // Ever-return for d = 3 is 1 - 1/g(0) ~ 0.34; returns after time 1 are a subset of those.
  CHECK(r3[0].wilson.lo < 0.35);
}

TEST_CASE("replica results do not depend on the thread count") {
  const auto params = ModelParams::with_defaults(2, 1.0);
  std::vector<std::uint64_t> grid{10, 100};
  const auto a = sample_walks(params, grid, 64, 9, 1, {true, true, true});
  const auto b = sample_walks(params, grid, 64, 9, 4, {true, true, true});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].at == b[i].at);
    CHECK(a[i].range == b[i].range);
    CHECK(a[i].last_zero == b[i].last_zero);
  }
}

TEST_CASE("escape from a walk's own history, virgin against continued") {
  EscapeConfig cfg;
  cfg.center = Point{0, 0};
  cfg.r = 1;
  cfg.scale = 3;
  const auto srw = simulate(ModelParams::with_defaults(2, 0.0), Point{0, 0}, 40, UniformSource::time_stream(4));
  const auto flat = ModelParams::with_defaults(2, 0.0);
  for (std::uint64_t t : {0ULL, 5ULL, 20ULL}) {
    // Without reinforcement the environment is irrelevant, so both sides share a law.
    const auto c = compare_escape(srw, t, cfg, flat, 20000, 9, 1);
    CHECK(c.z == srw.at(t));
    const double se = std::hypot(c.virgin.stderr_p, c.continued.stderr_p);
    CHECK(std::abs(c.virgin.p - c.continued.p) <= 4 * se + 1e-12);
  }
  const auto c0 = compare_escape(srw, 0, cfg, flat, 5000, 9, 1);
  const auto c0_again = compare_escape(srw, 0, cfg, flat, 5000, 9, 4);
  CHECK(c0.virgin.successes == c0_again.virgin.successes);
  CHECK(c0.continued.successes == c0_again.continued.successes);

  // Walking straight out along an axis: the past blocks the way home for both sides alike.
  std::vector<Point> line;
  for (int x = 0; x <= 12; ++x) line.push_back(Point{x, 0});
  const auto params = ModelParams::with_defaults(2, 1.0);
  const auto straight = make_trajectory(params, PathSeq::strict(line));
  const auto far = compare_escape(straight, 12, cfg, params, 200, 1, 1);
  CHECK(far.virgin.successes == 0);
  CHECK(far.continued.successes == 0);
  CHECK_FALSE(far.ratio.has_value());
  CHECK_THROWS_AS(compare_escape(straight, 13, cfg, params, 10, 1, 1), InvalidArgument);
}
