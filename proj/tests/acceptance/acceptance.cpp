// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when a criterion fails
// that is not listed in kKnownUnattainable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_support.hpp"
#include "orrw/demon.hpp"
#include "orrw/diagnostics.hpp"
#include "orrw/engine.hpp"
#include "orrw/estimators.hpp"
#include "orrw/experiment.hpp"
#include "orrw/oracles.hpp"
#include "orrw/random.hpp"
#include "orrw/stats.hpp"

using namespace orrw;

namespace {

// Criterion 13 asks for a range slope of 0.5 in d = 3. The range of a transient walk grows
// linearly, so this cannot hold; it is still evaluated and reported.
const std::set<int> kKnownUnattainable{13};

constexpr std::uint64_t kMaster = 20240611;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -----------------------------------------------------------------------------------------
Verdict exact_law() {
  constexpr double kAlpha = 0.01;
  constexpr double kMaxSeconds = 120.0;
  constexpr std::uint64_t kN = 1000000;
  Verdict v;
  double worst_p = 1.0, slowest = 0.0;
  for (double a : {0.0, 0.5, 1.0}) {
    const auto params = ModelParams::with_defaults(2, a);
    for (std::uint64_t t = 1; t <= 6; ++t) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto exact = enumerate_orrw(params, t, Point::origin(2));
      const auto hist = h1_histogram(params, t, kN, derive_replica_seed(kMaster, t * 10 + static_cast<std::uint64_t>(a * 2)), 0);
      std::map<Point, std::uint64_t> counts;
      for (const auto& s : hist.sites) counts[s.v] = s.count;
      std::vector<std::uint64_t> obs;
      std::vector<double> probs;
      std::uint64_t matched = 0;
      for (const auto& [pt, p] : exact.support) {
        const auto it = counts.find(pt);
        const std::uint64_t c = it == counts.end() ? 0 : it->second;
        obs.push_back(c);
        probs.push_back(p);
        matched += c;
      }
      if (matched < hist.n) {
        obs.push_back(hist.n - matched);
        probs.push_back(0.0);
      }
      const auto chi = stats::chi_squared(obs, probs);
      const double secs = seconds_since(t0);
      worst_p = std::min(worst_p, chi.p_value);
      slowest = std::max(slowest, secs);
      if (chi.p_value < kAlpha || secs > kMaxSeconds) {
        v.pass = false;
        v.detail += fmt("[a=%g t=%llu p=%.4g %.1fs] ", a, static_cast<unsigned long long>(t), chi.p_value, secs);
      }
    }
  }
  v.detail += fmt("18 cases, min p=%.4f, slowest case %.2fs", worst_p, slowest);
  return v;
}

// 2 -----------------------------------------------------------------------------------------
Verdict srw_reduction() {
  constexpr std::uint64_t kSeeds = 1000, kT = 10000;
  const auto params = ModelParams::with_defaults(2, 0.0);
  std::uint64_t mismatched = 0;
  for (std::uint64_t i = 0; i < kSeeds; ++i) {
    const std::uint64_t seed = derive_replica_seed(kMaster + 2, i);
    const auto tr = simulate(params, Point::origin(2), kT, UniformSource::time_stream(seed));
    if (tr.path.vertices != oracle::direct_srw(2, seed, kT)) ++mismatched;
  }
  return {mismatched == 0, fmt("%llu of %llu seeds differ", static_cast<unsigned long long>(mismatched),
                               static_cast<unsigned long long>(kSeeds))};
}

// 3 -----------------------------------------------------------------------------------------
Verdict demon_replay() {
  constexpr std::uint64_t kSeeds = 1000;
  const auto params = ModelParams::with_defaults(2, 1.0);
  const Box box{Point::origin(2), 3};
  std::uint64_t mismatched = 0, decisions = 0;
  for (std::uint64_t i = 0; i < kSeeds; ++i) {
    const auto r = restriction_demon_replay(derive_replica_seed(kMaster + 3, i), box, 200, params);
    if (r.restricted.path.vertices != r.demon_walk.path.vertices) ++mismatched;
    decisions += r.decisions.size();
  }
  return {mismatched == 0, fmt("%llu mismatches over %llu seeds (%llu demon decisions)",
                               static_cast<unsigned long long>(mismatched), static_cast<unsigned long long>(kSeeds),
                               static_cast<unsigned long long>(decisions))};
}

// 4 -----------------------------------------------------------------------------------------
Verdict concat_prefix() {
  std::uint64_t cases = 0, bad = 0;
  for (int d : {1, 2, 3}) {
    for (double a : {0.0, 1.0, 5.0}) {
      const auto params = ModelParams::with_defaults(d, a);
      for (std::uint64_t t1 : {1ULL, 10ULL, 200ULL}) {
        for (std::uint64_t i = 0; i < 100; ++i) {
          const auto [w, glued] = couple_concat(params, t1, 150, derive_replica_seed(kMaster + 4, cases));
          ++cases;
          const auto& x = w.path.vertices;
          const auto& y = glued.path.vertices;
          if (x.size() <= t1 || y.size() <= t1 || !std::equal(x.begin(), x.begin() + t1 + 1, y.begin())) ++bad;
        }
      }
    }
  }
  return {bad == 0, fmt("%llu prefix mismatches over %llu coupled pairs", static_cast<unsigned long long>(bad),
                        static_cast<unsigned long long>(cases))};
}

// 5 -----------------------------------------------------------------------------------------
Verdict escape_monotone() {
  constexpr std::uint64_t kPerChain = 100000;
  struct Chain {
    int d;
    double a;
    std::int64_t r, R;
    Point z;
    std::vector<std::vector<Point>> layers;  // cumulative
  };
  const std::vector<Chain> chains{
      {2, 1.0, 1, 3, Point{0, 0}, {{Point{0, 0}}, {Point{1, 0}, Point{-1, 0}}, {Point{0, 1}, Point{2, 2}, Point{-3, 1}}}},
      {2, 0.0, 1, 4, Point{1, 0}, {{Point{2, 0}}, {Point{0, 0}, Point{3, 3}}, {Point{-4, 0}, Point{1, -2}, Point{0, 4}}}},
      {3, 2.0, 1, 3, Point{0, 0, 0}, {{Point{0, 0, 1}}, {Point{1, 0, 0}, Point{0, -1, 0}}, {Point{2, 2, 2}, Point{-3, 0, 0}}}},
  };
  std::uint64_t violations = 0, checked = 0;
  std::string counts;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    std::vector<EscapeConfig> cfgs;
    PointSet acc;
    for (const auto& layer : ch.layers) {
      for (const auto& p : layer) acc.insert(p);
      EscapeConfig cfg;
      cfg.center = Point::origin(ch.d);
      cfg.r = ch.r;
      cfg.scale = ch.R;
      cfg.avoid = acc;
      cfgs.push_back(cfg);
    }
    const auto params = ModelParams::with_defaults(ch.d, ch.a);
    const std::uint64_t h = cfgs.front().horizon();
    std::vector<std::uint64_t> successes(cfgs.size(), 0);
    for (std::uint64_t i = 0; i < kPerChain; ++i) {
      const auto tr = simulate(params, ch.z, h, UniformSource::time_stream(derive_replica_seed(kMaster + 5 + c, i)));
      bool inner_escapes = true;
      for (std::size_t k = 0; k < cfgs.size(); ++k) {
        const bool esc = escape_indicator(tr, cfgs[k]);
        successes[k] += esc;
        if (esc && !inner_escapes) ++violations;
        inner_escapes = esc;
      }
      ++checked;
    }
    counts += fmt(" chain%zu escapes=", c + 1);
    for (std::size_t k = 0; k < successes.size(); ++k) {
      counts += fmt("%s%llu", k ? "/" : "", static_cast<unsigned long long>(successes[k]));
    }
  }
  return {violations == 0, fmt("%llu violations over %llu trajectories;", static_cast<unsigned long long>(violations),
                               static_cast<unsigned long long>(checked)) + counts};
}

// 6 -----------------------------------------------------------------------------------------
Verdict capacity_agreement() {
  constexpr int kReps = 100, kNeed = 97;
  constexpr std::uint64_t kN = 100000;
  const auto params = ModelParams::with_defaults(2, 1.0);
  EscapeConfig cfg;
  cfg.center = Point{0, 0};
  cfg.r = 1;
  cfg.scale = 2;
  cfg.avoid = {Point{0, 0}};
  const double exact = exact_capacity(cfg, params);
  int inside = 0;
  for (int k = 0; k < kReps; ++k) {
    const auto est = estimate_capacity(cfg, params, kN, derive_replica_seed(kMaster + 6, k), 0);
    if (std::abs(est.total - exact) <= 3.0 * est.stderr_total) ++inside;
  }
  return {inside >= kNeed, fmt("exact capacity %.6f, %d of %d repetitions within 3 stderr (need %d)", exact, inside,
                               kReps, kNeed)};
}

// 7-9 share the d = 6 samples ---------------------------------------------------------------
struct SixDim {
  std::vector<std::uint64_t> grid{1, 2, 100, 1000, 10000};
  std::vector<WalkSample> small_a, zero_a;
  double seconds_small_a = 0.0;
};

const SixDim& six_dim() {
  static const SixDim s = [] {
    SixDim out;
    const auto t0 = std::chrono::steady_clock::now();
    out.small_a = sample_walks(ModelParams::with_defaults(6, 0.1), out.grid, 10000, kMaster + 7, 0, {});
    out.seconds_small_a = seconds_since(t0);
    out.zero_a = sample_walks(ModelParams::with_defaults(6, 0.0), out.grid, 10000, kMaster + 8, 0, {});
    return out;
  }();
  return s;
}

Verdict variance_band() {
  const auto& s = six_dim();
  const auto curve = variance_from_samples(s.small_a, s.grid);
  Verdict v;
  for (const auto& e : curve.entries) {
    if (e.t < 100) continue;
    const double ratio = 6.0 * e.v / static_cast<double>(e.t);
    const double se = 6.0 * e.stderr_v / static_cast<double>(e.t);
    const bool ok = ratio - 3 * se >= 0.9 && ratio + 3 * se <= 1.1;
    v.pass = v.pass && ok;
    v.detail += fmt("t=%llu d*v/t=%.4f±%.4f%s; ", static_cast<unsigned long long>(e.t), ratio, se, ok ? "" : " OUT");
  }
  const auto& v1 = curve.entries[0];
  const bool ok1 = std::abs(v1.v - 1.0 / 6.0) <= 3 * v1.stderr_v;
  const double m2 = exact_moments(ModelParams::with_defaults(6, 0.1), 2);
  const auto& v2 = curve.entries[1];
  const bool ok2 = std::abs(v2.v - m2) <= 3 * v2.stderr_v;
  constexpr double kMaxSeconds = 600.0;
  const bool fast = s.seconds_small_a < kMaxSeconds;
  v.pass = v.pass && ok1 && ok2 && fast;
  v.detail += fmt("v1=%.5f±%.5f vs 1/6; v2=%.5f±%.5f vs exact %.5f; sampling %.1fs", v1.v, v1.stderr_v, v2.v,
                  v2.stderr_v, m2, s.seconds_small_a);
  return v;
}

Verdict sigma_band() {
  const auto& s = six_dim();
  const double lo = 0.9 / std::sqrt(6.0), hi = 1.1 / std::sqrt(6.0), srw = 1.0 / std::sqrt(6.0);
  const auto fa = gaussian_fit_from_samples(s.small_a, 10000, 4, 6);
  const auto f0 = gaussian_fit_from_samples(s.zero_a, 10000, 4, 6);
  const bool ok_a = fa.sigma_hat + 3 * fa.sigma_stderr >= lo && fa.sigma_hat - 3 * fa.sigma_stderr <= hi;
  const bool ok_0 = std::abs(f0.sigma_hat - srw) <= 3 * f0.sigma_stderr;
  return {ok_a && ok_0, fmt("a=0.1 sigma=%.5f±%.5f band [%.5f, %.5f]; a=0 sigma=%.5f±%.5f vs %.5f", fa.sigma_hat,
                            fa.sigma_stderr, lo, hi, f0.sigma_hat, f0.sigma_stderr, srw)};
}

Verdict clt_ks() {
  constexpr double kMaxKs = 0.03;
  const auto& s = six_dim();
  const auto fa = gaussian_fit_from_samples(s.small_a, 10000, 4, 6);
  const auto f0 = gaussian_fit_from_samples(s.zero_a, 10000, 4, 6);
  return {fa.ks <= kMaxKs && f0.ks <= kMaxKs, fmt("KS a=0 %.4f, a=0.1 %.4f (max %.2f)", f0.ks, fa.ks, kMaxKs)};
}

// 10 ----------------------------------------------------------------------------------------
Verdict exit_edge_shape() {
  constexpr double kBand = 3.0, kTol = 1e-10;
  std::vector<double> scaled;
  std::string detail;
  for (int L : {4, 8, 16}) {
    const auto r = exact_exit_through_edge(3, L, Edge(Point{L, 0, 0}, Point{L + 1, 0, 0}));
    scaled.push_back(r.probability * L * L);
    detail += fmt("L=%d p*L^2=%.5f; ", L, scaled.back());
  }
  const double spread = *std::max_element(scaled.begin(), scaled.end()) /
                        *std::min_element(scaled.begin(), scaled.end());
  double worst = 0.0;
  for (int L = 1; L <= 20; ++L) {
    const auto r = exact_exit_through_edge(1, L, Edge(Point{L}, Point{L + 1}));
    worst = std::max(worst, std::abs(r.probability - oracle::gamblers_ruin_exit(L)));
  }
  return {spread <= kBand && worst <= kTol,
          detail + fmt("spread %.3f (max %.1f); d=1 max error %.2e", spread, kBand, worst)};
}

// 11 ----------------------------------------------------------------------------------------
Verdict green_oracle() {
  constexpr double kSymTol = 1e-9;
  // g(0) converges like 1/radius, so doubling the radius halves the successive differences.
  constexpr double kRatio = 2.0, kRatioTol = 0.35;
  const std::vector<double> radii{8, 16, 32};
  std::vector<double> g0;
  double asym = 0.0;
  for (double rho : radii) {
    const auto g = srw_green(3, rho);
    g0.push_back(g.at(Point{0, 0, 0}));
    for (const Point& p : g.points) {
      const double base = g.at(p);
      std::array<int, 3> c{p[0], p[1], p[2]};
      std::sort(c.begin(), c.end());
      do {
        for (int flips = 0; flips < 8; ++flips) {
          const Point q{(flips & 1) ? -c[0] : c[0], (flips & 2) ? -c[1] : c[1], (flips & 4) ? -c[2] : c[2]};
          asym = std::max(asym, std::abs(g.at(q) - base));
        }
      } while (std::next_permutation(c.begin(), c.end()));
    }
  }
  const double d1 = g0[1] - g0[0], d2 = g0[2] - g0[1];
  const double ratio = d1 / d2;
  const bool ok = asym <= kSymTol && d1 > 0 && d2 > 0 && std::abs(ratio - kRatio) <= kRatioTol;
  return {ok, fmt("max asymmetry %.2e; g0 = %.6f, %.6f, %.6f at radius 8, 16, 32; difference ratio %.3f "
                  "(predicted %.1f ± %.2f)",
                  asym, g0[0], g0[1], g0[2], ratio, kRatio, kRatioTol)};
}

// 12 ----------------------------------------------------------------------------------------
Verdict diagnostics_exact() {
  Verdict v;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) {
      v.pass = false;
      v.detail += what + " FAILED; ";
    }
  };
  check(!is_heavy_count(11, 2, 3.5), "11 vertices at r=2 not heavy");
  check(is_heavy_count(12, 2, 3.5), "12 vertices at r=2 heavy");

  std::vector<Point> line;
  for (int x = -3; x <= 3; ++x) line.push_back(Point{x, 0});
  for (int x = 2; x >= -3; --x) line.push_back(Point{x, 0});
  const std::uint64_t n = line.size();
  const auto inside = make_trajectory(ModelParams::with_defaults(2, 1.0), PathSeq::strict(line));
  check(tau_spend(inside, Box{Point{0, 0}, 3}, n) == n - 1, "tau_spend of an always-inside path");
  check(!tau_spend(inside, Box{Point{0, 0}, 3}, n + 1).has_value(), "tau_spend beyond the path");

  // a^{-1/3} = 10 exceeds R = 5: every time is relaxed, however dense the path.
  std::vector<Point> dense;
  for (int y = -2; y <= 2; ++y) {
    for (int i = 0; i <= 4; ++i) dense.push_back(Point{y % 2 == 0 ? -2 + i : 2 - i, y});
  }
  const auto crowded = make_trajectory(ModelParams::with_defaults(2, 1e-3), PathSeq::strict(dense));
  const auto flags = relaxed_flags(crowded, 5);
  check(std::all_of(flags.begin(), flags.end(), [](bool b) { return b; }), "vacuous relaxation");
  const auto heavy_walk = make_trajectory(ModelParams::with_defaults(2, 1.0), PathSeq::strict(dense));
  const auto flags_heavy = relaxed_flags(heavy_walk, 5);
  check(!std::all_of(flags_heavy.begin(), flags_heavy.end(), [](bool b) { return b; }),
        "the same path at a=1 has unrelaxed times");
  if (v.pass) v.detail = "heaviness boundary 11/12, tau_spend = N-1, vacuous relaxation all exact";
  return v;
}

// 13 ----------------------------------------------------------------------------------------
Verdict phase_scan_sanity() {
  constexpr double kTarget = 0.5, kTol = 0.05;
  const std::vector<std::uint64_t> grid{100, 300, 1000, 3000, 10000, 30000, 100000};
  const std::vector<double> a_grid{0.0, 1000.0};
  const auto fits = phase_scan(ModelParams::with_defaults(3, 0.0), a_grid, grid, 1000, kMaster + 13, 0);
  const auto& f0 = fits[0];
  const bool ok_radius = std::abs(f0.radius_fit.slope - kTarget) <= kTol;
  const bool ok_range = std::abs(f0.range_fit.slope - kTarget) <= kTol;
  const auto& fb = fits[1];
  std::string detail = fmt("a=0 radius slope %.4f (%s), range slope %.4f (%s), target %.2f±%.2f; "
                           "exploratory a=1000 radius slope %.4f rms %.4f, range slope %.4f rms %.4f",
                           f0.radius_fit.slope, ok_radius ? "ok" : "out", f0.range_fit.slope,
                           ok_range ? "ok" : "out", kTarget, kTol, fb.radius_fit.slope, fb.radius_fit.rms_residual,
                           fb.range_fit.slope, fb.range_fit.rms_residual);
  if (!ok_range) {
    const std::vector<double> zero{0.0};
    const auto line = phase_scan(ModelParams::with_defaults(1, 0.0), zero, grid, 200, kMaster + 113, 0);
    detail += fmt("; the range of a transient walk grows linearly in t, so a 0.5 range slope is unattainable "
                  "in d=3 (the same estimator gives range slope %.4f for the recurrent d=1 walk)",
                  line[0].range_fit.slope);
  }
  return {ok_radius && ok_range, detail};
}

// 14 ----------------------------------------------------------------------------------------
std::string stripped_ndjson(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = nlohmann::json::parse(line);
    rec.erase("wall_time");
    out += rec.dump() + "\n";
  }
  return out;
}

Verdict reproducibility() {
  const std::vector<nlohmann::json> configs{
      {{"command", "variance"}, {"d", 3}, {"a", 0.5}, {"t", {1, 10, 100}}, {"n", 2000}, {"seed", 3}},
      {{"command", "capacity"}, {"preset", "tiny-exact"}, {"n", 20000}, {"seed", 4}},
      {{"command", "demon"}, {"a", 1.0}, {"strategy", "replay"}, {"n", 100}, {"seed", 5}},
      {{"command", "h1"}, {"d", 2}, {"a", 1.0}, {"T", 5}, {"n", 50000}, {"seed", 6}},
      {{"command", "phase-scan"}, {"d", 2}, {"a_grid", {0, 1}}, {"t", {10, 100, 1000}}, {"n", 200}, {"seed", 7}},
  };
  const auto root = std::filesystem::temp_directory_path() / "orrw_acceptance_repro";
  std::uint64_t differ = 0;
  std::string names;
  for (const auto& base : configs) {
    std::vector<std::string> streams;
    for (int threads : {1, 4, 16}) {
      auto cfg = base;
      cfg["threads"] = threads;
      const auto dir = root / (base.at("command").get<std::string>() + std::to_string(threads));
      std::filesystem::remove_all(dir);
      run_experiment(cfg, dir.string());
      streams.push_back(stripped_ndjson(dir / "results.ndjson"));
    }
    if (streams[0].empty() || streams[0] != streams[1] || streams[0] != streams[2]) {
      ++differ;
      names += " " + base.at("command").get<std::string>();
    }
  }
  std::filesystem::remove_all(root);
  return {differ == 0, fmt("%llu of %zu experiments differ across threads 1/4/16 (wall_time excluded)%s",
                           static_cast<unsigned long long>(differ), configs.size(), names.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"exact-law equivalence", exact_law},
      {"SRW reduction", srw_reduction},
      {"restriction-demon coupling", demon_replay},
      {"concatenation prefix", concat_prefix},
      {"escape monotonicity", escape_monotone},
      {"capacity oracle agreement", capacity_agreement},
      {"variance band", variance_band},
      {"sigma band", sigma_band},
      {"CLT diagnostic", clt_ks},
      {"exit-through-edge shape", exit_edge_shape},
      {"Green's function oracle", green_oracle},
      {"diagnostics exact suite", diagnostics_exact},
      {"phase-scan sanity", phase_scan_sanity},
      {"reproducibility", reproducibility},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const bool known = !v.pass && kKnownUnattainable.count(id);
    std::printf("%s %2d %-28s %s [%.1fs]%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(t0), known ? " (known unattainable)" : "");
    std::fflush(stdout);
    if (!v.pass && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
