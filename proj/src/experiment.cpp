#include "orrw/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>

#include "orrw/demon.hpp"
#include "orrw/diagnostics.hpp"
#include "orrw/engine.hpp"
#include "orrw/error.hpp"
#include "orrw/estimators.hpp"
#include "orrw/oracles.hpp"
#include "orrw/parallel.hpp"
#include "orrw/random.hpp"
#include "orrw/serialization.hpp"
#include "orrw/stats.hpp"

namespace orrw {

using nlohmann::json;

namespace {

// Hard ceiling on simulated steps per run (replicas times horizon).
constexpr double kStepCeiling = 2e11;

json common_defaults() {
  return {{"command", ""},   {"d", 2},          {"a", 0.0},        {"kappa", nullptr},
          {"nu", nullptr},   {"epsilon", nullptr}, {"delta", nullptr}, {"seed", 0},
          {"threads", 0},    {"out_dir", "orrw-out"}, {"assert", false}};
}

json command_defaults(const std::string& cmd) {
  if (cmd == "simulate") return {{"steps", 100}, {"source", "time"}};
  if (cmd == "variance") return {{"t", {1, 10, 100}}, {"n", 1000}, {"coordinate", 0}};
  if (cmd == "capacity") {
    return {{"preset", ""},   {"center", nullptr}, {"r", 1},          {"R", 2},
            {"avoid", json::array()}, {"n", 10000}, {"exact", false}, {"capvol", false}};
  }
  if (cmd == "relaxed") return {{"steps", 1000}, {"R", 10}, {"t", json::array()}};
  if (cmd == "heavy") return {{"steps", 1000}, {"R", 10}};
  if (cmd == "demon") {
    return {{"strategy", "uniform-random-edge"}, {"strategy_params", json::object()},
            {"R", 3}, {"r", 1}, {"box_radius", nullptr}, {"inside_steps", 200},
            {"steps", 200}, {"n", 1}, {"ratio_times", json::array()}, {"ratio_n", 1000}};
  }
  if (cmd == "concat") return {{"t1", 500}, {"t2", 500}, {"n", 1000}};
  if (cmd == "tails") return {{"T", 1000}, {"exponent", nullptr}, {"n", 1000}};
  if (cmd == "h1") return {{"T", 6}, {"n", 100000}};
  if (cmd == "clt") return {{"T", 1000}, {"n", 1000}, {"ks_max", 0.03}};
  if (cmd == "phase-scan") return {{"a_grid", {0.0}}, {"t", {100, 1000, 10000}}, {"n", 100}};
  if (cmd == "return") return {{"t", {0, 10, 100}}, {"horizon", 1000}, {"n", 1000}};
  if (cmd == "oracle") {
    return {{"oracle", "enumerate"}, {"T", 2},         {"radius", 10.0}, {"L", 4.0},
            {"edge", nullptr},       {"center", nullptr}, {"r", 1},      {"R", 2},
            {"avoid", json::array()}};
  }
  if (cmd == "selftest") return json::object();
  throw ConfigError("unknown command '" + cmd + "'");
}

json preset_values(const std::string& cmd, const std::string& preset) {
  if (preset.empty()) return json::object();
  if (cmd == "capacity" && preset == "tiny-exact") {
    return {{"d", 2},       {"a", 1.0},  {"r", 1},        {"R", 2},
            {"center", {0, 0}}, {"avoid", {{0, 0}}}, {"n", 100000}, {"exact", true}};
  }
  throw ConfigError("unknown preset '" + preset + "' for " + cmd);
}

void check_type(const std::string& key, const json& def, const json& v) {
  bool ok = true;
  if (def.is_number_integer()) {
    ok = v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0);
  } else if (def.is_number_float()) {
    ok = v.is_number();
  } else if (def.is_boolean()) {
    ok = v.is_boolean();
  } else if (def.is_string()) {
    ok = v.is_string();
  } else if (def.is_array()) {
    ok = v.is_array();
  } else if (def.is_object()) {
    ok = v.is_object();
  }
  if (!ok) throw ConfigError("field '" + key + "' has the wrong type");
}

Point point_from(const json& j, int d, const std::string& what) {
  Point p;
  try {
    p = j.get<Point>();
  } catch (const Error&) {
    throw ConfigError(what + " must be an array of integers");
  }
  if (p.dim() != d) throw ConfigError(what + " must have d coordinates");
  return p;
}

std::vector<std::uint64_t> time_grid(const json& cfg, bool positive) {
  std::vector<std::uint64_t> g;
  for (const auto& v : cfg.at("t")) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError("time grid entries must be nonnegative integers");
    }
    g.push_back(v.get<std::uint64_t>());
  }
  if (!std::is_sorted(g.begin(), g.end())) throw ConfigError("time grid must be sorted");
  if (positive && !g.empty() && g.front() == 0) throw ConfigError("time grid must be positive");
  return g;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double x) { return json(x).dump(); }
std::string num(std::uint64_t x) { return std::to_string(x); }

std::string point_str(const Point& p) {
  std::string s;
  for (int i = 0; i < p.dim(); ++i) s += (i ? " " : "") + std::to_string(p[i]);
  return s;
}

json optional_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

class Run {
 public:
  Run(json cfg, std::string hash)
      : cfg_(std::move(cfg)),
        hash_(std::move(hash)),
        seed_(cfg_.at("seed").get<std::uint64_t>()),
        threads_(resolve_threads(cfg_.at("threads").get<unsigned>())),
        gate_(cfg_.at("assert").get<bool>()) {
    params_ = ModelParams::with_defaults(cfg_.at("d").get<int>(), cfg_.at("a").get<double>());
    params_.kappa = cfg_.at("kappa").get<double>();
    params_.nu = cfg_.at("nu").get<double>();
    params_.epsilon = cfg_.at("epsilon").get<double>();
    params_.delta = cfg_.at("delta").get<double>();
  }

  void dispatch() {
    const std::string cmd = cfg_.at("command");
    static const std::map<std::string, void (Run::*)()> table = {
        {"simulate", &Run::simulate_cmd}, {"variance", &Run::variance_cmd},
        {"capacity", &Run::capacity_cmd}, {"relaxed", &Run::relaxed_cmd},
        {"heavy", &Run::heavy_cmd},       {"demon", &Run::demon_cmd},
        {"concat", &Run::concat_cmd},     {"tails", &Run::tails_cmd},
        {"h1", &Run::h1_cmd},             {"clt", &Run::clt_cmd},
        {"phase-scan", &Run::phase_cmd},  {"return", &Run::return_cmd},
        {"oracle", &Run::oracle_cmd},     {"selftest", &Run::selftest_cmd}};
    (this->*table.at(cmd))();
  }

  const std::vector<json>& records() const { return records_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::map<std::string, std::string>& files() const { return files_; }
  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < csv_header_.size(); ++i) out += (i ? "," : "") + csv_header_[i];
    out += "\n";
    for (const auto& row : csv_rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
      out += "\n";
    }
    return out;
  }

 private:
  using Clock = std::chrono::steady_clock;

  std::uint64_t u64(const char* key) const { return cfg_.at(key).get<std::uint64_t>(); }
  double dbl(const char* key) const { return cfg_.at(key).get<double>(); }

  void guard_steps(double replicas, double horizon) const {
    if (replicas * std::max(horizon, 1.0) > kStepCeiling) {
      throw BudgetExceeded("run exceeds the step ceiling of 2e11 simulated steps");
    }
  }

  void record(const std::string& op, json value, json witness, std::uint64_t n,
              Clock::time_point start) {
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    records_.push_back({{"op", op},
                        {"params", params_},
                        {"value", std::move(value)},
                        {"witness", std::move(witness)},
                        {"config_hash", hash_},
                        {"master_seed", seed_},
                        {"n", n},
                        {"wall_time", wall}});
  }

  void header(std::vector<std::string> h) { csv_header_ = std::move(h); }
  void row(std::vector<std::string> r) { csv_rows_.push_back(std::move(r)); }
  void fail(const std::string& why) { failures_.push_back(why); }

  json band() const {
    const double s = std::sqrt(static_cast<double>(params_.d));
    return json::array({0.9 / s, 1.1 / s});
  }

  EscapeConfig escape_config() const {
    EscapeConfig ec;
    ec.center = cfg_.at("center").is_null() ? Point::origin(params_.d)
                                            : point_from(cfg_.at("center"), params_.d, "center");
    ec.r = static_cast<std::int64_t>(u64("r"));
    ec.scale = static_cast<std::int64_t>(u64("R"));
    for (const auto& p : cfg_.at("avoid")) ec.avoid.insert(point_from(p, params_.d, "avoid point"));
    ec.validate(params_.d);
    return ec;
  }

  void simulate_cmd() {
    const auto start = Clock::now();
    const std::uint64_t steps = u64("steps");
    guard_steps(1, static_cast<double>(steps));
    const auto src = cfg_.at("source") == "envelopes" ? UniformSource::envelopes(seed_)
                                                      : UniformSource::time_stream(seed_);
    const Trajectory traj = simulate(params_, Point::origin(params_.d), steps, src);
    const auto bytes = encode_trajectory(traj);
    files_["trajectory.bin"] = std::string(bytes.begin(), bytes.end());
    if (steps <= 10000) files_["trajectory.json"] = trajectory_to_json(traj).dump() + "\n";
    const auto rr = range_and_radius(traj, traj.length());
    std::uint32_t max_visits = 0;
    for (const auto& [v, c] : traj.visits) max_visits = std::max(max_visits, c);
    record("simulate",
           {{"length", traj.length()},
            {"end", traj.end()},
            {"range", rr.range},
            {"max_displacement", rr.max_displacement},
            {"reinforced_edges", traj.env.size()},
            {"max_vertex_visits", max_visits},
            {"trajectory_sha256", sha256_hex(files_["trajectory.bin"])}},
           nullptr, 1, start);
    header({"length", "range", "max_displacement", "reinforced_edges"});
    row({num(traj.length()), num(rr.range), num(rr.max_displacement), num(traj.env.size())});
  }

  void variance_cmd() {
    const auto start = Clock::now();
    const auto grid = time_grid(cfg_, false);
    if (grid.empty()) throw ConfigError("variance needs a nonempty time grid");
    const std::uint64_t n = u64("n");
    if (n < 2) throw ConfigError("variance needs n >= 2");
    const int coord = static_cast<int>(u64("coordinate"));
    if (coord >= params_.d) throw ConfigError("coordinate out of range");
    guard_steps(static_cast<double>(n), static_cast<double>(grid.back()));
    const auto curve = variance_curve(params_, grid, n, seed_, threads_, coord);
    const double d = params_.d;
    header({"t", "v_hat", "stderr", "n", "d_v_over_t", "d_v_over_t_stderr", "exact"});
    for (const auto& e : curve.entries) {
      json value{{"t", e.t}, {"v_hat", e.v}, {"stderr", e.stderr_v}};
      json exact = nullptr;
      if (static_cast<double>(e.t) * std::log(2.0 * d) <= std::log(1e6)) {
        exact = exact_moments(params_, e.t, coord);
      }
      value["exact"] = exact;
      std::string ratio_s, ratio_se_s;
      if (e.t > 0) {
        const double ratio = d * e.v / static_cast<double>(e.t);
        const double ratio_se = d * e.stderr_v / static_cast<double>(e.t);
        value["d_v_over_t"] = ratio;
        value["d_v_over_t_stderr"] = ratio_se;
        ratio_s = num(ratio);
        ratio_se_s = num(ratio_se);
        if (gate_ && (ratio - 3 * ratio_se < 0.9 || ratio + 3 * ratio_se > 1.1)) {
          fail("d v_t / t outside [0.9, 1.1] with 3 stderr margin at t = " + std::to_string(e.t));
        }
      }
      record("variance", value, nullptr, e.n, start);
      row({num(e.t), num(e.v), num(e.stderr_v), num(e.n), ratio_s, ratio_se_s,
           exact.is_null() ? "" : num(exact.get<double>())});
    }
    const auto b = band();
    record("sigma",
           {{"T", curve.entries.back().t},
            {"sigma_hat", curve.sigma_hat},
            {"stderr", curve.sigma_stderr},
            {"band", b}},
           nullptr, n, start);
    if (gate_ && (curve.sigma_hat + 3 * curve.sigma_stderr < b[0].get<double>() ||
                  curve.sigma_hat - 3 * curve.sigma_stderr > b[1].get<double>())) {
      fail("sigma_hat outside the band beyond 3 stderr");
    }
  }

  void capacity_cmd() {
    const auto start = Clock::now();
    const EscapeConfig ec = escape_config();
    const std::uint64_t n = u64("n");
    if (n < 1) throw ConfigError("capacity needs n >= 1");
    guard_steps(static_cast<double>(n) * static_cast<double>(std::max<std::size_t>(ec.avoid.size(), 1)),
                static_cast<double>(ec.horizon()));
    const bool want_exact = cfg_.at("exact").get<bool>();
    CapacityEstimate est;
    if (cfg_.at("capvol").get<bool>()) {
      try {
        const auto cv = capvol_ratio(ec, params_, n, seed_, threads_);
        est = cv.capacity;
        record("capvol",
               {{"ratio", cv.ratio}, {"denominator", cv.denominator}, {"inner_count", cv.inner_count}},
               nullptr, n, start);
      } catch (const GateFailure& e) {
        const auto nh = nowhere_heavy(ec.avoid, ec.scale, params_.delta, params_.kappa);
        record("capvol", {{"refused", e.what()}}, nh.witness ? json(*nh.witness) : json(nullptr), n,
               start);
        fail(e.what());
        return;
      }
    } else {
      est = estimate_capacity(ec, params_, n, seed_, threads_);
    }
    header({"z", "p_hat", "stderr", "n", "exact"});
    double exact_total = 0.0;
    for (const auto& pe : est.points) {
      json value{{"z", pe.z}, {"p_hat", pe.p}, {"stderr", pe.stderr_p}, {"successes", pe.successes}};
      std::string exact_s;
      if (want_exact) {
        const double ex = exact_escape(pe.z, ec, params_);
        exact_total += ex;
        value["exact"] = ex;
        exact_s = num(ex);
      }
      record("escape", value, nullptr, pe.n, start);
      row({point_str(pe.z), num(pe.p), num(pe.stderr_p), num(pe.n), exact_s});
    }
    json value{{"total", est.total}, {"stderr", est.stderr_total}, {"points", est.points.size()}};
    if (want_exact) {
      const double diff = std::abs(est.total - exact_total);
      const bool ok = est.stderr_total > 0 ? diff <= 3 * est.stderr_total : diff <= 1e-12;
      value["exact"] = exact_total;
      value["within_3_stderr"] = ok;
      if (!ok) fail("capacity estimate farther than 3 stderr from the exact value");
    }
    record("capacity", value, nullptr, n, start);
  }

  void relaxed_cmd() {
    const auto start = Clock::now();
    const std::uint64_t steps = u64("steps");
    const auto scale = static_cast<std::int64_t>(u64("R"));
    guard_steps(1, static_cast<double>(steps));
    const Trajectory traj = simulate(params_, Point::origin(params_.d), steps,
                                     UniformSource::time_stream(seed_));
    auto grid = time_grid(cfg_, false);
    if (!grid.empty() && grid.back() > steps) throw ConfigError("query time beyond the walk");
    std::vector<bool> flags;
    if (grid.empty()) {
      flags = relaxed_flags(traj, scale);
      for (std::uint64_t t = 0; t < flags.size(); ++t) grid.push_back(t);
    } else {
      const auto set = relaxed_times(traj, scale, grid);
      for (std::uint64_t t : grid) flags.push_back(std::binary_search(set.times.begin(), set.times.end(), t));
    }
    std::uint64_t relaxed = 0;
    json first_bad = nullptr;
    header({"t", "relaxed"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (flags[i]) {
        ++relaxed;
      } else if (first_bad.is_null()) {
        first_bad = grid[i];
      }
      if (grid.size() <= 100000) row({num(grid[i]), flags[i] ? "1" : "0"});
    }
    const double lower = params_.a > 0 ? std::pow(params_.a, -1.0 / 3.0) : INFINITY;
    record("relaxed",
           {{"steps", steps},
            {"R", scale},
            {"lower_scale", std::isfinite(lower) ? json(lower) : json("inf")},
            {"queried", grid.size()},
            {"relaxed", relaxed},
            {"fraction", grid.empty() ? 0.0 : static_cast<double>(relaxed) / static_cast<double>(grid.size())},
            {"h2_event_holds", h2_event_holds(traj, scale, params_.epsilon)},
            {"h2_first_violation", optional_json(h2_first_violation(traj, scale, params_.epsilon))}},
           {{"first_unrelaxed_time", first_bad}}, 1, start);
  }

  void heavy_cmd() {
    const auto start = Clock::now();
    const std::uint64_t steps = u64("steps");
    const auto scale = static_cast<std::int64_t>(u64("R"));
    guard_steps(1, static_cast<double>(steps));
    const Trajectory traj = simulate(params_, Point::origin(params_.d), steps,
                                     UniformSource::time_stream(seed_));
    const auto rep = tau_heavy(traj, scale, params_.delta, params_.kappa);
    const Box inner{Point::origin(params_.d), static_cast<std::int32_t>(scale)};
    const std::uint64_t threshold = default_spend_threshold(scale);
    const auto spend = tau_spend(traj, inner, threshold);
    const Box region{Point::origin(params_.d), static_cast<std::int32_t>(2 * scale)};
    const auto visits = max_vertex_visits(traj, traj.length(), region);
    record("heavy",
           {{"steps", steps},
            {"R", scale},
            {"tau_heavy", optional_json(rep.tau_heavy)},
            {"tau_spend", optional_json(spend)},
            {"spend_threshold", threshold},
            {"max_vertex_visits", visits}},
           rep.witness ? json(*rep.witness) : json(nullptr), 1, start);
    header({"tau_heavy", "tau_spend", "spend_threshold", "max_vertex_visits"});
    row({rep.tau_heavy ? num(*rep.tau_heavy) : "inf", spend ? num(*spend) : "inf", num(threshold),
         num(visits)});
  }

  void demon_cmd() {
    const auto start = Clock::now();
    const std::string name = cfg_.at("strategy");
    const std::uint64_t n = u64("n");
    const auto scale = static_cast<std::int64_t>(u64("R"));
    if (name == "replay") {
      const auto radius = cfg_.at("box_radius").is_null() ? 3 : cfg_.at("box_radius").get<std::int32_t>();
      const std::uint64_t steps = u64("steps");
      guard_steps(static_cast<double>(n), 2.0 * static_cast<double>(steps));
      const Box box{Point::origin(params_.d), radius};
      struct Rep {
        bool equal = false;
        bool empty = false;
        std::uint64_t length = 0;
        std::uint64_t fictitious = 0;
      };
      const auto reps = run_replicas<Rep>(n, threads_, [&](std::uint64_t i) {
        const auto res = restriction_demon_replay(derive_replica_seed(seed_, i), box, steps, params_);
        return Rep{res.restricted.path.vertices == res.demon_walk.path.vertices,
                   res.restricted.empty(), res.restricted.length(), res.fictitious};
      });
      std::uint64_t mismatches = 0, empty = 0, fict = 0;
      json first_mismatch = nullptr;
      stats::Moments len;
      header({"replica", "equal", "length", "fictitious"});
      for (std::uint64_t i = 0; i < n; ++i) {
        if (!reps[i].equal) {
          ++mismatches;
          if (first_mismatch.is_null()) first_mismatch = i;
        }
        empty += reps[i].empty;
        fict += reps[i].fictitious;
        len.add(static_cast<double>(reps[i].length));
        row({num(i), reps[i].equal ? "1" : "0", num(reps[i].length), num(reps[i].fictitious)});
      }
      record("replay",
             {{"box_radius", radius}, {"steps", steps}, {"mismatches", mismatches}, {"empty", empty},
              {"fictitious_decisions", fict}, {"mean_length", len.mean()}},
             {{"first_mismatch_replica", first_mismatch}}, n, start);
      if (mismatches) fail("restriction and demon walk differ on " + std::to_string(mismatches) + " seeds");
      return;
    }

    const std::int32_t radius = cfg_.at("box_radius").is_null()
                                    ? static_cast<std::int32_t>(4 * scale)
                                    : cfg_.at("box_radius").get<std::int32_t>();
    const Box box{Point::origin(params_.d), radius};
    const auto block_r = static_cast<std::int64_t>(u64("r"));
    const std::uint64_t inside = u64("inside_steps");
    guard_steps(static_cast<double>(n), static_cast<double>(inside));
    json sp = cfg_.at("strategy_params");
    make_strategy(name, sp, box);  // fail early on bad parameters
    struct Rep {
      DemonRun run;
      BlockClassification blocks;
      bool h2 = true;
      std::uint64_t max_visits = 0;
    };
    const Box region{Point::origin(params_.d), static_cast<std::int32_t>(2 * scale)};
    const auto reps = run_replicas<Rep>(n, threads_, [&](std::uint64_t i) {
      const std::uint64_t rs = derive_replica_seed(seed_, i);
      json p = sp;
      if (name == "uniform-random-edge" && !p.contains("seed")) p["seed"] = mix64(rs ^ 0x5eedULL);
      auto strategy = make_strategy(name, p, box);
      Rep rep;
      rep.run = run_demon_walk(*strategy, box, params_, stop_after_inside_steps(inside),
                               UniformSource::time_stream(rs));
      rep.blocks = classify_blocks(rep.run.walk, scale, block_r, params_.epsilon);
      rep.h2 = h2_event_holds(rep.run.walk, scale, params_.epsilon);
      rep.max_visits = max_vertex_visits(rep.run.walk, rep.run.walk.length(), region);
      return rep;
    });
    const double visit_bound = std::pow(static_cast<double>(block_r), 2.0 * params_.d);
    header({"replica", "length", "decisions", "bad_blocks", "blocks_in_A", "h2", "max_vertex_visits"});
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto& rep = reps[i];
      std::uint64_t bad = 0, in_a = 0;
      for (const auto& b : rep.blocks.visited) {
        bad += b.bad;
        in_a += b.in_a;
      }
      record("demon",
             {{"replica", i},
              {"strategy", name},
              {"box_radius", radius},
              {"length", rep.run.walk.length()},
              {"decisions", rep.run.decisions.size()},
              {"total_blocks", rep.blocks.total_blocks},
              {"bad_blocks", bad},
              {"blocks_in_A", in_a},
              {"h2_event_holds", rep.h2},
              {"max_vertex_visits", rep.max_visits},
              {"visit_bound", visit_bound}},
             nullptr, 1, start);
      row({num(i), num(rep.run.walk.length()), num(rep.run.decisions.size()), num(bad), num(in_a),
           rep.h2 ? "1" : "0", num(rep.max_visits)});
    }
    const auto ratio_times = cfg_.at("ratio_times").get<std::vector<std::uint64_t>>();
    if (!ratio_times.empty()) {
      const std::uint64_t ratio_n = u64("ratio_n");
      EscapeConfig esc;
      esc.center = Point::origin(params_.d);
      esc.r = block_r;
      esc.scale = scale;
      guard_steps(static_cast<double>(n * ratio_times.size() * 2 * ratio_n), static_cast<double>(esc.horizon()));
      std::string csv = "replica,t,in_outer,virgin_p,virgin_stderr,continued_p,continued_stderr,ratio\n";
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto& walk = reps[i].run.walk;
        for (const std::uint64_t t : ratio_times) {
          if (t > walk.length()) continue;
          const auto cmp = compare_escape(walk, t, esc, params_, ratio_n,
                                          derive_replica_seed(derive_replica_seed(seed_, i), t), threads_);
          record("escape_comparison",
                 {{"replica", i},
                  {"t", t},
                  {"z", cmp.z},
                  {"in_outer", cmp.in_outer},
                  {"virgin_p", cmp.virgin.p},
                  {"virgin_stderr", cmp.virgin.stderr_p},
                  {"continued_p", cmp.continued.p},
                  {"continued_stderr", cmp.continued.stderr_p},
                  {"ratio", cmp.ratio ? json(*cmp.ratio) : json(nullptr)}},
                 nullptr, ratio_n, start);
          for (const auto& cell : {num(i), num(t), std::string(cmp.in_outer ? "1" : "0"), num(cmp.virgin.p),
                                   num(cmp.virgin.stderr_p), num(cmp.continued.p), num(cmp.continued.stderr_p),
                                   cmp.ratio ? num(*cmp.ratio) : std::string("nan")}) {
            csv += cell + ",";
          }
          csv.back() = '\n';
        }
      }
      files_["escape_comparison.csv"] = csv;
    }
    if (n == 1) {
      files_["demon_trajectory.json"] = trajectory_to_json(reps[0].run.walk).dump() + "\n";
      std::string log;
      for (const auto& rec : decision_log_to_json(reps[0].run.decisions)) log += rec.dump() + "\n";
      files_["decisions.ndjson"] = log;
    }
  }

  void concat_cmd() {
    const auto start = Clock::now();
    const std::uint64_t t1 = u64("t1"), t2 = u64("t2"), n = u64("n");
    guard_steps(static_cast<double>(n), 2.0 * static_cast<double>(t1 + t2));
    struct Rep {
      bool prefix = false;
      std::int64_t sep2 = 0;
    };
    const auto reps = run_replicas<Rep>(n, threads_, [&](std::uint64_t i) {
      const auto [w, wt] = couple_concat(params_, t1, t2, derive_replica_seed(seed_, i));
      const bool prefix = std::equal(w.path.vertices.begin(), w.path.vertices.begin() + static_cast<std::ptrdiff_t>(t1 + 1),
                                     wt.path.vertices.begin());
      std::int64_t best = 0;
      for (std::size_t s = 0; s < w.path.vertices.size(); ++s) {
        best = std::max(best, norm_l2_squared(w.path.vertices[s] - wt.path.vertices[s]));
      }
      return Rep{prefix, best};
    });
    std::map<std::int64_t, std::uint64_t> hist;
    std::uint64_t mismatches = 0;
    std::vector<double> seps;
    for (const auto& r : reps) {
      mismatches += !r.prefix;
      ++hist[r.sep2];
      seps.push_back(std::sqrt(static_cast<double>(r.sep2)));
    }
    std::sort(seps.begin(), seps.end());
    const double median = seps.empty() ? 0.0
                          : seps.size() % 2 ? seps[seps.size() / 2]
                                            : 0.5 * (seps[seps.size() / 2 - 1] + seps[seps.size() / 2]);
    json h = json::array();
    header({"max_separation", "count"});
    for (const auto& [s2, c] : hist) {
      const double s = std::sqrt(static_cast<double>(s2));
      h.push_back({s, c});
      row({num(s), num(c)});
    }
    record("concat",
           {{"t1", t1}, {"t2", t2}, {"prefix_mismatches", mismatches}, {"median_separation", median},
            {"histogram", h}},
           nullptr, n, start);
    if (mismatches) fail("concatenation prefix differs on " + std::to_string(mismatches) + " seeds");
  }

  void tails_cmd() {
    const auto start = Clock::now();
    const std::uint64_t t = u64("T"), n = u64("n");
    const double exponent = cfg_.at("exponent").is_null() ? 0.5 + 3 * params_.epsilon : dbl("exponent");
    guard_steps(2.0 * static_cast<double>(n), static_cast<double>(t));
    const auto est = displacement_tail(params_, t, exponent, n, seed_, threads_);
    ModelParams srw = params_;
    srw.a = 0.0;
    const auto base = displacement_tail(srw, t, exponent, n, seed_, threads_);
    record("tail",
           {{"t", t}, {"exponent", exponent}, {"threshold", est.threshold}, {"hits", est.hits},
            {"p", est.p}, {"wilson", {est.wilson.lo, est.wilson.hi}}, {"srw_p", base.p},
            {"srw_wilson", {base.wilson.lo, base.wilson.hi}}},
           nullptr, n, start);
    header({"t", "exponent", "threshold", "p", "wilson_lo", "wilson_hi", "srw_p"});
    row({num(t), num(exponent), num(est.threshold), num(est.p), num(est.wilson.lo), num(est.wilson.hi),
         num(base.p)});
  }

  void h1_cmd() {
    const auto start = Clock::now();
    const std::uint64_t t = u64("T"), n = u64("n");
    guard_steps(static_cast<double>(n), static_cast<double>(t));
    const auto hist = h1_histogram(params_, t, n, seed_, threads_);
    const bool exact = static_cast<double>(t) * std::log(2.0 * params_.d) <= std::log(1e7);
    ExactDistribution dist;
    if (exact) dist = enumerate_orrw(params_, t, Point::origin(params_.d));
    header({"v", "count", "p_hat", "bound", "violation", "exact"});
    for (const auto& s : hist.sites) {
      row({point_str(s.v), num(s.count), num(s.p), num(s.bound), s.violation ? "1" : "0",
           exact ? num(dist.at(s.v)) : ""});
    }
    json value{{"t", t}, {"sites", hist.sites.size()}, {"violations", hist.violations}};
    if (exact) {
      std::vector<std::uint64_t> obs;
      std::vector<double> probs;
      std::map<Point, std::uint64_t> counts;
      for (const auto& s : hist.sites) counts[s.v] = s.count;
      std::uint64_t matched = 0;
      for (const auto& [v, p] : dist.support) {
        const auto it = counts.find(v);
        obs.push_back(it == counts.end() ? 0 : it->second);
        matched += obs.back();
        probs.push_back(p);
      }
      // Samples off the exact support land in one extra zero-probability cell.
      obs.push_back(n - matched);
      probs.push_back(0.0);
      const auto chi = stats::chi_squared(obs, probs);
      value["chi_squared"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}};
    }
    json worst = nullptr;
    for (const auto& s : hist.sites) {
      if (s.violation) {
        worst = {{"v", s.v}, {"p_hat", s.p}, {"bound", s.bound}};
        break;
      }
    }
    record("h1", value, worst, n, start);
    if (gate_ && hist.violations) fail("site frequencies exceed the heat-kernel bound");
  }

  void clt_cmd() {
    const auto start = Clock::now();
    const std::uint64_t t = u64("T"), n = u64("n");
    if (n < 2) throw ConfigError("clt needs n >= 2");
    guard_steps(static_cast<double>(n), static_cast<double>(t));
    const auto fit = gaussian_fit(params_, t, n, seed_, threads_);
    const auto b = band();
    record("clt",
           {{"t", t}, {"ks", fit.ks}, {"sigma_hat", fit.sigma_hat}, {"sigma_stderr", fit.sigma_stderr},
            {"band", b}, {"covariance", fit.covariance}},
           nullptr, n, start);
    header({"t", "ks", "sigma_hat", "sigma_stderr"});
    row({num(t), num(fit.ks), num(fit.sigma_hat), num(fit.sigma_stderr)});
    if (gate_) {
      if (fit.ks > dbl("ks_max")) fail("KS distance above ks_max");
      if (fit.sigma_hat + 3 * fit.sigma_stderr < b[0].get<double>() ||
          fit.sigma_hat - 3 * fit.sigma_stderr > b[1].get<double>()) {
        fail("sigma_hat outside the band beyond 3 stderr");
      }
    }
  }

  void phase_cmd() {
    const auto start = Clock::now();
    const auto grid = time_grid(cfg_, true);
    const std::uint64_t n = u64("n");
    std::vector<double> as;
    for (const auto& a : cfg_.at("a_grid")) {
      if (!a.is_number() || a.get<double>() < 0) throw ConfigError("a_grid entries must be >= 0");
      as.push_back(a.get<double>());
    }
    if (grid.size() < 2) throw ConfigError("phase scan needs at least two times");
    guard_steps(static_cast<double>(n * as.size()), static_cast<double>(grid.back()));
    const auto fits = phase_scan(params_, as, grid, n, seed_, threads_);
    header({"a", "t", "mean_range", "mean_radius"});
    for (const auto& f : fits) {
      for (std::size_t j = 0; j < f.t.size(); ++j) {
        row({num(f.a), num(f.t[j]), num(f.mean_range[j]), num(f.mean_radius[j])});
      }
      record("phase",
             {{"a", f.a}, {"t", f.t}, {"mean_range", f.mean_range}, {"mean_radius", f.mean_radius},
              {"range_slope", f.range_fit.slope}, {"range_slope_stderr", f.range_fit.slope_stderr},
              {"range_rms_residual", f.range_fit.rms_residual}, {"radius_slope", f.radius_fit.slope},
              {"radius_slope_stderr", f.radius_fit.slope_stderr},
              {"radius_rms_residual", f.radius_fit.rms_residual},
              {"heuristic_radius_slope", 1.0 / (params_.d + 1)}},
             nullptr, n, start);
    }
  }

  void return_cmd() {
    const auto start = Clock::now();
    const auto grid = time_grid(cfg_, false);
    const std::uint64_t horizon = u64("horizon"), n = u64("n");
    guard_steps(static_cast<double>(n), static_cast<double>(horizon));
    const auto est = return_probability(params_, grid, horizon, n, seed_, threads_);
    header({"t", "p", "wilson_lo", "wilson_hi"});
    for (const auto& e : est) {
      record("return",
             {{"t", e.t}, {"horizon", horizon}, {"p", e.p}, {"hits", e.hits},
              {"wilson", {e.wilson.lo, e.wilson.hi}}},
             nullptr, n, start);
      row({num(e.t), num(e.p), num(e.wilson.lo), num(e.wilson.hi)});
    }
    if (params_.d >= 3) {
      // Largest truncation the solver accepts, capped at 30.
      for (int radius = 30; radius >= 2; --radius) {
        try {
          const auto g = srw_green(params_.d, radius);
          const double g0 = g.at(Point::origin(params_.d));
          record("return_srw_green",
                 {{"radius", radius}, {"g0", g0}, {"ever_return", 1.0 - 1.0 / g0}, {"residual", g.residual}},
                 nullptr, 0, start);
          break;
        } catch (const BudgetExceeded&) {
        }
      }
    }
  }

  void oracle_cmd() {
    const auto start = Clock::now();
    const std::string which = cfg_.at("oracle");
    json instance{{"oracle", which}};
    json value, method, residual;
    if (which == "enumerate") {
      const std::uint64_t t = u64("T");
      const auto dist = enumerate_orrw(params_, t, Point::origin(params_.d));
      json support = json::array();
      header({"v", "p"});
      for (const auto& [v, p] : dist.support) {
        support.push_back({v, p});
        row({point_str(v), num(p)});
      }
      instance["T"] = t;
      value = {{"support", support}, {"total", dist.total()}};
      method = "depth-first path enumeration";
      residual = {{"paths", std::pow(2.0 * params_.d, static_cast<double>(t))}, {"budget", kEnumerationBudget}};
    } else if (which == "moments") {
      const std::uint64_t t = u64("T");
      instance["T"] = t;
      value = exact_moments(params_, t);
      method = "depth-first path enumeration";
      residual = {{"paths", std::pow(2.0 * params_.d, static_cast<double>(t))}, {"budget", kEnumerationBudget}};
    } else if (which == "escape") {
      const EscapeConfig ec = escape_config();
      json per = json::array();
      header({"z", "p"});
      double total = 0.0;
      std::vector<Point> zs;
      for (const Point& z : ec.avoid) {
        if (ec.outer().contains(z)) zs.push_back(z);
      }
      std::sort(zs.begin(), zs.end());
      for (const Point& z : zs) {
        const double p = exact_escape(z, ec, params_);
        total += p;
        per.push_back({z, p});
        row({point_str(z), num(p)});
      }
      instance.update({{"center", ec.center}, {"r", ec.r}, {"R", ec.scale}});
      value = {{"capacity", total}, {"points", per}};
      method = "depth-first path enumeration with pruning";
      residual = {{"horizon", ec.horizon()}, {"budget", kEnumerationBudget}};
    } else if (which == "green") {
      const double radius = dbl("radius");
      const auto g = srw_green(params_.d, radius);
      instance["radius"] = radius;
      value = {{"g0", g.at(Point::origin(params_.d))}, {"points", g.points.size()}};
      method = "conjugate gradient on the truncated ball";
      residual = g.residual;
    } else if (which == "exit-edge") {
      const double radius = dbl("L");
      const int d = params_.d;
      Edge e = [&] {
        if (!cfg_.at("edge").is_null()) {
          const auto& ends = cfg_.at("edge");
          if (!ends.is_array() || ends.size() != 2) throw ConfigError("edge needs two endpoints");
          return Edge(point_from(ends[0], d, "edge endpoint"), point_from(ends[1], d, "edge endpoint"));
        }
        Point in = Point::origin(d);
        in[0] = static_cast<std::int32_t>(std::floor(radius));
        Point out = in;
        out[0] += 1;
        return Edge(in, out);
      }();
      const auto res = exact_exit_through_edge(d, radius, e);
      instance.update({{"L", radius}, {"edge", e}});
      value = {{"p", res.probability}, {"p_times_L_pow_d_minus_1", res.probability * std::pow(radius, d - 1)}};
      method = "conjugate gradient on the absorbing chain";
      residual = res.residual;
    } else {
      throw ConfigError("unknown oracle '" + which + "'");
    }
    record("oracle", {{"instance", instance}, {"value", value}, {"method", method},
                      {"residual_or_budget", residual}},
           nullptr, 0, start);
  }

  void selftest_cmd() {
    const auto start = Clock::now();
    std::vector<std::pair<std::string, bool>> checks;
    {
      const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
      checks.emplace_back("philox known answer",
                          out == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    }
    {
      EdgeEnvironment env;
      env.insert(Point{0, 0}, 0);
      env.insert(Point{0, 0}, 2);
      const auto p = transition_probs(env, 0.5, Point{0, 0});
      const bool ok = std::abs(p[0] - 0.3) < 1e-12 && std::abs(p[1] - 0.2) < 1e-12 &&
                      std::abs(p[2] - 0.3) < 1e-12 && std::abs(p[3] - 0.2) < 1e-12;
      checks.emplace_back("transition law", ok);
      checks.emplace_back("half-open stepping", step(Point{0, 0}, p, 0.49) == Point{-1, 0});
    }
    {
      const Box box{Point{0}, 1};
      auto path = PathSeq::strict({Point{0}, Point{1}, Point{2}, Point{3}, Point{2}, Point{1}, Point{0}});
      const auto r = restrict_to(path, box);
      checks.emplace_back("restriction", r.vertices == std::vector<Point>{Point{0}, Point{1}, Point{2},
                                                                           Point{2}, Point{1}, Point{0}});
    }
    checks.emplace_back("two-step moment",
                        std::abs(exact_moments(ModelParams::with_defaults(1, 1.0), 2) - 4.0 / 3.0) < 1e-12);
    checks.emplace_back("gambler's ruin exit",
                        std::abs(exact_exit_through_edge(1, 2.0, Edge(Point{2}, Point{3})).probability -
                                 1.0 / 6.0) < 1e-10);
    checks.emplace_back("heaviness threshold", !is_heavy_count(11, 2, 3.5) && is_heavy_count(12, 2, 3.5));
    {
      bool ok = true;
      const auto p = ModelParams::with_defaults(2, 1.0);
      for (std::uint64_t s = 0; s < 20; ++s) {
        const auto res = restriction_demon_replay(s, Box{Point{0, 0}, 3}, 200, p);
        ok = ok && res.restricted.path.vertices == res.demon_walk.path.vertices;
      }
      checks.emplace_back("restriction-demon replay", ok);
    }
    header({"check", "passed"});
    for (const auto& [name, ok] : checks) {
      record("selftest", {{"check", name}, {"passed", ok}}, nullptr, 1, start);
      row({name, ok ? "1" : "0"});
      if (!ok) fail("selftest check failed: " + name);
    }
  }

  json cfg_;
  std::string hash_;
  std::uint64_t seed_;
  unsigned threads_;
  bool gate_;
  ModelParams params_;
  std::vector<json> records_;
  std::vector<std::string> csv_header_;
  std::vector<std::vector<std::string>> csv_rows_;
  std::vector<std::string> failures_;
  std::map<std::string, std::string> files_;
};

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::vector<std::string> experiment_commands() {
  return {"simulate", "variance", "capacity", "relaxed", "heavy", "demon", "concat",
          "tails",    "h1",       "clt",      "phase-scan", "return", "oracle", "selftest"};
}

nlohmann::json normalize_config(const nlohmann::json& raw) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  if (!raw.contains("command") || !raw.at("command").is_string()) {
    throw ConfigError("config needs a string field 'command'");
  }
  const std::string cmd = raw.at("command");
  json defaults = common_defaults();
  defaults.update(command_defaults(cmd));
  for (const auto& [key, v] : raw.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown field '" + key + "' for " + cmd);
    check_type(key, defaults.at(key), v);
  }
  json cfg = defaults;
  if (cfg.contains("preset")) {
    const std::string preset = raw.value("preset", std::string());
    cfg.update(preset_values(cmd, preset));
  }
  cfg.update(raw);

  const int d = cfg.at("d").get<int>();
  const double a = cfg.at("a").get<double>();
  ModelParams p;
  try {
    p = ModelParams::with_defaults(d, a);
    for (const char* key : {"kappa", "nu", "epsilon", "delta"}) {
      if (!cfg.at(key).is_null() && !cfg.at(key).is_number()) {
        throw ConfigError(std::string("field '") + key + "' must be a number");
      }
    }
    if (!cfg.at("kappa").is_null()) p.kappa = cfg.at("kappa").get<double>();
    if (!cfg.at("nu").is_null()) p.nu = cfg.at("nu").get<double>();
    if (!cfg.at("epsilon").is_null()) p.epsilon = cfg.at("epsilon").get<double>();
    if (!cfg.at("delta").is_null()) p.delta = cfg.at("delta").get<double>();
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  cfg["d"] = d;
  cfg["a"] = a;
  cfg["kappa"] = p.kappa;
  cfg["nu"] = p.nu;
  cfg["epsilon"] = p.epsilon;
  cfg["delta"] = p.delta;
  // Integral-valued reals hash like their float spelling.
  for (auto& [key, v] : cfg.items()) {
    if (common_defaults().contains(key)) continue;
    const json def = command_defaults(cmd).at(key);
    if (def.is_number_float() && v.is_number()) v = v.get<double>();
  }
  if (cfg.contains("a_grid")) {
    for (auto& v : cfg["a_grid"]) {
      if (v.is_number()) v = v.get<double>();
    }
  }
  if (cfg.at("command") == "demon") {
    const std::string s = cfg.at("strategy");
    const auto names = builtin_strategy_names();
    if (s != "replay" && std::find(names.begin(), names.end(), s) == names.end()) {
      throw ConfigError("unknown demon strategy '" + s + "'");
    }
    if (!cfg.at("box_radius").is_null() &&
        (!cfg.at("box_radius").is_number_integer() || cfg.at("box_radius").get<std::int64_t>() < 0)) {
      throw ConfigError("box_radius must be a nonnegative integer");
    }
  }
  if (cfg.contains("source") && cfg.at("source") != "time" && cfg.at("source") != "envelopes") {
    throw ConfigError("source must be 'time' or 'envelopes'");
  }
  if (cfg.contains("n") && cfg.at("n").get<std::uint64_t>() < 1) throw ConfigError("n must be >= 1");
  if (cfg.contains("exponent") && !cfg.at("exponent").is_null() && !cfg.at("exponent").is_number()) {
    throw ConfigError("exponent must be a number");
  }
  return cfg;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string config_hash(const nlohmann::json& normalized) {
  json c = normalized;
  c.erase("threads");
  c.erase("out_dir");
  return sha256_hex(c.dump());
}

ExperimentOutcome run_experiment(const nlohmann::json& raw, const std::string& out_dir_override) {
  json cfg = normalize_config(raw);
  if (!out_dir_override.empty()) cfg["out_dir"] = out_dir_override;
  const std::string hash = config_hash(cfg);
  const std::string started = iso_now();

  Run run(cfg, hash);
  try {
    run.dispatch();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  const std::filesystem::path dir = cfg.at("out_dir").get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());

  std::string ndjson;
  for (const auto& r : run.records()) ndjson += r.dump() + "\n";
  std::map<std::string, std::string> outputs = run.files();
  outputs["results.ndjson"] = ndjson;
  outputs["summary.csv"] = run.csv();
  json checksums = json::object();
  for (const auto& [name, data] : outputs) {
    write_file(dir / name, data);
    checksums[name] = sha256_hex(data);
  }
  json cfg_for_manifest = cfg;
  json manifest{{"config_hash", hash},
                {"tool_version", kToolVersion},
                {"started_at", started},
                {"finished_at", iso_now()},
                {"config", cfg_for_manifest},
                {"replica_seed_rule",
                 "seed_i = mix64(mix64(i ^ mix64(master)) ^ mix64(master ^ 0x9e3779b97f4a7c15)), "
                 "mix64 = SplitMix64 finalizer"},
                {"threads", resolve_threads(cfg.at("threads").get<unsigned>())},
                {"outputs", checksums}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  ExperimentOutcome out;
  out.exit_code = run.failures().empty() ? 0 : static_cast<int>(ErrorCode::kGate);
  out.summary = {{"command", cfg.at("command")},
                 {"config_hash", hash},
                 {"out_dir", dir.string()},
                 {"records", run.records().size()},
                 {"gate_failures", run.failures()},
                 {"exit_code", out.exit_code}};
  return out;
}

}  // namespace orrw
