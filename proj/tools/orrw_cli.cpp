#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "orrw/orrw.h"

using nlohmann::json;

namespace {

enum class Kind { kInt, kFloat, kString, kFlag, kIntList, kFloatList, kPoint, kPointList, kObject };

struct Field {
  const char* key;
  Kind kind;
  const char* help;
};

const std::vector<Field> kCommon = {
    {"d", Kind::kInt, "lattice dimension"},
    {"a", Kind::kFloat, "reinforcement strength"},
    {"kappa", Kind::kFloat, "heaviness exponent"},
    {"nu", Kind::kFloat, "heat-kernel slack exponent"},
    {"epsilon", Kind::kFloat, "relaxation exponent"},
    {"delta", Kind::kFloat, "radius exponent for heaviness"},
    {"seed", Kind::kInt, "master seed"},
    {"threads", Kind::kInt, "worker threads (0 = hardware)"},
    {"out_dir", Kind::kString, "output directory"},
    {"assert", Kind::kFlag, "turn on statistical assertion gates"},
};

const std::map<std::string, std::pair<std::string, std::vector<Field>>> kCommands = {
    {"simulate",
     {"simulate one walk and write its trajectory",
      {{"steps", Kind::kInt, "number of steps"}, {"source", Kind::kString, "time or envelopes"}}}},
    {"variance",
     {"estimate E[x_1(t)^2] on a time grid",
      {{"t", Kind::kIntList, "times, comma separated"},
       {"n", Kind::kInt, "replicas"},
       {"coordinate", Kind::kInt, "coordinate index"}}}},
    {"capacity",
     {"estimate the escape capacity of a set",
      {{"preset", Kind::kString, "named configuration (tiny-exact)"},
       {"center", Kind::kPoint, "block center, e.g. 0,0"},
       {"r", Kind::kInt, "block radius"},
       {"R", Kind::kInt, "outer scale"},
       {"avoid", Kind::kPointList, "points of the set, e.g. 0,0;1,0"},
       {"n", Kind::kInt, "replicas per point"},
       {"exact", Kind::kFlag, "compare against exhaustive enumeration"},
       {"capvol", Kind::kFlag, "report capacity over volume"}}}},
    {"relaxed",
     {"mark relaxed times of one walk",
      {{"steps", Kind::kInt, "number of steps"},
       {"R", Kind::kInt, "scale"},
       {"t", Kind::kIntList, "query times (default: all)"}}}},
    {"heavy",
     {"first heavy and spend times of one walk",
      {{"steps", Kind::kInt, "number of steps"}, {"R", Kind::kInt, "scale"}}}},
    {"demon",
     {"run a demon-controlled walk or the replay check",
      {{"strategy", Kind::kString, "strategy name or replay"},
       {"strategy_params", Kind::kObject, "strategy parameters as JSON"},
       {"R", Kind::kInt, "scale"},
       {"r", Kind::kInt, "block radius"},
       {"box_radius", Kind::kInt, "radius of the controlled box"},
       {"inside_steps", Kind::kInt, "steps inside the box"},
       {"steps", Kind::kInt, "walk length for replay"},
       {"n", Kind::kInt, "replicas"},
       {"ratio_times", Kind::kIntList, "times at which to compare escape from the walk's history"},
       {"ratio_n", Kind::kInt, "runs per side of each comparison"}}}},
    {"concat",
     {"couple a walk with its concatenation",
      {{"t1", Kind::kInt, "first leg"}, {"t2", Kind::kInt, "second leg"}, {"n", Kind::kInt, "replicas"}}}},
    {"tails",
     {"displacement tail probability",
      {{"T", Kind::kInt, "horizon"}, {"exponent", Kind::kFloat, "threshold exponent"}, {"n", Kind::kInt, "replicas"}}}},
    {"h1", {"site histogram against the heat-kernel bound", {{"T", Kind::kInt, "time"}, {"n", Kind::kInt, "replicas"}}}},
    {"clt",
     {"Gaussian fit of the rescaled endpoint",
      {{"T", Kind::kInt, "time"}, {"n", Kind::kInt, "replicas"}, {"ks_max", Kind::kFloat, "KS gate"}}}},
    {"phase-scan",
     {"range and radius growth across reinforcement values",
      {{"a_grid", Kind::kFloatList, "reinforcement values"},
       {"t", Kind::kIntList, "times"},
       {"n", Kind::kInt, "replicas"}}}},
    {"return",
     {"probability of returning to the origin after t",
      {{"t", Kind::kIntList, "times"}, {"horizon", Kind::kInt, "walk length"}, {"n", Kind::kInt, "replicas"}}}},
    {"oracle",
     {"exact reference computations",
      {{"oracle", Kind::kString, "enumerate, moments, escape, green or exit-edge"},
       {"T", Kind::kInt, "time"},
       {"radius", Kind::kFloat, "ball radius for green"},
       {"L", Kind::kFloat, "ball radius for exit-edge"},
       {"edge", Kind::kPointList, "edge endpoints, e.g. 2;3"},
       {"center", Kind::kPoint, "block center"},
       {"r", Kind::kInt, "block radius"},
       {"R", Kind::kInt, "outer scale"},
       {"avoid", Kind::kPointList, "points of the set"}}}},
    {"selftest", {"built-in consistency checks", {}}},
};

struct BadValue : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

json parse_int(const std::string& s) {
  if (!s.empty() && s[0] == '-') {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw BadValue("not an integer: " + s);
    return v;
  }
  unsigned long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw BadValue("not an integer: " + s);
  return v;
}

json parse_float(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw BadValue("not a number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw BadValue("not a number: " + s);
  }
}

json parse_point(const std::string& s) {
  json p = json::array();
  for (const auto& c : split(s, ',')) p.push_back(parse_int(c));
  return p;
}

json convert(Kind kind, const std::string& s) {
  switch (kind) {
    case Kind::kInt: return parse_int(s);
    case Kind::kFloat: return parse_float(s);
    case Kind::kString: return s;
    case Kind::kFlag: return true;
    case Kind::kIntList: {
      json out = json::array();
      if (!s.empty()) {
        for (const auto& c : split(s, ',')) out.push_back(parse_int(c));
      }
      return out;
    }
    case Kind::kFloatList: {
      json out = json::array();
      for (const auto& c : split(s, ',')) out.push_back(parse_float(c));
      return out;
    }
    case Kind::kPoint: return parse_point(s);
    case Kind::kPointList: {
      json out = json::array();
      if (!s.empty()) {
        for (const auto& c : split(s, ';')) out.push_back(parse_point(c));
      }
      return out;
    }
    case Kind::kObject: {
      json j = json::parse(s, nullptr, false);
      if (!j.is_object()) throw BadValue("not a JSON object: " + s);
      return j;
    }
  }
  return nullptr;
}

std::string flag_name(const char* key) {
  std::string f = key;
  for (char& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Once-reinforced random walk experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(orrw_version()));
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; its fields override the flags")
      ->check(CLI::ExistingFile);

  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, spec] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, spec.first);
    sub->fallthrough();
    subs[name] = sub;
    std::vector<Field> fields = kCommon;
    fields.insert(fields.end(), spec.second.begin(), spec.second.end());
    for (const auto& f : fields) {
      if (f.kind == Kind::kFlag) {
        sub->add_flag(flag_name(f.key), flags[name][f.key], f.help);
      } else {
        sub->add_option(flag_name(f.key), values[name][f.key], f.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ORRW_CONFIG;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  CLI::App* sub = subs.at(command);
  json cfg{{"command", command}};
  std::vector<Field> fields = kCommon;
  fields.insert(fields.end(), kCommands.at(command).second.begin(), kCommands.at(command).second.end());
  try {
    for (const auto& f : fields) {
      if (sub->count(flag_name(f.key)) == 0) continue;
      cfg[f.key] = f.kind == Kind::kFlag ? json(flags[command][f.key]) : convert(f.kind, values[command][f.key]);
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      json file = json::parse(in, nullptr, false);
      if (!file.is_object()) throw BadValue("config file is not a JSON object");
      if (file.contains("command") && file["command"] != command) {
        throw BadValue("config file command does not match the subcommand");
      }
      cfg.update(file);
    }
  } catch (const BadValue& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ORRW_CONFIG;
  }

  char* summary = nullptr;
  const orrw_status status = orrw_run_experiment(cfg.dump().c_str(), nullptr, &summary);
  if (summary != nullptr) {
    std::cout << summary << "\n";
    orrw_string_free(summary);
  }
  if (status != ORRW_OK) std::cerr << "error: " << orrw_last_error() << "\n";
  return static_cast<int>(status);
}
