#include "orrw/serialization.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "orrw/error.hpp"

namespace orrw {

using nlohmann::json;

void to_json(json& j, const Point& p) {
  j = json::array();
  for (std::int32_t c : p.coords()) j.push_back(c);
}

void from_json(const json& j, Point& p) {
  if (!j.is_array()) throw InvalidArgument("point must be a JSON array of integers");
  std::vector<std::int32_t> coords;
  for (const auto& c : j) {
    if (!c.is_number_integer()) throw InvalidArgument("point coordinates must be integers");
    coords.push_back(c.get<std::int32_t>());
  }
  p = Point(std::span<const std::int32_t>(coords));
}

void to_json(json& j, const Box& b) { j = json{{"center", b.center}, {"radius", b.radius}}; }

void from_json(const json& j, Box& b) {
  b.center = j.at("center").get<Point>();
  b.radius = j.at("radius").get<std::int32_t>();
  if (b.radius < 0) throw InvalidArgument("box radius must be nonnegative");
}

void to_json(json& j, const Edge& e) { j = json::array({e.lo(), e.hi()}); }

void to_json(json& j, const ModelParams& p) {
  j = json{{"d", p.d},         {"a", p.a},         {"kappa", p.kappa},
           {"nu", p.nu},       {"epsilon", p.epsilon}, {"delta", p.delta}};
}

void from_json(const json& j, ModelParams& p) {
  p = ModelParams::with_defaults(j.at("d").get<int>(), j.value("a", 0.0));
  p.kappa = j.value("kappa", p.kappa);
  p.nu = j.value("nu", p.nu);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.delta = j.value("delta", p.delta);
  p.validate();
}

json path_to_json(const PathSeq& path) {
  json j = json::array();
  for (const Point& v : path.vertices) j.push_back(v);
  return j;
}

PathSeq path_from_json(const json& j) {
  std::vector<Point> vs;
  for (const auto& v : j) vs.push_back(v.get<Point>());
  return PathSeq::strict(std::move(vs));
}

json trajectory_to_json(const Trajectory& traj) {
  json j{{"params", traj.params},
         {"seed", traj.seed},
         {"source", traj.source == UniformSource::Kind::kTimeStream ? "time" : "envelopes"},
         {"kind", traj.path.kind == PathSeq::Kind::kStrict ? "strict" : "teleporter"},
         {"positions", path_to_json(traj.path)}};
  if (traj.path.kind == PathSeq::Kind::kTeleporter) j["box"] = traj.path.box;
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  const auto params = j.at("params").get<ModelParams>();
  const auto seed = j.value("seed", std::uint64_t{0});
  const auto source = j.value("source", std::string("time")) == "envelopes"
                          ? UniformSource::Kind::kEnvelopes
                          : UniformSource::Kind::kTimeStream;
  PathSeq path = path_from_json(j.at("positions"));
  if (j.value("kind", std::string("strict")) == "teleporter") {
    path = PathSeq::teleporter(std::move(path.vertices), j.at("box").get<Box>());
  }
  if (!path.is_valid()) throw InvalidArgument("trajectory positions do not form a valid path");
  return make_trajectory(params, std::move(path), source, seed);
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("truncated trajectory header");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{in[pos + i]} << (8 * i);
  pos += sizeof(T);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj) {
  if (traj.path.kind != PathSeq::Kind::kStrict) {
    throw InvalidArgument("binary framing only encodes strict paths; use JSON for teleporters");
  }
  if (traj.empty() || traj.start() != Point::origin(traj.params.d)) {
    throw InvalidArgument("binary framing requires a walk started at the origin");
  }
  std::vector<std::uint8_t> out;
  out.reserve(28 + traj.length());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(traj.params.d));
  put_le<double>(out, traj.params.a);
  put_le<std::uint64_t>(out, traj.length());
  put_le<std::uint64_t>(out, traj.seed);
  const auto& vs = traj.path.vertices;
  for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(direction_to(vs[i], vs[i + 1])));
  }
  return out;
}

Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto d = get_le<std::uint32_t>(bytes, pos);
  const auto a = get_le<double>(bytes, pos);
  const auto steps = get_le<std::uint64_t>(bytes, pos);
  const auto seed = get_le<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos != steps) throw IoError("trajectory body length does not match header");
  Trajectory t;
  t.params = ModelParams::with_defaults(static_cast<int>(d), a);
  t.seed = seed;
  std::vector<Point> vs;
  vs.reserve(static_cast<std::size_t>(steps) + 1);
  vs.push_back(Point::origin(static_cast<int>(d)));
  for (std::uint64_t s = 0; s < steps; ++s) {
    const int dir = bytes[pos++];
    if (dir >= 2 * static_cast<int>(d)) throw IoError("neighbour index out of range");
    t.env.insert(vs.back(), dir);
    vs.push_back(neighbor(vs.back(), dir));
  }
  t.visits = count_visits(vs);
  t.path = PathSeq::strict(std::move(vs));
  return t;
}

void write_trajectory_file(const std::string& path, const Trajectory& traj) {
  const auto bytes = encode_trajectory(traj);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

Trajectory read_trajectory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trajectory(bytes);
}

}  // namespace orrw
