#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "orrw/engine.hpp"
#include "orrw/lattice.hpp"

namespace orrw {

// Points are JSON arrays of integers, boxes {"center": [...], "radius": r}, paths arrays of points.
void to_json(nlohmann::json& j, const Point& p);
void from_json(const nlohmann::json& j, Point& p);
void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);
void to_json(nlohmann::json& j, const Edge& e);
void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);

nlohmann::json path_to_json(const PathSeq& path);
PathSeq path_from_json(const nlohmann::json& j);

nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

// Binary framing, all fields little-endian:
//   u32 d | f64 a | u64 T | u64 seed | T bytes of neighbour indices in 0..2d-1
// The walk is reconstructed from the origin; kappa/nu/epsilon/delta revert to defaults.
std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj);
Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes);

void write_trajectory_file(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_file(const std::string& path);

}  // namespace orrw
