// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XPTRAV_WORLDSIM_HPP
#define XPTRAV_WORLDSIM_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xptrav/gridmap.hpp"

namespace xptrav {

// ─── World description ──────────────────────────────────────────────────────

struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
};

/// Periodic bands: cells where frac((x cos a + y sin a) / period + phase) < 0.5
/// get `contrast` added to every channel.
struct Stripes {
  double period = 0.0;  ///< meters; 0 disables
  double contrast = 0.0;
  double angle = 0.0;  ///< radians; direction along which the bands alternate
  double phase = 0.0;
};

struct Texture {
  Rgb base;
  double speckle = 0.0;  ///< amplitude of seeded per-cell color noise
  Stripes stripes;
};

/// base + slope . (x, y) + roughness * smooth_noise(x / roughness_scale, ...)
struct ElevationProfile {
  double base = 0.0;
  double slope_x = 0.0;
  double slope_y = 0.0;
  double roughness = 0.0;
  double roughness_scale = 1.0;  ///< meters between noise lattice points
};

struct Shape {
  enum class Kind { rectangle, polygon, disk };
  Kind kind = Kind::rectangle;
  /// rectangle: {min corner, max corner}; polygon: vertices.
  std::vector<WorldXY> points;
  WorldXY center;
  double radius = 0.0;

  static Shape rectangle(double x0, double y0, double x1, double y1);
  static Shape disk(double cx, double cy, double r);
  static Shape polygon(std::vector<WorldXY> vertices);

  bool contains(WorldXY p) const;
  double area() const;
  /// True when the shape overlaps the interior of the axis-aligned box.
  bool overlaps_box(double x0, double y0, double x1, double y1) const;
};

struct Region {
  std::string name;
  int class_id = 0;
  Shape shape;
  Texture texture;
  ElevationProfile elevation;
};

struct Obstacle {
  Shape shape;  ///< disk or rectangle
  double height = 1.0;
  Rgb color{0.3f, 0.22f, 0.15f};
};

struct TerrainClass {
  int id = 0;
  std::string name;
};

struct RobotProfile {
  double footprint = 0.6;  ///< meters
  double max_v = 1.0;      ///< m/s
  double max_w = 1.0;      ///< rad/s
};

struct SensorModel {
  double range = 4.0;
  int points_per_tick = 2000;
  double color_noise = 0.02;
  double elevation_noise = 0.01;
  bool occlusion = true;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Synthetic scenario. Later regions paint over earlier ones; `background`
/// fills whatever no region covers (its shape is ignored).
struct WorldSpec {
  std::uint64_t seed = 1;
  double width = 20.0;  ///< meters along x
  double height = 20.0; ///< meters along y
  double resolution = 0.1;
  WorldXY origin{0.0, 0.0};
  std::vector<TerrainClass> classes;
  Region background;
  std::vector<Region> regions;
  std::vector<Obstacle> obstacles;
  int obstacle_class = 99;
  std::vector<int> traversable_classes;  ///< ground truth only; never read by the learner
  RobotProfile robot;
  SensorModel sensor;
  Pose start;

  int rows() const;
  int cols() const;
  bool has_class(int id) const;
  std::string class_name(int id) const;
  std::optional<int> class_id(const std::string& name) const;
  /// Throws std::invalid_argument on degenerate regions, unknown classes,
  /// non-positive sizes or bad sensor/robot parameters.
  void validate() const;
};

std::string world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const std::string& text);
void save_world_spec(const WorldSpec& spec, const std::filesystem::path& path);
WorldSpec load_world_spec(const std::filesystem::path& path);

// ─── Generated world ────────────────────────────────────────────────────────

/// Ground-truth rasters on the evaluation grid, row-major.
class World {
 public:
  explicit World(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double resolution() const { return spec_.resolution; }

  std::optional<CellIndex> cell_of(WorldXY p) const;
  WorldXY cell_center(CellIndex c) const;
  bool inside(WorldXY p) const { return cell_of(p).has_value(); }

  /// Visible class: the obstacle class where an obstacle covers the cell centre.
  int class_at(CellIndex c) const { return class_id_[index(c)]; }
  /// Terrain class beneath any obstacle.
  int terrain_class_at(CellIndex c) const { return terrain_class_[index(c)]; }
  Rgb color_at(CellIndex c) const { return color_[index(c)]; }
  float elevation_at(CellIndex c) const { return elevation_[index(c)]; }
  /// Obstacle covers the cell centre (blocks sensing rays).
  bool blocks(CellIndex c) const { return blocking_[index(c)] != 0; }
  /// Obstacle overlaps any part of the cell's pillar.
  bool obstacle_touches(CellIndex c) const { return touched_[index(c)] != 0; }

  /// Empty gridmap on the same grid.
  GridMap blank_map() const;
  /// Gridmap filled with the noiseless ground truth in every cell.
  GridMap truth_map() const;

 private:
  std::size_t index(CellIndex c) const { return static_cast<std::size_t>(c.row) * cols_ + c.col; }

  WorldSpec spec_;
  int rows_;
  int cols_;
  std::vector<int> class_id_;
  std::vector<int> terrain_class_;
  std::vector<Rgb> color_;
  std::vector<float> elevation_;
  std::vector<std::uint8_t> blocking_;
  std::vector<std::uint8_t> touched_;
};

/// Deterministic in the spec (including its seed).
World generate_world(const WorldSpec& spec);

/// Row-major mask: terrain class in `traversable` and no obstacle in the pillar.
std::vector<std::uint8_t> ground_truth_map(const World& world, std::span<const int> traversable);

// ─── Robot and sensor ───────────────────────────────────────────────────────

struct RobotState {
  Pose pose;
  double time = 0.0;
};

struct DriveCommand {
  double v = 0.0;
  double w = 0.0;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

/// Unicycle step with command clamping; pose clamped inside the world.
RobotState step_robot(const RobotState& state, DriveCommand cmd, double dt, const World& world);

using SimRng = std::mt19937_64;

/// Samples points uniformly over the sensing disk, drops occluded cells and
/// perturbs elevation and color with Gaussian noise.
std::vector<ColoredPoint> sense(const World& world, const RobotState& state, const SensorModel& model,
                                SimRng& rng);

/// True when an obstacle cell lies strictly between `from` and `to` on the
/// straight segment (the endpoints' own cells are not tested).
bool ray_blocked(const World& world, WorldXY from, WorldXY to);

}  // namespace xptrav

#endif  // XPTRAV_WORLDSIM_HPP
