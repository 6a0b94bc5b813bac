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

#include "xptrav/worldsim.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "xptrav/binary_io.hpp"

namespace xptrav {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kSpeckleSalt = 0x5bd1e995ULL;
constexpr std::uint64_t kRoughSalt = 0x27d4eb2fULL;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic value in [-1, 1) keyed by (seed, a, b, salt).
double hash_signed(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t salt) {
  std::uint64_t h = mix64(seed ^ mix64(salt));
  h = mix64(h ^ static_cast<std::uint64_t>(a));
  h = mix64(h ^ static_cast<std::uint64_t>(b));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Bilinear value noise with smoothstep easing, in [-1, 1].
double value_noise(std::uint64_t seed, std::uint64_t salt, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(x - fx);
  const double ty = smoothstep(y - fy);
  const double v00 = hash_signed(seed, ix, iy, salt);
  const double v10 = hash_signed(seed, ix + 1, iy, salt);
  const double v01 = hash_signed(seed, ix, iy + 1, salt);
  const double v11 = hash_signed(seed, ix + 1, iy + 1, salt);
  const double a = v00 + (v10 - v00) * tx;
  const double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

double stripe_term(const Stripes& s, WorldXY p) {
  if (s.period <= 0.0 || s.contrast == 0.0) return 0.0;
  const double t = (p.x * std::cos(s.angle) + p.y * std::sin(s.angle)) / s.period + s.phase;
  return t - std::floor(t) < 0.5 ? s.contrast : 0.0;
}

float clamp_unit(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

// ─── Shapes ─────────────────────────────────────────────────────────────────

Shape Shape::rectangle(double x0, double y0, double x1, double y1) {
  Shape s;
  s.kind = Kind::rectangle;
  s.points = {{std::min(x0, x1), std::min(y0, y1)}, {std::max(x0, x1), std::max(y0, y1)}};
  return s;
}

Shape Shape::disk(double cx, double cy, double r) {
  Shape s;
  s.kind = Kind::disk;
  s.center = {cx, cy};
  s.radius = r;
  return s;
}

Shape Shape::polygon(std::vector<WorldXY> vertices) {
  Shape s;
  s.kind = Kind::polygon;
  s.points = std::move(vertices);
  return s;
}

bool Shape::contains(WorldXY p) const {
  switch (kind) {
    case Kind::rectangle:
      return p.x >= points[0].x && p.x < points[1].x && p.y >= points[0].y && p.y < points[1].y;
    case Kind::disk: {
      const double dx = p.x - center.x;
      const double dy = p.y - center.y;
      return dx * dx + dy * dy <= radius * radius;
    }
    case Kind::polygon: {
      bool inside = false;
      const std::size_t n = points.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const WorldXY& a = points[i];
        const WorldXY& b = points[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
          inside = !inside;
        }
      }
      return inside;
    }
  }
  return false;
}

double Shape::area() const {
  switch (kind) {
    case Kind::rectangle:
      if (points.size() != 2) return 0.0;
      return (points[1].x - points[0].x) * (points[1].y - points[0].y);
    case Kind::disk:
      return std::numbers::pi * radius * radius;
    case Kind::polygon: {
      if (points.size() < 3) return 0.0;
      double twice = 0.0;
      for (std::size_t i = 0, j = points.size() - 1; i < points.size(); j = i++) {
        twice += points[j].x * points[i].y - points[i].x * points[j].y;
      }
      return std::abs(twice) / 2.0;
    }
  }
  return 0.0;
}

bool Shape::overlaps_box(double x0, double y0, double x1, double y1) const {
  switch (kind) {
    case Kind::rectangle:
      return points[0].x < x1 && x0 < points[1].x && points[0].y < y1 && y0 < points[1].y;
    case Kind::disk: {
      const double dx = center.x - std::clamp(center.x, x0, x1);
      const double dy = center.y - std::clamp(center.y, y0, y1);
      return dx * dx + dy * dy < radius * radius;
    }
    case Kind::polygon:
      break;
  }
  throw std::logic_error("polygon obstacles are not supported");
}

// ─── WorldSpec ──────────────────────────────────────────────────────────────

int WorldSpec::rows() const { return static_cast<int>(std::llround(height / resolution)); }
int WorldSpec::cols() const { return static_cast<int>(std::llround(width / resolution)); }

bool WorldSpec::has_class(int id) const {
  return std::any_of(classes.begin(), classes.end(), [id](const TerrainClass& c) { return c.id == id; });
}

std::string WorldSpec::class_name(int id) const {
  for (const auto& c : classes) {
    if (c.id == id) return c.name;
  }
  throw std::invalid_argument("unknown class id " + std::to_string(id));
}

std::optional<int> WorldSpec::class_id(const std::string& name) const {
  for (const auto& c : classes) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

void WorldSpec::validate() const {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("resolution must be positive");
  }
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height)) {
    throw std::invalid_argument("world size must be positive");
  }
  if (rows() < 1 || cols() < 1) throw std::invalid_argument("world is smaller than one cell");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = i + 1; j < classes.size(); ++j) {
      if (classes[i].id == classes[j].id) {
        throw std::invalid_argument("duplicate class id " + std::to_string(classes[i].id));
      }
    }
  }
  if (!has_class(background.class_id)) {
    throw std::invalid_argument("background uses unknown class id " + std::to_string(background.class_id));
  }
  for (const Region& r : regions) {
    if (!has_class(r.class_id)) {
      throw std::invalid_argument("region '" + r.name + "' uses unknown class id " +
                                  std::to_string(r.class_id));
    }
    if (r.shape.kind == Shape::Kind::rectangle && r.shape.points.size() != 2) {
      throw std::invalid_argument("region '" + r.name + "': rectangle needs two corners");
    }
    if (!(r.shape.area() > 0.0)) {
      throw std::invalid_argument("region '" + r.name + "' has zero area");
    }
  }
  if (!obstacles.empty() && !has_class(obstacle_class)) {
    throw std::invalid_argument("obstacle class " + std::to_string(obstacle_class) + " is not declared");
  }
  for (const Obstacle& o : obstacles) {
    if (o.shape.kind == Shape::Kind::polygon) {
      throw std::invalid_argument("obstacles must be disks or boxes");
    }
    if (!(o.shape.area() > 0.0)) throw std::invalid_argument("obstacle has zero area");
    if (!(o.height >= 0.0)) throw std::invalid_argument("obstacle height must be non-negative");
  }
  for (int id : traversable_classes) {
    if (!has_class(id)) throw std::invalid_argument("unknown traversable class id " + std::to_string(id));
  }
  if (!(robot.max_v > 0.0) || !(robot.max_w > 0.0) || !(robot.footprint > 0.0)) {
    throw std::invalid_argument("robot limits must be positive");
  }
  if (!(sensor.range > 0.0)) throw std::invalid_argument("sensor range must be positive");
  if (sensor.points_per_tick < 0) throw std::invalid_argument("points_per_tick must be >= 0");
  if (!(sensor.color_noise >= 0.0) || !(sensor.elevation_noise >= 0.0)) {
    throw std::invalid_argument("sensor noise must be non-negative");
  }
}

// ─── WorldSpec JSON ─────────────────────────────────────────────────────────

namespace {

Json xy(WorldXY p) { return Json::array({p.x, p.y}); }

WorldXY xy_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw FormatError(std::string(what) + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Json shape_json(const Shape& s) {
  Json j;
  switch (s.kind) {
    case Shape::Kind::rectangle:
      j["type"] = "rectangle";
      j["min"] = xy(s.points.at(0));
      j["max"] = xy(s.points.at(1));
      break;
    case Shape::Kind::disk:
      j["type"] = "disk";
      j["center"] = xy(s.center);
      j["radius"] = s.radius;
      break;
    case Shape::Kind::polygon: {
      j["type"] = "polygon";
      Json pts = Json::array();
      for (const WorldXY& p : s.points) pts.push_back(xy(p));
      j["points"] = pts;
      break;
    }
  }
  return j;
}

Shape shape_from(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "rectangle") {
    const WorldXY a = xy_from(j.at("min"), "rectangle min");
    const WorldXY b = xy_from(j.at("max"), "rectangle max");
    return Shape::rectangle(a.x, a.y, b.x, b.y);
  }
  if (type == "disk") {
    const WorldXY c = xy_from(j.at("center"), "disk center");
    return Shape::disk(c.x, c.y, j.at("radius").get<double>());
  }
  if (type == "polygon") {
    std::vector<WorldXY> pts;
    for (const Json& p : j.at("points")) pts.push_back(xy_from(p, "polygon vertex"));
    return Shape::polygon(std::move(pts));
  }
  throw FormatError("unknown shape type '" + type + "'");
}

// Shortest decimal that reads back as the same float.
double float_decimal(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::strtod(std::string(buf, res.ptr).c_str(), nullptr);
}

Json rgb_json(Rgb c) { return Json::array({float_decimal(c.r), float_decimal(c.g), float_decimal(c.b)}); }

Rgb rgb_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("color: expected [r, g, b]");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

Json region_json(const Region& r, bool with_shape) {
  Json j;
  j["name"] = r.name;
  j["class"] = r.class_id;
  if (with_shape) j["shape"] = shape_json(r.shape);
  Json tex;
  tex["rgb"] = rgb_json(r.texture.base);
  tex["speckle"] = r.texture.speckle;
  if (r.texture.stripes.period > 0.0) {
    tex["stripes"] = {{"period", r.texture.stripes.period},
                      {"contrast", r.texture.stripes.contrast},
                      {"angle", r.texture.stripes.angle},
                      {"phase", r.texture.stripes.phase}};
  }
  j["texture"] = tex;
  j["elevation"] = {{"base", r.elevation.base},
                    {"slope", Json::array({r.elevation.slope_x, r.elevation.slope_y})},
                    {"roughness", r.elevation.roughness},
                    {"roughness_scale", r.elevation.roughness_scale}};
  return j;
}

Region region_from(const Json& j, bool with_shape) {
  Region r;
  r.name = j.value("name", std::string());
  r.class_id = j.at("class").get<int>();
  if (with_shape) r.shape = shape_from(j.at("shape"));
  if (j.contains("texture")) {
    const Json& t = j["texture"];
    r.texture.base = rgb_from(t.at("rgb"));
    r.texture.speckle = t.value("speckle", 0.0);
    if (t.contains("stripes")) {
      const Json& s = t["stripes"];
      r.texture.stripes.period = s.at("period").get<double>();
      r.texture.stripes.contrast = s.value("contrast", 0.0);
      r.texture.stripes.angle = s.value("angle", 0.0);
      r.texture.stripes.phase = s.value("phase", 0.0);
    }
  }
  if (j.contains("elevation")) {
    const Json& e = j["elevation"];
    r.elevation.base = e.value("base", 0.0);
    if (e.contains("slope")) {
      const WorldXY s = xy_from(e["slope"], "elevation slope");
      r.elevation.slope_x = s.x;
      r.elevation.slope_y = s.y;
    }
    r.elevation.roughness = e.value("roughness", 0.0);
    r.elevation.roughness_scale = e.value("roughness_scale", 1.0);
  }
  return r;
}

}  // namespace

std::string world_spec_to_json(const WorldSpec& spec) {
  Json j;
  j["format"] = "xptrav-world";
  j["version"] = 1;
  j["seed"] = spec.seed;
  j["size"] = Json::array({spec.width, spec.height});
  j["resolution"] = spec.resolution;
  j["origin"] = xy(spec.origin);
  Json classes = Json::array();
  for (const auto& c : spec.classes) classes.push_back({{"id", c.id}, {"name", c.name}});
  j["classes"] = classes;
  j["obstacle_class"] = spec.obstacle_class;
  j["traversable_classes"] = spec.traversable_classes;
  j["background"] = region_json(spec.background, false);
  Json regions = Json::array();
  for (const Region& r : spec.regions) regions.push_back(region_json(r, true));
  j["regions"] = regions;
  Json obstacles = Json::array();
  for (const Obstacle& o : spec.obstacles) {
    obstacles.push_back({{"shape", shape_json(o.shape)}, {"height", o.height}, {"rgb", rgb_json(o.color)}});
  }
  j["obstacles"] = obstacles;
  j["robot"] = {{"footprint", spec.robot.footprint}, {"max_v", spec.robot.max_v}, {"max_w", spec.robot.max_w}};
  j["sensor"] = {{"range", spec.sensor.range},
                 {"points_per_tick", spec.sensor.points_per_tick},
                 {"color_noise", spec.sensor.color_noise},
                 {"elevation_noise", spec.sensor.elevation_noise},
                 {"occlusion", spec.sensor.occlusion}};
  j["start"] = {{"x", spec.start.x}, {"y", spec.start.y}, {"theta", spec.start.theta}};
  return j.dump(2) + "\n";
}

WorldSpec world_spec_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("world spec is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "xptrav-world") {
      throw FormatError("not a world spec (missing \"format\": \"xptrav-world\")");
    }
    if (j.value("version", 0) != 1) throw FormatError("unsupported world spec version");
    WorldSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    const WorldXY size = xy_from(j.at("size"), "size");
    spec.width = size.x;
    spec.height = size.y;
    spec.resolution = j.at("resolution").get<double>();
    if (j.contains("origin")) spec.origin = xy_from(j["origin"], "origin");
    for (const Json& c : j.at("classes")) {
      spec.classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
    }
    spec.obstacle_class = j.value("obstacle_class", spec.obstacle_class);
    if (j.contains("traversable_classes")) {
      spec.traversable_classes = j["traversable_classes"].get<std::vector<int>>();
    }
    spec.background = region_from(j.at("background"), false);
    if (j.contains("regions")) {
      for (const Json& r : j["regions"]) spec.regions.push_back(region_from(r, true));
    }
    if (j.contains("obstacles")) {
      for (const Json& o : j["obstacles"]) {
        Obstacle ob;
        ob.shape = shape_from(o.at("shape"));
        ob.height = o.value("height", ob.height);
        if (o.contains("rgb")) ob.color = rgb_from(o["rgb"]);
        spec.obstacles.push_back(ob);
      }
    }
    if (j.contains("robot")) {
      const Json& r = j["robot"];
      spec.robot.footprint = r.value("footprint", spec.robot.footprint);
      spec.robot.max_v = r.value("max_v", spec.robot.max_v);
      spec.robot.max_w = r.value("max_w", spec.robot.max_w);
    }
    if (j.contains("sensor")) {
      const Json& s = j["sensor"];
      spec.sensor.range = s.value("range", spec.sensor.range);
      spec.sensor.points_per_tick = s.value("points_per_tick", spec.sensor.points_per_tick);
      spec.sensor.color_noise = s.value("color_noise", spec.sensor.color_noise);
      spec.sensor.elevation_noise = s.value("elevation_noise", spec.sensor.elevation_noise);
      spec.sensor.occlusion = s.value("occlusion", spec.sensor.occlusion);
    }
    if (j.contains("start")) {
      const Json& s = j["start"];
      spec.start = {s.value("x", 0.0), s.value("y", 0.0), s.value("theta", 0.0)};
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("world spec: ") + e.what());
  }
}

void save_world_spec(const WorldSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << world_spec_to_json(spec);
  if (!out) throw IoError("write failed: " + path.string());
}

WorldSpec load_world_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return world_spec_from_json(buf.str());
}

// ─── World ──────────────────────────────────────────────────────────────────

World::World(WorldSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  rows_ = spec_.rows();
  cols_ = spec_.cols();
  const std::size_t cells = static_cast<std::size_t>(rows_) * cols_;
  class_id_.resize(cells);
  terrain_class_.resize(cells);
  color_.resize(cells);
  elevation_.resize(cells);
  blocking_.assign(cells, 0);
  touched_.assign(cells, 0);

  const double res = spec_.resolution;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const WorldXY p = cell_center({r, c});
      const Region* region = &spec_.background;
      std::uint64_t salt = 0;
      for (std::size_t k = spec_.regions.size(); k-- > 0;) {
        if (spec_.regions[k].shape.contains(p)) {
          region = &spec_.regions[k];
          salt = k + 1;
          break;
        }
      }
      const std::size_t i = index({r, c});
      terrain_class_[i] = region->class_id;
      class_id_[i] = region->class_id;

      const Texture& tex = region->texture;
      const double stripe = stripe_term(tex.stripes, p);
      const double shared = hash_signed(spec_.seed, r, c, kSpeckleSalt);
      std::array<double, 3> base{tex.base.r, tex.base.g, tex.base.b};
      std::array<float, 3> rgb{};
      for (int ch = 0; ch < 3; ++ch) {
        const double own = hash_signed(spec_.seed, r, c, kSpeckleSalt + 1 + static_cast<std::uint64_t>(ch));
        rgb[ch] = clamp_unit(base[ch] + stripe + tex.speckle * (0.7 * shared + 0.3 * own));
      }
      color_[i] = {rgb[0], rgb[1], rgb[2]};

      const ElevationProfile& e = region->elevation;
      double z = e.base + e.slope_x * p.x + e.slope_y * p.y;
      if (e.roughness != 0.0) {
        z += e.roughness *
             value_noise(spec_.seed, kRoughSalt + salt, p.x / e.roughness_scale, p.y / e.roughness_scale);
      }

      const double x0 = spec_.origin.x + c * res;
      const double y0 = spec_.origin.y + r * res;
      for (const Obstacle& o : spec_.obstacles) {
        if (o.shape.overlaps_box(x0, y0, x0 + res, y0 + res)) touched_[i] = 1;
        if (!blocking_[i] && o.shape.contains(p)) {
          blocking_[i] = 1;
          class_id_[i] = spec_.obstacle_class;
          color_[i] = o.color;
          z += o.height;
        }
      }
      elevation_[i] = static_cast<float>(z);
    }
  }
}

std::optional<CellIndex> World::cell_of(WorldXY p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fc = std::floor((p.x - spec_.origin.x) / spec_.resolution);
  const double fr = std::floor((p.y - spec_.origin.y) / spec_.resolution);
  if (fr < 0.0 || fc < 0.0 || fr >= rows_ || fc >= cols_) return std::nullopt;
  return CellIndex{static_cast<int>(fr), static_cast<int>(fc)};
}

WorldXY World::cell_center(CellIndex c) const {
  return {spec_.origin.x + (c.col + 0.5) * spec_.resolution,
          spec_.origin.y + (c.row + 0.5) * spec_.resolution};
}

GridMap World::blank_map() const { return GridMap(rows_, cols_, spec_.resolution, spec_.origin); }

GridMap World::truth_map() const {
  GridMap map = blank_map();
  Layer& lr = map.layer(layer::color_r);
  Layer& lg = map.layer(layer::color_g);
  Layer& lb = map.layer(layer::color_b);
  Layer& lz = map.layer(layer::elevation);
  Layer& ln = map.layer(layer::obs_count);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const Rgb col = color_at({r, c});
      lr.at(r, c) = col.r;
      lg.at(r, c) = col.g;
      lb.at(r, c) = col.b;
      lz.at(r, c) = elevation_at({r, c});
      ln.at(r, c) = 1.0f;
    }
  }
  return map;
}

World generate_world(const WorldSpec& spec) { return World(spec); }

std::vector<std::uint8_t> ground_truth_map(const World& world, std::span<const int> traversable) {
  for (int id : traversable) {
    if (!world.spec().has_class(id)) throw std::invalid_argument("unknown class id " + std::to_string(id));
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(world.rows()) * world.cols(), 0);
  for (int r = 0; r < world.rows(); ++r) {
    for (int c = 0; c < world.cols(); ++c) {
      const int cls = world.terrain_class_at({r, c});
      const bool ok = std::find(traversable.begin(), traversable.end(), cls) != traversable.end();
      mask[static_cast<std::size_t>(r) * world.cols() + c] = ok && !world.obstacle_touches({r, c}) ? 1 : 0;
    }
  }
  return mask;
}

// ─── Robot ──────────────────────────────────────────────────────────────────

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

RobotState step_robot(const RobotState& state, DriveCommand cmd, double dt, const World& world) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const RobotProfile& p = world.spec().robot;
  const double v = std::isfinite(cmd.v) ? std::clamp(cmd.v, -p.max_v, p.max_v) : 0.0;
  const double w = std::isfinite(cmd.w) ? std::clamp(cmd.w, -p.max_w, p.max_w) : 0.0;
  RobotState next = state;
  next.pose.x += v * std::cos(state.pose.theta) * dt;
  next.pose.y += v * std::sin(state.pose.theta) * dt;
  next.pose.theta = wrap_angle(state.pose.theta + w * dt);
  next.time += dt;

  const WorldXY lo = world.spec().origin;
  const double x_hi = lo.x + world.cols() * world.resolution();
  const double y_hi = lo.y + world.rows() * world.resolution();
  next.pose.x = std::clamp(next.pose.x, lo.x, std::nextafter(x_hi, lo.x));
  next.pose.y = std::clamp(next.pose.y, lo.y, std::nextafter(y_hi, lo.y));
  return next;
}

// ─── Sensor ─────────────────────────────────────────────────────────────────

bool ray_blocked(const World& world, WorldXY from, WorldXY to) {
  const double res = world.resolution();
  const WorldXY o = world.spec().origin;
  const double gx0 = (from.x - o.x) / res;
  const double gy0 = (from.y - o.y) / res;
  const double gx1 = (to.x - o.x) / res;
  const double gy1 = (to.y - o.y) / res;
  auto cx = static_cast<long>(std::floor(gx0));
  auto cy = static_cast<long>(std::floor(gy0));
  const auto ex = static_cast<long>(std::floor(gx1));
  const auto ey = static_cast<long>(std::floor(gy1));
  const double dx = gx1 - gx0;
  const double dy = gy1 - gy0;
  const int sx = dx > 0 ? 1 : -1;
  const int sy = dy > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double tdx = dx != 0.0 ? std::abs(1.0 / dx) : kInf;
  const double tdy = dy != 0.0 ? std::abs(1.0 / dy) : kInf;
  double tx = dx != 0.0 ? ((sx > 0 ? std::floor(gx0) + 1.0 - gx0 : gx0 - std::floor(gx0)) * tdx) : kInf;
  double ty = dy != 0.0 ? ((sy > 0 ? std::floor(gy0) + 1.0 - gy0 : gy0 - std::floor(gy0)) * tdy) : kInf;

  const long max_steps = std::labs(ex - cx) + std::labs(ey - cy);
  for (long step = 0; step < max_steps; ++step) {
    if (tx < ty) {
      cx += sx;
      tx += tdx;
    } else {
      cy += sy;
      ty += tdy;
    }
    if (cx == ex && cy == ey) return false;
    if (cx >= 0 && cy >= 0 && cx < world.cols() && cy < world.rows() &&
        world.blocks({static_cast<int>(cy), static_cast<int>(cx)})) {
      return true;
    }
  }
  return false;
}

std::vector<ColoredPoint> sense(const World& world, const RobotState& state, const SensorModel& model,
                                SimRng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ColoredPoint> points;
  points.reserve(static_cast<std::size_t>(model.points_per_tick));
  const WorldXY origin{state.pose.x, state.pose.y};
  for (int k = 0; k < model.points_per_tick; ++k) {
    const double radius = model.range * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const WorldXY p{origin.x + radius * std::cos(phi), origin.y + radius * std::sin(phi)};
    const auto cell = world.cell_of(p);
    if (!cell) continue;
    if (model.occlusion && ray_blocked(world, origin, p)) continue;
    const Rgb c = world.color_at(*cell);
    ColoredPoint pt{p.x, p.y, world.elevation_at(*cell), c.r, c.g, c.b};
    if (model.elevation_noise > 0.0) pt.z += model.elevation_noise * gauss(rng);
    if (model.color_noise > 0.0) {
      pt.r = clamp_unit(pt.r + model.color_noise * gauss(rng));
      pt.g = clamp_unit(pt.g + model.color_noise * gauss(rng));
      pt.b = clamp_unit(pt.b + model.color_noise * gauss(rng));
    }
    points.push_back(pt);
  }
  return points;
}

}  // namespace xptrav
