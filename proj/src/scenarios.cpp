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

#include "xptrav/scenarios.hpp"

#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "xptrav/binary_io.hpp"

namespace xptrav {

// ─── Phases ─────────────────────────────────────────────────────────────────

std::vector<PhaseDef> parse_phases(std::istream& in, const WorldSpec* names) {
  std::vector<PhaseDef> phases;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string tick_text;
    if (!(fields >> tick_text)) continue;
    const auto bad = [&](const std::string& why) {
      return FormatError("phases line " + std::to_string(number) + ": " + why);
    };
    PhaseDef p;
    try {
      std::size_t used = 0;
      const long long t = std::stoll(tick_text, &used);
      if (used != tick_text.size() || t < 0) throw bad("tick must be a non-negative integer");
      p.tick = static_cast<std::uint64_t>(t);
    } catch (const std::logic_error&) {
      throw bad("tick must be a non-negative integer");
    }
    std::string ids;
    if (!(fields >> ids)) throw bad("expected `tick class_id[,class_id...] label`");
    if (ids != "-") {
      std::stringstream list(ids);
      std::string item;
      while (std::getline(list, item, ',')) {
        try {
          std::size_t used = 0;
          p.classes.push_back(std::stoi(item, &used));
          if (used != item.size()) throw bad("bad class id '" + item + "'");
        } catch (const std::logic_error&) {
          throw bad("bad class id '" + item + "'");
        }
      }
    }
    std::getline(fields >> std::ws, p.label);
    while (!p.label.empty() && (p.label.back() == ' ' || p.label.back() == '\r')) p.label.pop_back();
    if (p.label.empty()) {
      for (std::size_t i = 0; i < p.classes.size(); ++i) {
        if (i > 0) p.label += '+';
        p.label += names != nullptr ? names->class_name(p.classes[i]) : std::to_string(p.classes[i]);
      }
      if (p.classes.empty()) p.label = "none";
    }
    phases.push_back(std::move(p));
  }
  return phases;
}

void write_phases(std::ostream& out, const std::vector<PhaseDef>& phases) {
  for (const PhaseDef& p : phases) {
    out << p.tick << ' ';
    if (p.classes.empty()) out << '-';
    for (std::size_t i = 0; i < p.classes.size(); ++i) out << (i > 0 ? "," : "") << p.classes[i];
    out << ' ' << p.label << '\n';
  }
}

std::vector<PhaseDef> load_phases(const std::filesystem::path& path, const WorldSpec* names) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_phases(in, names);
}

void save_phases(const std::vector<PhaseDef>& phases, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_phases(out, phases);
}

// ─── Textures ───────────────────────────────────────────────────────────────

std::vector<TexturePreset> texture_presets() {
  std::vector<TexturePreset> t;
  {
    TexturePreset p{"pathway", {}, {}};
    p.texture.base = {0.64f, 0.53f, 0.38f};
    p.texture.speckle = 0.05;
    p.elevation.roughness = 0.01;
    p.elevation.roughness_scale = 0.5;
    t.push_back(p);
  }
  {
    TexturePreset p{"grass", {}, {}};
    p.texture.base = {0.24f, 0.50f, 0.17f};
    p.texture.speckle = 0.12;
    p.elevation.roughness = 0.05;
    p.elevation.roughness_scale = 0.3;
    t.push_back(p);
  }
  {
    TexturePreset p{"sidewalk", {}, {}};
    p.texture.base = {0.62f, 0.60f, 0.56f};
    p.texture.speckle = 0.04;
    p.elevation.base = 0.15;
    t.push_back(p);
  }
  {
    TexturePreset p{"crosswalk", {}, {}};
    p.texture.base = {0.2f, 0.2f, 0.2f};
    p.texture.speckle = 0.03;
    p.texture.stripes = {0.8, 0.8, 0.0, 0.0};
    t.push_back(p);
  }
  {
    TexturePreset p{"road", {}, {}};
    p.texture.base = {0.2f, 0.2f, 0.2f};
    p.texture.speckle = 0.03;
    t.push_back(p);
  }
  {
    TexturePreset p{"shrub", {}, {}};
    p.texture.base = {0.12f, 0.28f, 0.10f};
    p.texture.speckle = 0.15;
    p.elevation.base = 0.3;
    p.elevation.roughness = 0.25;
    p.elevation.roughness_scale = 0.4;
    t.push_back(p);
  }
  return t;
}

TexturePreset texture_preset(const std::string& name) {
  for (TexturePreset& p : texture_presets()) {
    if (p.name == name) return p;
  }
  throw std::invalid_argument("unknown texture preset '" + name + "'");
}

std::vector<std::string> discrimination_textures() { return {"pathway", "grass", "sidewalk", "crosswalk"}; }

// ─── Scenario presets ───────────────────────────────────────────────────────

namespace {

// Quarter turn in exactly 16 ticks of 0.1 s.
constexpr double kQuarterTurnRate = std::numbers::pi / 2.0 / 1.6;

Region region(const std::string& texture, int class_id, Shape shape) {
  const TexturePreset p = texture_preset(texture);
  return {p.name, class_id, std::move(shape), p.texture, p.elevation};
}

Scenario path_grass(double resolution) {
  Scenario s;
  s.name = "s1_path_grass";
  WorldSpec& w = s.world;
  w.seed = 11;
  w.width = 20.0;
  w.height = 20.0;
  w.resolution = resolution;
  w.classes = {{1, "pathway"}, {2, "grass"}, {3, "shrub"}, {9, "tree"}};
  w.obstacle_class = 9;
  w.background = region("grass", 2, {});
  w.regions.push_back(region("shrub", 3, Shape::rectangle(0.0, 4.0, 20.0, 7.0)));
  w.regions.push_back(region("pathway", 1, Shape::rectangle(0.0, 8.0, 20.0, 11.0)));
  w.obstacles.push_back({Shape::disk(15.5, 14.0, 0.5), 2.5, {0.30f, 0.22f, 0.14f}});
  w.obstacles.push_back({Shape::disk(6.0, 14.5, 0.7), 3.0, {0.28f, 0.20f, 0.12f}});
  w.obstacles.push_back({Shape::rectangle(11.0, 5.0, 12.0, 6.0), 1.2, {0.45f, 0.45f, 0.45f}});
  w.traversable_classes = {1, 2};
  w.start = {1.0, 9.5, 0.0};

  // East along the path, quarter turn left, north across the grass.
  s.script = {{0.0, 1.0, 0.0}, {18.0, 0.0, kQuarterTurnRate}, {19.6, 1.0, 0.0}, {29.0, 0.0, 0.0}};
  s.phases = {{180, {1}, "pathway"}, {290, {1, 2}, "pathway+grass"}};
  return s;
}

Scenario sidewalk_crossing(double resolution) {
  Scenario s;
  s.name = "s2_sidewalk_crossing";
  WorldSpec& w = s.world;
  w.seed = 23;
  w.width = 20.0;
  w.height = 20.0;
  w.resolution = resolution;
  w.classes = {{1, "sidewalk"}, {2, "road"}, {3, "crosswalk"}, {4, "grass"}, {9, "pole"}};
  w.obstacle_class = 9;
  w.background = region("grass", 4, {});
  w.regions.push_back(region("sidewalk", 1, Shape::rectangle(0.0, 2.0, 20.0, 8.5)));
  w.regions.push_back(region("road", 2, Shape::rectangle(0.0, 8.5, 20.0, 14.5)));
  w.regions.push_back(region("crosswalk", 3, Shape::rectangle(8.0, 8.5, 12.5, 14.5)));
  w.regions.push_back(region("sidewalk", 1, Shape::rectangle(0.0, 14.5, 20.0, 19.0)));
  w.obstacles.push_back({Shape::disk(14.0, 8.0, 0.15), 3.0, {0.35f, 0.35f, 0.38f}});
  w.obstacles.push_back({Shape::disk(6.5, 15.0, 0.15), 3.0, {0.35f, 0.35f, 0.38f}});
  w.traversable_classes = {1, 3};
  w.start = {1.25, 5.25, 0.0};

  // East along the near sidewalk, quarter turn left, north over the crosswalk.
  s.script = {{0.0, 1.0, 0.0}, {9.0, 0.0, kQuarterTurnRate}, {10.6, 1.0, 0.0}, {21.6, 0.0, 0.0}};
  s.phases = {{90, {1}, "sidewalk"}, {216, {1, 3}, "sidewalk+crosswalk"}};
  return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"s1_path_grass", "s2_sidewalk_crossing"}; }

Scenario preset_scenario(const std::string& name, double resolution) {
  Scenario s;
  if (name == "s1_path_grass") {
    s = path_grass(resolution);
  } else if (name == "s2_sidewalk_crossing") {
    s = sidewalk_crossing(resolution);
  } else {
    throw std::invalid_argument("unknown scenario preset '" + name + "'");
  }
  s.world.validate();
  return s;
}

}  // namespace xptrav
