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

#ifndef XPTRAV_SCENARIOS_HPP
#define XPTRAV_SCENARIOS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xptrav/session.hpp"
#include "xptrav/worldsim.hpp"

namespace xptrav {

/// Ground-truth class set in force from `tick` on.
struct PhaseDef {
  std::uint64_t tick = 0;
  std::vector<int> classes;
  std::string label;
};

/// Phases file: `tick class_id[,class_id...] label` per line; `-` is the
/// empty class set; a missing label becomes the class names joined by '+'.
std::vector<PhaseDef> parse_phases(std::istream& in, const WorldSpec* names = nullptr);
void write_phases(std::ostream& out, const std::vector<PhaseDef>& phases);
std::vector<PhaseDef> load_phases(const std::filesystem::path& path, const WorldSpec* names = nullptr);
void save_phases(const std::vector<PhaseDef>& phases, const std::filesystem::path& path);

/// A world plus the drive that explores it and the phases that score it.
struct Scenario {
  std::string name;
  WorldSpec world;
  Script script;
  std::vector<PhaseDef> phases;
};

/// Procedural surface: a region template without shape or class.
struct TexturePreset {
  std::string name;
  Texture texture;
  ElevationProfile elevation;
};

/// pathway, grass, sidewalk, crosswalk, road, shrub.
std::vector<TexturePreset> texture_presets();
TexturePreset texture_preset(const std::string& name);

/// The four surfaces used for encoder discrimination checks.
std::vector<std::string> discrimination_textures();

/// "s1_path_grass", "s2_sidewalk_crossing".
std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown name.
Scenario preset_scenario(const std::string& name, double resolution = 0.1);

}  // namespace xptrav

#endif  // XPTRAV_SCENARIOS_HPP
