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

#include "xptrav/gridmap.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "xptrav/binary_io.hpp"

namespace xptrav {

namespace {

constexpr char kMapMagic[5] = "TGM1";

constexpr std::array<std::string_view, 6> kReservedLayers = {
    layer::color_r, layer::color_g, layer::color_b,
    layer::elevation, layer::trav, layer::obs_count};

float reserved_fill(std::string_view name) {
  if (name == layer::trav || name == layer::obs_count) return 0.0f;
  return kUnknown;
}

}  // namespace

// ─── Layer ──────────────────────────────────────────────────────────────────

Layer::Layer(int rows, int cols, float fill)
    : rows_(rows), cols_(cols), values_(static_cast<std::size_t>(rows) * cols, fill) {}

void Layer::fill(float value) { std::fill(values_.begin(), values_.end(), value); }

// ─── Patch ──────────────────────────────────────────────────────────────────

Patch::Patch(int size, CellIndex anchor, double coverage)
    : size_(size),
      anchor_(anchor),
      coverage_(coverage),
      data_(static_cast<std::size_t>(kPatchChannels) * size * size, 0.0f) {
  if (size < 2) throw std::invalid_argument("patch size must be at least 2");
}

// ─── GridMap ────────────────────────────────────────────────────────────────

GridMap::GridMap(int rows, int cols, double resolution, WorldXY origin)
    : rows_(rows), cols_(cols), resolution_(resolution), origin_(origin) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("gridmap dimensions must be positive");
  }
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw std::invalid_argument("gridmap resolution must be positive");
  }
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y)) {
    throw std::invalid_argument("gridmap origin must be finite");
  }
  for (auto name : kReservedLayers) add_layer(name, reserved_fill(name));
}

std::optional<CellIndex> GridMap::cell_of(WorldXY p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fr = std::floor((p.y - origin_.y) / resolution_);
  const double fc = std::floor((p.x - origin_.x) / resolution_);
  if (fr < 0.0 || fc < 0.0 || fr >= rows_ || fc >= cols_) return std::nullopt;
  return CellIndex{static_cast<int>(fr), static_cast<int>(fc)};
}

WorldXY GridMap::cell_center(CellIndex cell) const {
  return {origin_.x + (cell.col + 0.5) * resolution_, origin_.y + (cell.row + 0.5) * resolution_};
}

bool GridMap::has_layer(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Layer& GridMap::layer(std::string_view name) {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("no such layer: " + std::string(name));
  return layers_[static_cast<std::size_t>(it - names_.begin())];
}

const Layer& GridMap::layer(std::string_view name) const {
  return const_cast<GridMap*>(this)->layer(name);
}

Layer& GridMap::add_layer(std::string_view name, float fill) {
  if (has_layer(name)) return layer(name);
  names_.emplace_back(name);
  layers_.emplace_back(rows_, cols_, fill);
  return layers_.back();
}

bool GridMap::observed(int row, int col) const {
  return layer(layer::elevation).known(row, col) && layer(layer::color_r).known(row, col) &&
         layer(layer::color_g).known(row, col) && layer(layer::color_b).known(row, col);
}

IngestSummary GridMap::ingest_points(std::span<const ColoredPoint> points) {
  Layer& red = layer(layer::color_r);
  Layer& green = layer(layer::color_g);
  Layer& blue = layer(layer::color_b);
  Layer& elev = layer(layer::elevation);
  Layer& count = layer(layer::obs_count);

  IngestSummary summary;
  std::vector<std::size_t> touched;
  touched.reserve(points.size());

  for (const ColoredPoint& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.r) || !std::isfinite(p.g) || !std::isfinite(p.b)) {
      ++summary.rejected;
      continue;
    }
    const auto cell = cell_of({p.x, p.y});
    if (!cell) {
      ++summary.out_of_bounds;
      continue;
    }
    const int r = cell->row;
    const int c = cell->col;
    const double n = static_cast<double>(count.at(r, c)) + 1.0;
    const auto update_mean = [&](Layer& l, float sample) {
      const double v = std::clamp(static_cast<double>(sample), 0.0, 1.0);
      float& m = l.at(r, c);
      m = is_known(m) ? static_cast<float>(m + (v - m) / n) : static_cast<float>(v);
    };
    update_mean(red, p.r);
    update_mean(green, p.g);
    update_mean(blue, p.b);
    float& h = elev.at(r, c);
    const auto z = static_cast<float>(p.z);
    h = is_known(h) ? std::max(h, z) : z;
    count.at(r, c) = static_cast<float>(n);
    touched.push_back(static_cast<std::size_t>(r) * cols_ + c);
    ++summary.accepted;
  }
  std::sort(touched.begin(), touched.end());
  summary.cells_touched =
      static_cast<std::size_t>(std::unique(touched.begin(), touched.end()) - touched.begin());
  return summary;
}

Patch GridMap::extract_patch(CellIndex anchor, int n) const {
  if (n < 2) throw std::invalid_argument("patch size must be at least 2");
  if (anchor.row < 0 || anchor.col < 0 || anchor.row + n > rows_ || anchor.col + n > cols_) {
    throw std::out_of_range("patch window out of map bounds");
  }
  const std::array<const Layer*, kPatchChannels> sources = {
      &layer(layer::color_r), &layer(layer::color_g), &layer(layer::color_b),
      &layer(layer::elevation)};

  int known_cells = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bool all = true;
      for (const Layer* src : sources) all = all && src->known(anchor.row + i, anchor.col + j);
      known_cells += all ? 1 : 0;
    }
  }
  Patch patch(n, anchor, static_cast<double>(known_cells) / (static_cast<double>(n) * n));

  for (int ch = 0; ch < kPatchChannels; ++ch) {
    const Layer& src = *sources[static_cast<std::size_t>(ch)];
    const auto channel = static_cast<Channel>(ch);
    double sum = 0.0;
    int known = 0;
    for (int i = 0; i < n; ++i) {
      const float* row = src.row_data(anchor.row + i) + anchor.col;
      float* dst = patch.plane(channel).data() + static_cast<std::size_t>(i) * n;
      std::memcpy(dst, row, sizeof(float) * static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        if (is_known(row[j])) {
          sum += row[j];
          ++known;
        }
      }
    }
    if (known == n * n) continue;
    const auto fill = known > 0 ? static_cast<float>(sum / known) : 0.0f;
    for (float& v : patch.plane(channel)) {
      if (!is_known(v)) v = fill;
    }
  }
  return patch;
}

bool bit_identical(const GridMap& a, const GridMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const double ra = a.resolution();
  const double rb = b.resolution();
  const WorldXY oa = a.origin();
  const WorldXY ob = b.origin();
  if (std::memcmp(&ra, &rb, sizeof ra) != 0 || std::memcmp(&oa.x, &ob.x, sizeof(double)) != 0 ||
      std::memcmp(&oa.y, &ob.y, sizeof(double)) != 0) {
    return false;
  }
  if (a.layer_names() != b.layer_names()) return false;
  for (const auto& name : a.layer_names()) {
    const auto va = a.layer(name).values();
    const auto vb = b.layer(name).values();
    if (std::memcmp(va.data(), vb.data(), va.size_bytes()) != 0) return false;
  }
  return true;
}

// ─── Persistence ────────────────────────────────────────────────────────────

void write_map(std::ostream& out, const GridMap& map) {
  binio::write_bytes(out, kMapMagic, 4);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.rows()));
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.cols()));
  binio::write<double>(out, map.resolution());
  binio::write<double>(out, map.origin().x);
  binio::write<double>(out, map.origin().y);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.layer_names().size()));
  for (const auto& name : map.layer_names()) {
    binio::write_name(out, name);
    const auto values = map.layer(name).values();
    binio::write_array(out, values.data(), values.size());
  }
  if (!out) throw IoError("failed writing map");
}

GridMap read_map(std::istream& in) {
  binio::expect_magic(in, kMapMagic, "map");
  const auto rows = binio::read<std::uint32_t>(in, "header rows");
  const auto cols = binio::read<std::uint32_t>(in, "header cols");
  const auto resolution = binio::read<double>(in, "header resolution");
  const auto ox = binio::read<double>(in, "header origin_x");
  const auto oy = binio::read<double>(in, "header origin_y");
  const auto layer_count = binio::read<std::uint32_t>(in, "header layer_count");
  if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) {
    throw FormatError("implausible map dimensions in header");
  }
  if (!(resolution > 0.0)) throw FormatError("non-positive resolution in header");

  GridMap map(static_cast<int>(rows), static_cast<int>(cols), resolution, {ox, oy});
  std::vector<std::string> seen;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::string name = binio::read_name(in, "layer " + std::to_string(i));
    if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
      throw FormatError("duplicate layer '" + name + "'");
    }
    seen.push_back(name);
    Layer& l = map.add_layer(name, kUnknown);
    const auto values = l.values();
    binio::read_array(in, values.data(), values.size(), "layer '" + name + "'");
  }
  for (auto name : kReservedLayers) {
    if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
      throw FormatError("missing reserved layer '" + std::string(name) + "'");
    }
  }
  return map;
}

void save_map(const GridMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_map(out, map);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

GridMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_map(in);
}

}  // namespace xptrav
