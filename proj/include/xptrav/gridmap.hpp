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

#ifndef XPTRAV_GRIDMAP_HPP
#define XPTRAV_GRIDMAP_HPP

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xptrav {

// ─── Layer names ────────────────────────────────────────────────────────────

namespace layer {

inline constexpr std::string_view color_r = "color_r";
inline constexpr std::string_view color_g = "color_g";
inline constexpr std::string_view color_b = "color_b";
inline constexpr std::string_view elevation = "elevation";
inline constexpr std::string_view trav = "trav";
inline constexpr std::string_view obs_count = "obs_count";

}  // namespace layer

/// Quiet NaN marks a cell that has never been observed.
inline constexpr float kUnknown = std::numeric_limits<float>::quiet_NaN();

inline bool is_known(float value) { return !std::isnan(value); }

struct WorldXY {
  double x = 0.0;
  double y = 0.0;
};

/// Row index follows world y, column index follows world x.
struct CellIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// One scalar raster, row-major, single precision.
class Layer {
 public:
  Layer(int rows, int cols, float fill);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  float& at(int row, int col) { return values_[index(row, col)]; }
  float at(int row, int col) const { return values_[index(row, col)]; }
  bool known(int row, int col) const { return is_known(at(row, col)); }

  float* row_data(int row) { return values_.data() + static_cast<std::size_t>(row) * cols_; }
  const float* row_data(int row) const {
    return values_.data() + static_cast<std::size_t>(row) * cols_;
  }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  void fill(float value);

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * cols_ + col;
  }

  int rows_;
  int cols_;
  std::vector<float> values_;
};

/// A fused LiDAR/camera sample in the world frame. Colors are reflectance in [0,1].
struct ColoredPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
};

struct IngestSummary {
  std::size_t accepted = 0;
  std::size_t out_of_bounds = 0;
  std::size_t rejected = 0;  ///< non-finite coordinates
  std::size_t cells_touched = 0;
};

enum class Channel : int { r = 0, g = 1, b = 2, elevation = 3 };
inline constexpr int kPatchChannels = 4;

/// An n x n window with (r, g, b, elevation) channels, stored channel-planar.
class Patch {
 public:
  Patch(int size, CellIndex anchor, double coverage);

  int size() const { return size_; }
  CellIndex anchor() const { return anchor_; }
  /// Fraction of cells known before fill-in.
  double coverage() const { return coverage_; }

  float& at(int row, int col, Channel ch) { return data_[offset(row, col, ch)]; }
  float at(int row, int col, Channel ch) const { return data_[offset(row, col, ch)]; }

  std::span<float> plane(Channel ch) {
    return {data_.data() + plane_offset(ch), plane_size()};
  }
  std::span<const float> plane(Channel ch) const {
    return {data_.data() + plane_offset(ch), plane_size()};
  }
  std::span<const float> data() const { return data_; }

 private:
  std::size_t plane_size() const { return static_cast<std::size_t>(size_) * size_; }
  std::size_t plane_offset(Channel ch) const {
    return static_cast<std::size_t>(ch) * plane_size();
  }
  std::size_t offset(int row, int col, Channel ch) const {
    return plane_offset(ch) + static_cast<std::size_t>(row) * size_ + col;
  }

  int size_;
  CellIndex anchor_;
  double coverage_;
  std::vector<float> data_;
};

/// Multi-layer metric grid. Cell (0,0) has its lower-left corner at `origin`;
/// cell (r,c) covers x in [ox + c*res, ox + (c+1)*res) and y in
/// [oy + r*res, oy + (r+1)*res).
///
/// The reserved layers (color_r/g/b, elevation, trav, obs_count) always exist.
/// Single writer; concurrent readers are fine between mutations.
class GridMap {
 public:
  GridMap(int rows, int cols, double resolution, WorldXY origin);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double resolution() const { return resolution_; }
  WorldXY origin() const { return origin_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(rows_) * cols_; }

  bool contains(CellIndex cell) const {
    return cell.row >= 0 && cell.row < rows_ && cell.col >= 0 && cell.col < cols_;
  }
  std::optional<CellIndex> cell_of(WorldXY p) const;
  WorldXY cell_center(CellIndex cell) const;

  bool has_layer(std::string_view name) const;
  Layer& layer(std::string_view name);
  const Layer& layer(std::string_view name) const;
  /// Adds a layer filled with `fill`, or returns the existing one untouched.
  Layer& add_layer(std::string_view name, float fill);
  const std::vector<std::string>& layer_names() const { return names_; }

  /// Fuses points: running mean of color, running max of elevation,
  /// observation count. Out-of-bounds and non-finite points are skipped.
  IngestSummary ingest_points(std::span<const ColoredPoint> points);

  /// Extracts the n x n window whose top-left cell is `anchor`, filling
  /// unknown cells with the per-channel mean of the window's known cells.
  Patch extract_patch(CellIndex anchor, int n) const;

  /// True when a cell has both color and elevation.
  bool observed(int row, int col) const;

 private:
  int rows_;
  int cols_;
  double resolution_;
  WorldXY origin_;
  std::vector<std::string> names_;
  std::vector<Layer> layers_;
};

/// Bitwise comparison of geometry and every layer (NaN payloads included).
bool bit_identical(const GridMap& a, const GridMap& b);

void write_map(std::ostream& out, const GridMap& map);
GridMap read_map(std::istream& in);
void save_map(const GridMap& map, const std::filesystem::path& path);
GridMap load_map(const std::filesystem::path& path);

}  // namespace xptrav

#endif  // XPTRAV_GRIDMAP_HPP
