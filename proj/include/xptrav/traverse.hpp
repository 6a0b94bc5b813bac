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

#ifndef XPTRAV_TRAVERSE_HPP
#define XPTRAV_TRAVERSE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xptrav/encoder.hpp"
#include "xptrav/gridmap.hpp"
#include "xptrav/memory.hpp"

namespace xptrav {

/// Cell rectangle [row0, row0 + rows) x [col0, col0 + cols).
struct CellRect {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;
};

struct TraverseConfig {
  int window = 16;
  int stride = 4;
  /// Latent distance scale of the score; unset means the memory threshold.
  std::optional<double> distance_scale;
  double kernel_floor = 0.2;
  double coverage_min = 0.9;
  double epsilon = 0.5;
  /// Meters between experience samples; unset means window * resolution / 2.
  std::optional<double> experience_spacing;
  /// Restrict the sweep to windows inside this rectangle.
  std::optional<CellRect> roi;
  /// Worker threads for evaluate_map (1 = run on the caller's thread).
  int threads = 1;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  double resolved_distance_scale(const CfTree& tree) const;
  double resolved_spacing(double resolution) const;
};

/// exp(-d^2 / (2 sigma^2)); 1 at d = 0, strictly decreasing.
double score_from_distance(double distance, double sigma);

/// Spatial profile g of the window kernel: kernel_floor + (1 - kernel_floor)
/// * exp(-(rho^2 - rho_c^2) / (2 (n/4)^2)), rho measured from
/// ((n-1)/2, (n-1)/2) and rho_c the distance of the central cell(s);
/// row-major n x n, exactly 1 at the central cell(s).
std::vector<double> spatial_profile(int window, double kernel_floor);

/// H(i,j) = score_from_distance(d) * g(i,j), row-major n x n.
std::vector<double> center_weighted_kernel(double distance, const TraverseConfig& cfg, double sigma);

/// Anchors along one axis: 0, s, 2s, ... plus the edge-clamped last anchor.
std::vector<int> window_anchors(int begin, int extent, int window, int stride);

struct SweepStats {
  std::size_t windows_total = 0;
  std::size_t windows_skipped = 0;
  std::size_t distinct_centers = 0;
  double elapsed_seconds = 0.0;

  std::string to_json() const;
};

/// Per-window outcome of a sweep, for inspection and oracles.
struct WindowScore {
  CellIndex anchor;
  bool evaluated = false;  ///< false when coverage < coverage_min
  double distance = 0.0;
  std::uint32_t center_id = 0;
  double score = 0.0;
};

/// Every window anchor of a sweep, in row-major lattice order.
std::vector<CellIndex> sweep_anchors(const GridMap& map, const TraverseConfig& cfg);

/// Encodes and scores one window against a frozen set of centres.
WindowScore score_window(const GridMap& map, CellIndex anchor, const CenterSet& centers,
                         const Encoder& encoder, const TraverseConfig& cfg, double sigma);

/// Sliding-window sweep: fresh zero layer, one scored kernel per window
/// (skipping windows below coverage_min), max-fused; written into "trav".
SweepStats evaluate_map(GridMap& map, const CfTree& tree, const Encoder& encoder,
                        const TraverseConfig& cfg);

/// Same sweep against an explicit centre snapshot and window order; returns
/// the fused layer without touching the map. `sigma` is the score scale.
Layer sweep_layer(const GridMap& map, const CenterSet& centers, const Encoder& encoder,
                  const TraverseConfig& cfg, double sigma, std::span<const CellIndex> anchors,
                  SweepStats* stats = nullptr);

/// Feeds robot poses one at a time, sampling an experience patch each time
/// the travelled arc length since the last accepted sample reaches the
/// spacing. A site whose patch fails the coverage gate is retried at the
/// next pose.
class ExperienceTracker {
 public:
  explicit ExperienceTracker(TraverseConfig cfg) : cfg_(std::move(cfg)) {}

  /// Returns true when a vector was inserted into `tree`.
  bool observe(const GridMap& map, CfTree& tree, const Encoder& encoder, WorldXY pose);

  std::size_t inserted() const { return inserted_; }
  double pending_arc_length() const { return since_last_; }

 private:
  TraverseConfig cfg_;
  std::optional<WorldXY> last_pose_;
  double since_last_ = 0.0;
  bool due_ = true;
  std::size_t inserted_ = 0;
};

/// Window anchor centred on `cell`, clamped into the map.
CellIndex centered_anchor(const GridMap& map, CellIndex cell, int window);

std::size_t ingest_experience(const GridMap& map, CfTree& tree, const Encoder& encoder,
                              std::span<const WorldXY> pose_track, const TraverseConfig& cfg);

/// Row-major traversable mask: score >= epsilon.
std::vector<std::uint8_t> binarize(const Layer& layer, double epsilon);

}  // namespace xptrav

#endif  // XPTRAV_TRAVERSE_HPP
