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

#include "xptrav/traverse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "xptrav/simd/kernels.hpp"

namespace xptrav {

void TraverseConfig::validate() const {
  if (window < 2) throw std::invalid_argument("window must be at least 2 cells");
  if (stride < 1 || stride >= window) {
    throw std::invalid_argument("stride must satisfy 1 <= stride < window");
  }
  if (distance_scale && !(*distance_scale > 0.0)) {
    throw std::invalid_argument("distance scale must be positive");
  }
  if (!(kernel_floor > 0.0 && kernel_floor <= 1.0)) {
    throw std::invalid_argument("kernel floor must be in (0, 1]");
  }
  if (!(coverage_min > 0.0 && coverage_min <= 1.0)) {
    throw std::invalid_argument("coverage_min must be in (0, 1]");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (experience_spacing && !(*experience_spacing > 0.0)) {
    throw std::invalid_argument("experience spacing must be positive");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

double TraverseConfig::resolved_distance_scale(const CfTree& tree) const {
  return distance_scale.value_or(tree.threshold());
}

double TraverseConfig::resolved_spacing(double resolution) const {
  return experience_spacing.value_or(window * resolution / 2.0);
}

double score_from_distance(double distance, double sigma) {
  return std::exp(-(distance * distance) / (2.0 * sigma * sigma));
}

std::vector<double> spatial_profile(int window, double kernel_floor) {
  const double centre = (window - 1) / 2.0;
  const double sigma_g = window / 4.0;
  // Even windows have four central cells at rho^2 = 0.5; they get exactly 1.
  const double offset = centre - std::floor(centre);
  const double rho2_min = 2.0 * offset * offset;
  std::vector<double> g(static_cast<std::size_t>(window) * window);
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      const double rho2 = (i - centre) * (i - centre) + (j - centre) * (j - centre);
      g[static_cast<std::size_t>(i) * window + j] =
          kernel_floor + (1.0 - kernel_floor) * std::exp(-(rho2 - rho2_min) / (2.0 * sigma_g * sigma_g));
    }
  }
  return g;
}

std::vector<double> center_weighted_kernel(double distance, const TraverseConfig& cfg, double sigma) {
  if (!(distance >= 0.0)) throw std::invalid_argument("distance must be non-negative");
  std::vector<double> h = spatial_profile(cfg.window, cfg.kernel_floor);
  const double score = score_from_distance(distance, sigma);
  for (double& v : h) v *= score;
  return h;
}

std::vector<int> window_anchors(int begin, int extent, int window, int stride) {
  std::vector<int> out;
  if (extent < window) return out;
  const int last = begin + extent - window;
  for (int a = begin; a <= last; a += stride) out.push_back(a);
  if (out.back() != last) out.push_back(last);
  return out;
}

std::string SweepStats::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = "sweep_stats";
  j["windows_total"] = windows_total;
  j["windows_skipped"] = windows_skipped;
  j["distinct_centers"] = distinct_centers;
  j["elapsed"] = elapsed_seconds;
  return j.dump();
}

std::vector<CellIndex> sweep_anchors(const GridMap& map, const TraverseConfig& cfg) {
  CellRect area{0, 0, map.rows(), map.cols()};
  if (cfg.roi) {
    const CellRect& r = *cfg.roi;
    const int r0 = std::max(0, r.row0);
    const int c0 = std::max(0, r.col0);
    const int r1 = std::min(map.rows(), r.row0 + r.rows);
    const int c1 = std::min(map.cols(), r.col0 + r.cols);
    area = {r0, c0, std::max(0, r1 - r0), std::max(0, c1 - c0)};
  }
  std::vector<CellIndex> anchors;
  const auto rows = window_anchors(area.row0, area.rows, cfg.window, cfg.stride);
  const auto cols = window_anchors(area.col0, area.cols, cfg.window, cfg.stride);
  anchors.reserve(rows.size() * cols.size());
  for (int r : rows) {
    for (int c : cols) anchors.push_back({r, c});
  }
  return anchors;
}

WindowScore score_window(const GridMap& map, CellIndex anchor, const CenterSet& centers,
                         const Encoder& encoder, const TraverseConfig& cfg, double sigma) {
  WindowScore ws;
  ws.anchor = anchor;
  const Patch patch = map.extract_patch(anchor, cfg.window);
  if (patch.coverage() < cfg.coverage_min) return ws;
  const Prediction p = centers.nearest(encoder.encode(patch));
  ws.evaluated = true;
  ws.distance = p.distance;
  ws.center_id = p.id;
  ws.score = score_from_distance(p.distance, sigma);
  return ws;
}

namespace {

struct PartialSweep {
  Layer layer;
  std::size_t skipped = 0;
  std::set<std::uint32_t> centers;
};

void sweep_range(const GridMap& map, const CenterSet& centers, const Encoder& encoder,
                 const TraverseConfig& cfg, double sigma, const std::vector<double>& profile,
                 std::span<const CellIndex> anchors, PartialSweep& out) {
  const int n = cfg.window;
  const simd::Kernels& k = simd::active();
  std::vector<float> row(static_cast<std::size_t>(n));
  for (const CellIndex& anchor : anchors) {
    const WindowScore ws = score_window(map, anchor, centers, encoder, cfg, sigma);
    if (!ws.evaluated) {
      ++out.skipped;
      continue;
    }
    out.centers.insert(ws.center_id);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        row[static_cast<std::size_t>(j)] =
            static_cast<float>(ws.score * profile[static_cast<std::size_t>(i) * n + j]);
      }
      k.max_inplace(out.layer.row_data(anchor.row + i) + anchor.col, row.data(),
                    static_cast<std::size_t>(n));
    }
  }
}

}  // namespace

Layer sweep_layer(const GridMap& map, const CenterSet& centers, const Encoder& encoder,
                  const TraverseConfig& cfg, double sigma, std::span<const CellIndex> anchors,
                  SweepStats* stats) {
  cfg.validate();
  if (centers.empty()) throw EmptyMemoryError();
  if (map.rows() < cfg.window || map.cols() < cfg.window) {
    throw std::invalid_argument("map is smaller than the sweep window");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> profile = spatial_profile(cfg.window, cfg.kernel_floor);

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), std::max<std::size_t>(1, anchors.size()));
  std::vector<PartialSweep> parts;
  parts.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    parts.push_back({Layer(map.rows(), map.cols(), 0.0f), 0, {}});
  }
  const std::size_t chunk = (anchors.size() + workers - 1) / workers;
  const auto slice = [&](std::size_t w) {
    const std::size_t b = std::min(anchors.size(), w * chunk);
    const std::size_t e = std::min(anchors.size(), b + chunk);
    return anchors.subspan(b, e - b);
  };
  if (workers == 1) {
    sweep_range(map, centers, encoder, cfg, sigma, profile, anchors, parts[0]);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { sweep_range(map, centers, encoder, cfg, sigma, profile, slice(w), parts[w]); });
    }
  }

  // Per-cell max is commutative and associative, so merge order is irrelevant.
  Layer fused = std::move(parts[0].layer);
  std::size_t skipped = parts[0].skipped;
  std::set<std::uint32_t> used = std::move(parts[0].centers);
  const simd::Kernels& k = simd::active();
  for (std::size_t w = 1; w < parts.size(); ++w) {
    k.max_inplace(fused.values().data(), parts[w].layer.values().data(), fused.values().size());
    skipped += parts[w].skipped;
    used.insert(parts[w].centers.begin(), parts[w].centers.end());
  }
  if (stats != nullptr) {
    stats->windows_total = anchors.size();
    stats->windows_skipped = skipped;
    stats->distinct_centers = used.size();
    stats->elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return fused;
}

SweepStats evaluate_map(GridMap& map, const CfTree& tree, const Encoder& encoder,
                        const TraverseConfig& cfg) {
  if (tree.empty()) throw EmptyMemoryError();
  const auto anchors = sweep_anchors(map, cfg);
  SweepStats stats;
  Layer fused = sweep_layer(map, tree.freeze(), encoder, cfg, cfg.resolved_distance_scale(tree),
                            anchors, &stats);
  Layer& trav = map.layer(layer::trav);
  if (!cfg.roi) {
    trav = std::move(fused);
    return stats;
  }
  const CellRect& r = *cfg.roi;
  for (int i = std::max(0, r.row0); i < std::min(map.rows(), r.row0 + r.rows); ++i) {
    for (int j = std::max(0, r.col0); j < std::min(map.cols(), r.col0 + r.cols); ++j) {
      trav.at(i, j) = fused.at(i, j);
    }
  }
  return stats;
}

// ─── Experience ingestion ───────────────────────────────────────────────────

CellIndex centered_anchor(const GridMap& map, CellIndex cell, int window) {
  return {std::clamp(cell.row - window / 2, 0, std::max(0, map.rows() - window)),
          std::clamp(cell.col - window / 2, 0, std::max(0, map.cols() - window))};
}

bool ExperienceTracker::observe(const GridMap& map, CfTree& tree, const Encoder& encoder,
                                WorldXY pose) {
  if (last_pose_) since_last_ += std::hypot(pose.x - last_pose_->x, pose.y - last_pose_->y);
  last_pose_ = pose;
  // Small tolerance so accumulated steps land on the spacing.
  if (!due_ && since_last_ + 1e-9 >= cfg_.resolved_spacing(map.resolution())) due_ = true;
  if (!due_) return false;
  if (map.rows() < cfg_.window || map.cols() < cfg_.window) return false;

  const auto cell = map.cell_of(pose);
  if (!cell) return false;
  const Patch patch = map.extract_patch(centered_anchor(map, *cell, cfg_.window), cfg_.window);
  if (patch.coverage() < cfg_.coverage_min) return false;
  tree.insert(encoder.encode(patch));
  ++inserted_;
  due_ = false;
  since_last_ = 0.0;
  return true;
}

std::size_t ingest_experience(const GridMap& map, CfTree& tree, const Encoder& encoder,
                              std::span<const WorldXY> pose_track, const TraverseConfig& cfg) {
  cfg.validate();
  ExperienceTracker tracker(cfg);
  for (const WorldXY& pose : pose_track) tracker.observe(map, tree, encoder, pose);
  return tracker.inserted();
}

std::vector<std::uint8_t> binarize(const Layer& layer, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  const auto values = layer.values();
  std::vector<std::uint8_t> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask[i] = static_cast<double>(values[i]) >= epsilon ? 1 : 0;
  }
  return mask;
}

}  // namespace xptrav
