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

#ifndef XPTRAV_TESTS_SUPPORT_HPP
#define XPTRAV_TESTS_SUPPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "xptrav/encoder.hpp"
#include "xptrav/gridmap.hpp"
#include "xptrav/memory.hpp"
#include "xptrav/traverse.hpp"

namespace xptrav::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline FeatureVector random_vector(Rng& rng, double lo = -1.0, double hi = 1.0) {
  FeatureVector v;
  for (auto& x : v.values) x = uniform(rng, lo, hi);
  return v;
}

/// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("xptrav_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Writes color and elevation directly, bypassing ingest.
inline void set_cell(GridMap& map, int r, int c, float red, float green, float blue, float h) {
  map.layer(layer::color_r).at(r, c) = red;
  map.layer(layer::color_g).at(r, c) = green;
  map.layer(layer::color_b).at(r, c) = blue;
  map.layer(layer::elevation).at(r, c) = h;
  map.layer(layer::obs_count).at(r, c) = 1.0f;
}

/// Fully known patch with uniform random channels.
inline Patch random_patch(Rng& rng, int n) {
  Patch p(n, {0, 0}, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < kPatchChannels; ++c) {
        p.at(i, j, static_cast<Channel>(c)) = static_cast<float>(uniform(rng, 0, 1));
      }
    }
  }
  return p;
}

/// Random map with blocky materials and a fraction of unknown cells.
inline GridMap random_map(Rng& rng, int rows, int cols, double unknown_fraction = 0.0) {
  GridMap map(rows, cols, 0.1, {0.0, 0.0});
  const int block = uniform_int(rng, 4, 12);
  std::vector<std::array<float, 4>> palette;
  for (int i = 0; i < 4; ++i) {
    palette.push_back({static_cast<float>(uniform(rng, 0, 1)), static_cast<float>(uniform(rng, 0, 1)),
                       static_cast<float>(uniform(rng, 0, 1)), static_cast<float>(uniform(rng, 0, 0.3))});
  }
  std::vector<int> tiles(static_cast<std::size_t>((rows / block + 1) * (cols / block + 1)));
  for (int& t : tiles) t = uniform_int(rng, 0, 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (uniform(rng, 0, 1) < unknown_fraction) continue;
      const auto& p = palette[static_cast<std::size_t>(tiles[static_cast<std::size_t>((r / block) * (cols / block + 1) + c / block)])];
      const auto jitter = [&] { return static_cast<float>(uniform(rng, -0.03, 0.03)); };
      set_cell(map, r, c, p[0] + jitter(), p[1] + jitter(), p[2] + jitter(), p[3] + jitter());
    }
  }
  return map;
}

// ─── Brute-force oracles ────────────────────────────────────────────────────

/// Exhaustive nearest centroid; strict < keeps the lowest id on ties.
inline Prediction nearest_oracle(const std::vector<SubclusterInfo>& centers, const FeatureVector& v) {
  Prediction best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const SubclusterInfo& s : centers) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) acc += (v[i] - s.centroid[i]) * (v[i] - s.centroid[i]);
    if (acc < best_d2) {
      best_d2 = acc;
      best = {s.centroid, 0.0, s.id};
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

/// Per cell: maximum over every lattice window that contains it of
/// score(d) * g(i, j), with windows below the coverage gate contributing 0.
inline Layer fusion_oracle(const GridMap& map, const CfTree& tree, const Encoder& encoder,
                           const TraverseConfig& cfg) {
  const int n = cfg.window;
  const auto axis = [&](int extent) {
    std::vector<int> a;
    for (int x = 0; x + n <= extent; x += cfg.stride) a.push_back(x);
    if (a.back() != extent - n) a.push_back(extent - n);
    return a;
  };
  const double sigma = cfg.distance_scale.value_or(tree.threshold());
  const double centre = (n - 1) / 2.0;
  const double sigma_g = n / 4.0;
  const double rho2_min = n % 2 == 0 ? 0.5 : 0.0;
  const auto centers = tree.centers();

  struct Scored {
    int row, col;
    double score;
  };
  std::vector<Scored> windows;
  for (int r : axis(map.rows())) {
    for (int c : axis(map.cols())) {
      const Patch patch = map.extract_patch({r, c}, n);
      if (patch.coverage() < cfg.coverage_min) continue;
      const double d = nearest_oracle(centers, encoder.encode(patch)).distance;
      windows.push_back({r, c, std::exp(-(d * d) / (2.0 * sigma * sigma))});
    }
  }

  Layer out(map.rows(), map.cols(), 0.0f);
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      float best = 0.0f;
      for (const Scored& w : windows) {
        const int i = r - w.row;
        const int j = c - w.col;
        if (i < 0 || j < 0 || i >= n || j >= n) continue;
        const double rho2 = (i - centre) * (i - centre) + (j - centre) * (j - centre);
        const double g = cfg.kernel_floor + (1.0 - cfg.kernel_floor) * std::exp(-(rho2 - rho2_min) / (2.0 * sigma_g * sigma_g));
        best = std::max(best, static_cast<float>(w.score * g));
      }
      out.at(r, c) = best;
    }
  }
  return out;
}

inline bool layers_equal(const Layer& a, const Layer& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const float x = a.values()[i];
    const float y = b.values()[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

/// Naive 6-loop reference: for each output channel, output pixel, input
/// channel and 3x3 tap; stride 2, zero padding 1, then ReLU.
inline FeatureMap conv_oracle(const FeatureMap& in, const ConvStage& st) {
  const int oh = (in.height + 1) / 2;
  const int ow = (in.width + 1) / 2;
  FeatureMap out(st.out_channels, oh, ow);
  for (int o = 0; o < st.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = st.bias[static_cast<std::size_t>(o)];
        for (int ci = 0; ci < st.in_channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = 2 * y + ky - 1;
              const int sx = 2 * x + kx - 1;
              if (sy < 0 || sx < 0 || sy >= in.height || sx >= in.width) continue;
              acc += static_cast<double>(st.kernel[static_cast<std::size_t>(((o * st.in_channels + ci) * 3 + ky) * 3 + kx)]) *
                     in.at(ci, sy, sx);
            }
          }
        }
        out.at(o, y, x) = static_cast<float>(std::max(0.0, acc));
      }
    }
  }
  return out;
}

inline ConvWeights random_weights(Rng& rng, double scale = 0.3) {
  ConvWeights w = ConvWeights::zeros();
  const auto fill = [&](std::vector<float>& v) {
    for (float& x : v) x = static_cast<float>(uniform(rng, -scale, scale));
  };
  for (ConvStage& s : w.stages) {
    fill(s.kernel);
    fill(s.bias);
  }
  fill(w.proj_weight);
  fill(w.proj_bias);
  return w;
}

/// Full forward pass built from conv_oracle, global mean pooling and the
/// projection, all in double.
inline FeatureVector conv_forward_oracle(const Patch& normalized, const ConvWeights& w) {
  FeatureMap x(kPatchChannels, normalized.size(), normalized.size());
  for (int c = 0; c < kPatchChannels; ++c) {
    for (int r = 0; r < normalized.size(); ++r) {
      for (int q = 0; q < normalized.size(); ++q) x.at(c, r, q) = normalized.at(r, q, static_cast<Channel>(c));
    }
  }
  for (const ConvStage& s : w.stages) x = conv_oracle(x, s);
  std::vector<double> pooled(static_cast<std::size_t>(x.channels), 0.0);
  for (int c = 0; c < x.channels; ++c) {
    double acc = 0.0;
    for (int r = 0; r < x.height; ++r) {
      for (int q = 0; q < x.width; ++q) acc += x.at(c, r, q);
    }
    pooled[static_cast<std::size_t>(c)] = acc / (x.height * x.width);
  }
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    double acc = w.proj_bias[i];
    for (std::size_t j = 0; j < kFeatureDim; ++j) acc += static_cast<double>(w.proj_weight[i * kFeatureDim + j]) * pooled[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace xptrav::testing

#endif  // XPTRAV_TESTS_SUPPORT_HPP
