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

#ifndef XPTRAV_ENCODER_HPP
#define XPTRAV_ENCODER_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xptrav/gridmap.hpp"

namespace xptrav {

inline constexpr std::size_t kFeatureDim = 32;

/// Latent description of one patch.
struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  const double* data() const { return values.data(); }
  static constexpr std::size_t size() { return kFeatureDim; }

  bool all_finite() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

double euclidean_distance(const FeatureVector& a, const FeatureVector& b);

enum class EncoderKind { analytic, conv };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::analytic;
  double elevation_scale = 0.5;  ///< meters of relief that saturate the height channel
  std::optional<std::filesystem::path> weights_path;
};

/// Mean-centres the elevation channel and scales it into [-1, 1]; color
/// channels pass through.
Patch normalize_patch(const Patch& patch, const EncoderConfig& cfg);

/// Quadrant moments: for each quadrant (row-major), each channel (r, g, b, h),
/// emit (mean, population std). Requires an even patch size.
FeatureVector encode_analytic(const Patch& patch, const EncoderConfig& cfg);

// ─── Convolutional encoder ──────────────────────────────────────────────────

/// channels x height x width, planar.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// 3x3 kernel bank, layout (out, in, 3, 3), plus one bias per output channel.
struct ConvStage {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<float> kernel;
  std::vector<float> bias;
};

/// Three stride-2 conv stages (4 -> 8 -> 16 -> 32 channels) followed by
/// global average pooling and a 32 x 32 affine projection to the latent mean.
struct ConvWeights {
  static constexpr std::array<int, 4> kChannels = {4, 8, 16, 32};
  static constexpr int kInputSize = 16;

  std::array<ConvStage, 3> stages;
  std::vector<float> proj_weight;  ///< (32 out, 32 in) row-major
  std::vector<float> proj_bias;

  /// Zero-initialised weights with the fixed architecture shapes.
  static ConvWeights zeros();
  /// Throws FormatError naming the first tensor whose shape or values are wrong.
  void validate() const;
};

/// One stage: 3x3 convolution, stride 2, zero padding 1, then ReLU.
/// Works for any input size; output is ceil(h/2) x ceil(w/2).
FeatureMap conv_stage(const FeatureMap& input, const ConvStage& stage);

FeatureVector encode_conv(const Patch& patch, const ConvWeights& weights, const EncoderConfig& cfg);

void write_weights(std::ostream& out, const ConvWeights& weights);
ConvWeights read_weights(std::istream& in);
void save_weights(const ConvWeights& weights, const std::filesystem::path& path);
ConvWeights load_weights(const std::filesystem::path& path);

/// Immutable encoder front-end; safe to share across threads.
class Encoder {
 public:
  /// Loads weights from cfg.weights_path when kind is conv.
  explicit Encoder(EncoderConfig cfg = {});
  Encoder(EncoderConfig cfg, ConvWeights weights);

  const EncoderConfig& config() const { return cfg_; }
  FeatureVector encode(const Patch& patch) const;

 private:
  EncoderConfig cfg_;
  std::optional<ConvWeights> weights_;
};

}  // namespace xptrav

#endif  // XPTRAV_ENCODER_HPP
