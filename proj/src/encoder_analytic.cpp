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

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xptrav/encoder.hpp"
#include "xptrav/simd/kernels.hpp"

namespace xptrav {

bool FeatureVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Patch normalize_patch(const Patch& patch, const EncoderConfig& cfg) {
  if (!(cfg.elevation_scale > 0.0)) throw std::invalid_argument("elevation scale must be positive");
  Patch out = patch;
  auto h = out.plane(Channel::elevation);
  const double mean = simd::active().sum(h.data(), h.size()) / static_cast<double>(h.size());
  for (float& v : h) {
    const double z = (static_cast<double>(v) - mean) / cfg.elevation_scale;
    v = static_cast<float>(std::clamp(z, -1.0, 1.0));
  }
  return out;
}

FeatureVector encode_analytic(const Patch& patch, const EncoderConfig& cfg) {
  const int n = patch.size();
  if (n % 2 != 0) throw std::invalid_argument("analytic encoder needs an even patch size");
  const Patch norm = normalize_patch(patch, cfg);
  const simd::Kernels& k = simd::active();
  const int half = n / 2;
  const double count = static_cast<double>(half) * half;

  FeatureVector out;
  std::size_t idx = 0;
  for (int q = 0; q < 4; ++q) {
    const int row0 = (q / 2) * half;
    const int col0 = (q % 2) * half;
    for (int ch = 0; ch < kPatchChannels; ++ch) {
      const float* plane = norm.plane(static_cast<Channel>(ch)).data();
      double sum = 0.0;
      for (int i = 0; i < half; ++i) {
        sum += k.sum(plane + static_cast<std::size_t>(row0 + i) * n + col0, half);
      }
      const double mean = sum / count;
      double dev = 0.0;
      for (int i = 0; i < half; ++i) {
        dev += k.sum_sq_dev(plane + static_cast<std::size_t>(row0 + i) * n + col0, half, mean);
      }
      out[idx++] = mean;
      out[idx++] = std::sqrt(dev / count);
    }
  }
  return out;
}

}  // namespace xptrav
