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

#include "xptrav/simd/kernels.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#include <arm_neon.h>

#include <algorithm>

namespace xptrav::simd::detail {
namespace {

double sum_neon(const float* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(v)));
    acc1 = vaddq_f64(acc1, vcvt_high_f64_f32(v));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

double sum_sq_dev_neon(const float* x, std::size_t n, double mean) {
  const float64x2_t m = vdupq_n_f64(mean);
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    const float64x2_t d0 = vsubq_f64(vcvt_f64_f32(vget_low_f32(v)), m);
    const float64x2_t d1 = vsubq_f64(vcvt_high_f64_f32(v), m);
    acc0 = vaddq_f64(acc0, vmulq_f64(d0, d0));
    acc1 = vaddq_f64(acc1, vmulq_f64(d1, d1));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean;
    acc += d * d;
  }
  return acc;
}

void max_inplace_neon(float* dst, const float* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t a = vld1q_f32(dst + i);
    const float32x4_t b = vld1q_f32(src + i);
    // vmaxq_f32 propagates NaN; keep dst where src is NaN like std::max.
    const uint32x4_t take_src = vcgtq_f32(b, a);
    vst1q_f32(dst + i, vbslq_f32(take_src, b, a));
  }
  for (; i < n; ++i) dst[i] = std::max(dst[i], src[i]);
}

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = vaddq_f32(acc, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
  }
  float sum = vaddvq_f32(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

constexpr Kernels kNeon{&sum_neon, &sum_sq_dev_neon, &max_inplace_neon, &dot_neon};

}  // namespace

const Kernels* neon_kernels() { return &kNeon; }

}  // namespace xptrav::simd::detail

#else

namespace xptrav::simd::detail {
const Kernels* neon_kernels() { return nullptr; }
}  // namespace xptrav::simd::detail

#endif
