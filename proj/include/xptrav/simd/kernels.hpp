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

#ifndef XPTRAV_SIMD_KERNELS_HPP
#define XPTRAV_SIMD_KERNELS_HPP

#include <cstddef>
#include <string_view>
#include <vector>

// Inner-loop kernels used by the encoders and the traversability sweep.
// Every kernel has a scalar reference; vector variants are picked once at
// runtime from the CPU features and must agree with the reference (exactly
// for max, within accumulation-order rounding for sums and dots).

namespace xptrav::simd {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend backend);

struct Kernels {
  /// Sum of n floats, accumulated in double.
  double (*sum)(const float* x, std::size_t n);
  /// Sum of (x[i] - mean)^2, accumulated in double.
  double (*sum_sq_dev)(const float* x, std::size_t n, double mean);
  /// dst[i] = max(dst[i], src[i]).
  void (*max_inplace)(float* dst, const float* src, std::size_t n);
  /// Single-precision dot product.
  float (*dot)(const float* a, const float* b, std::size_t n);
};

/// Reference implementations.
const Kernels& scalar_kernels();

/// Backends this binary was built with and this CPU can run.
std::vector<Backend> available_backends();

/// Kernel table for a backend; throws std::invalid_argument if unavailable.
const Kernels& kernels_for(Backend backend);

/// The process-wide active table. Defaults to the best available backend;
/// XPTRAV_SIMD=scalar in the environment forces the reference path.
const Kernels& active();
Backend active_backend();
void set_active_backend(Backend backend);

/// Restores the previous backend on scope exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) {
    set_active_backend(backend);
  }
  ~ScopedBackend() { set_active_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

namespace detail {
// Per-ISA tables, defined in their own translation units.
const Kernels* avx2_kernels();  // nullptr when not compiled in
const Kernels* neon_kernels();
}  // namespace detail

}  // namespace xptrav::simd

#endif  // XPTRAV_SIMD_KERNELS_HPP
