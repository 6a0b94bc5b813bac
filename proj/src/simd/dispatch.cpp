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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "xptrav/simd/kernels.hpp"

namespace xptrav::simd {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return has;
#else
  return false;
#endif
}

const Kernels* table_for(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return &scalar_kernels();
    case Backend::avx2:
      return cpu_has_avx2() ? detail::avx2_kernels() : nullptr;
    case Backend::neon:
      return detail::neon_kernels();  // baseline on aarch64
  }
  return nullptr;
}

Backend initial_backend() {
  if (const char* env = std::getenv("XPTRAV_SIMD"); env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return Backend::scalar;
  }
  const auto all = available_backends();
  return all.back();
}

struct State {
  std::atomic<Backend> backend{initial_backend()};
};

State& state() {
  static State s;
  return s;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::scalar};
  for (Backend b : {Backend::neon, Backend::avx2}) {
    if (table_for(b) != nullptr) out.push_back(b);
  }
  return out;
}

const Kernels& kernels_for(Backend backend) {
  const Kernels* table = table_for(backend);
  if (table == nullptr) {
    throw std::invalid_argument("simd backend not available: " + std::string(backend_name(backend)));
  }
  return *table;
}

const Kernels& active() { return kernels_for(state().backend.load(std::memory_order_relaxed)); }

Backend active_backend() { return state().backend.load(std::memory_order_relaxed); }

void set_active_backend(Backend backend) {
  kernels_for(backend);  // validates
  state().backend.store(backend, std::memory_order_relaxed);
}

}  // namespace xptrav::simd
