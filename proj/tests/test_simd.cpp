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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "xptrav/simd/kernels.hpp"

using namespace xptrav;
using namespace xptrav::testing;

namespace {

std::vector<float> random_floats(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(uniform(rng, lo, hi));
  return v;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
  const auto backends = simd::available_backends();
  REQUIRE_FALSE(backends.empty());
  CHECK(backends.front() == simd::Backend::scalar);
  CHECK(&simd::kernels_for(simd::Backend::scalar) == &simd::scalar_kernels());
}

TEST_CASE("scoped backend restores the previous selection") {
  const auto before = simd::active_backend();
  {
    simd::ScopedBackend guard(simd::Backend::scalar);
    CHECK(simd::active_backend() == simd::Backend::scalar);
  }
  CHECK(simd::active_backend() == before);
}

TEST_CASE("every backend agrees with the scalar reference") {
  Rng rng(42);
  const simd::Kernels& ref = simd::scalar_kernels();
  for (simd::Backend b : simd::available_backends()) {
    CAPTURE(simd::backend_name(b));
    const simd::Kernels& k = simd::kernels_for(b);
    for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 36u, 64u, 144u, 1000u}) {
      CAPTURE(n);
      const auto x = random_floats(rng, n, -2.0, 2.0);
      const auto y = random_floats(rng, n, -2.0, 2.0);
      const double tol = 1e-12 * static_cast<double>(n + 1) * 4.0;
      CHECK(std::abs(k.sum(x.data(), n) - ref.sum(x.data(), n)) <= tol);
      CHECK(std::abs(k.sum_sq_dev(x.data(), n, 0.3) - ref.sum_sq_dev(x.data(), n, 0.3)) <= tol * 8);
      const float dref = ref.dot(x.data(), y.data(), n);
      CHECK(std::abs(k.dot(x.data(), y.data(), n) - dref) <= 1e-5f * static_cast<float>(n + 1));

      auto a = x;
      auto b2 = x;
      ref.max_inplace(a.data(), y.data(), n);
      k.max_inplace(b2.data(), y.data(), n);
      CHECK(a == b2);
    }
  }
}

TEST_CASE("max_inplace is exact elementwise max") {
  Rng rng(1);
  for (simd::Backend b : simd::available_backends()) {
    const auto x = random_floats(rng, 77, -1, 1);
    const auto y = random_floats(rng, 77, -1, 1);
    auto d = x;
    simd::kernels_for(b).max_inplace(d.data(), y.data(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == std::max(x[i], y[i]));
  }
}
