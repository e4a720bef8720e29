/*
Copyright 2026 The mmpipe Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

// Portable pseudorandom generation. The algorithms are fixed so that every
// platform produces identical shuffles:
//   - SplitMix64 (Steele, Lea, Flood) expands a 64-bit seed into state words.
//   - xoshiro256** 1.0 (Blackman, Vigna) is the stream generator.
//   - bounded(n) uses Lemire's multiply-shift with rejection (unbiased).
// std::mt19937_64 would be portable too, but std::uniform_int_distribution
// is not, so the bounded draw is spelled out here.

#include <array>
#include <cstdint>
#include <span>

namespace mmpipe {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  /// Seeds the four state words with consecutive SplitMix64 outputs.
  explicit Xoshiro256ss(std::uint64_t seed);
  explicit Xoshiro256ss(const std::array<std::uint64_t, 4>& state) : s_(state) {}

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n);

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

 private:
  std::array<std::uint64_t, 4> s_;
};

/// Descending Fisher-Yates over `order`, j = bounded(i + 1) for i = n-1 .. 1.
template <typename T>
void fisher_yates(std::span<T> order, std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.bounded(i));
    using std::swap;
    swap(order[i - 1], order[j]);
  }
}

}  // namespace mmpipe
