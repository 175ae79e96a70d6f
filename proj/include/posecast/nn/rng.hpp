#pragma once

#include <cstdint>
#include <random>

#include "posecast/nn/tensor.hpp"

namespace posecast::nn {

// Seeded generator with independent named streams, so that e.g. data
// shuffling and noise sampling do not perturb each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  // Deterministic child stream; same (seed, stream) always yields the same sequence.
  Rng fork(std::uint64_t stream) const { return Rng(mix(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))); }

  float normal() { return normal_(engine_); }
  float uniform(float lo = 0.0f, float hi = 1.0f) {
    return lo + (hi - lo) * std::uniform_real_distribution<float>(0.0f, 1.0f)(engine_);
  }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::uint64_t next() { return engine_(); }

  Tensor normal_tensor(Shape shape, float stddev = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = stddev * normal();
    return t;
  }
  Tensor uniform_tensor(Shape shape, float lo, float hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = uniform(lo, hi);
    return t;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<float> normal_{0.0f, 1.0f};
};

}  // namespace posecast::nn
