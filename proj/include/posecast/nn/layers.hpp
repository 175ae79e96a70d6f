#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "posecast/nn/ops.hpp"
#include "posecast/nn/rng.hpp"
#include "posecast/nn/tape.hpp"

namespace posecast::nn {

inline constexpr float kDefaultLeakySlope = 0.2f;

// Decides how parameters enter a tape: as trainable leaves or as constants.
// A parameter is bound at most once per Binder.
class Binder {
 public:
  Binder(Tape& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  Var operator()(Parameter& p);
  Tape& tape() { return tape_; }
  bool trainable() const { return trainable_; }

 private:
  Tape& tape_;
  bool trainable_;
  std::unordered_map<const Parameter*, Var> bound_;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  // He initialization with leaky-ReLU gain; zero bias.
  LinearLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng,
              float slope = kDefaultLeakySlope);

  Var forward(Binder& bind, const Var& x);

  std::size_t in() const { return weight.value.dim(1); }
  std::size_t out() const { return weight.value.dim(0); }
  std::size_t parameter_count() const { return weight.value.size() + bias.value.size(); }
  void collect(std::vector<Parameter*>& out);

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]
};

// y = x + second(leaky_relu(first(x)))
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t width, Rng& rng, float slope = kDefaultLeakySlope);

  Var forward(Binder& bind, const Var& x);
  void collect(std::vector<Parameter*>& out);

  LinearLayer first;
  LinearLayer second;
  float slope = kDefaultLeakySlope;
};

// Linear layers with leaky ReLU between them (and after the last one when
// activate_last is set).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng, bool activate_last,
      float slope = kDefaultLeakySlope);

  Var forward(Binder& bind, const Var& x);
  void collect(std::vector<Parameter*>& out);
  std::size_t in() const { return layers.front().in(); }
  std::size_t out() const { return layers.back().out(); }

  std::vector<LinearLayer> layers;
  bool activate_last = false;
  float slope = kDefaultLeakySlope;
};

std::size_t parameter_count(const std::vector<Parameter*>& params);
void zero_grads(const std::vector<Parameter*>& params);

}  // namespace posecast::nn
