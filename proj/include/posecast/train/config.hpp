#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/geometry/projection.hpp"
#include "posecast/model/critic.hpp"
#include "posecast/model/forecaster.hpp"

namespace posecast::train {

struct LossWeights {
  double action = 1e6;
  double pose2d = 1.0;
  double adv3d = 1.0;
};

// Loss configurations of the ablation study: "action", "action+pose2d",
// "pose2d", "pose2d+adv3d" and "full" (paper weights for the enabled terms).
LossWeights ablation_weights(const std::string& row);
const std::vector<std::string>& ablation_rows();

// Fixed stream ids for nn::Rng::fork, so every consumer of randomness draws
// from its own sequence regardless of how much the others consume.
enum RngStream : std::uint64_t {
  kGeneratorInit = 1,
  kCriticInit = 2,
  kShuffle = 3,
  kNoise = 4,
  kCriticSampling = 5,
  kFakePool = 6,
};

struct TrainConfig {
  LossWeights weights;
  std::size_t batch = 256;
  std::size_t accumulate = 1;  // micro-batches per optimizer step
  float lr = 1e-4f;
  float weight_decay = 1e-3f;
  float critic_lr = 1e-4f;
  float critic_beta1 = 0.5f;
  float critic_beta2 = 0.9f;
  std::size_t n_critic = 1;
  std::size_t epochs = 100;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 5;
  std::size_t fake_pool_size = 5000;
  std::size_t rollout_steps = 5;
  geometry::ProjectionMode projection = geometry::ProjectionMode::kPerspective;
  bool soft_clamp = true;
  model::ForecasterConfig model;
  model::CriticConfig critic;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Strict: keys that TrainConfig does not know raise ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Named overlays on the defaults: "default", "synthetic", "paper-cooking", "paper-assembly".
nlohmann::json preset_overlay(const std::string& name);

// "a.b=value" -> j["a"]["b"] = value (parsed as JSON when possible, else a string).
void apply_override(nlohmann::json& j, const std::string& assignment);

// preset <- file <- --set overrides, as JSON (defaults not filled in).
nlohmann::json merge_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                            const std::vector<std::string>& overrides);

// defaults <- preset <- file <- --set overrides. Model vocabulary sizes are
// filled in later from the dataset manifest.
TrainConfig resolve_config(const std::optional<std::filesystem::path>& file, const std::optional<std::string>& preset,
                           const std::vector<std::string>& overrides);

}  // namespace posecast::train
