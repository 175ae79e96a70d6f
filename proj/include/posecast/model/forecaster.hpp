#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/nn/layers.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::model {

struct ForecasterConfig {
  std::size_t history = 3;  // N
  std::size_t joints = pose::kNumJoints;
  std::size_t num_actions = 0;
  std::size_t num_objects = 0;
  std::size_t latent_dim = 512;
  std::size_t hidden_dim = 512;
  std::size_t noise_dim = 32;
  float leaky_slope = nn::kDefaultLeakySlope;
  // Pixel inputs are multiplied by input_scale; decoder outputs by pose_scale_mm.
  float input_scale = 0.01f;
  float pose_scale_mm = 100.0f;

  void validate() const;
  friend bool operator==(const ForecasterConfig&, const ForecasterConfig&) = default;
};

void to_json(nlohmann::json& j, const ForecasterConfig& c);
void from_json(const nlohmann::json& j, ForecasterConfig& c);

// Dense inputs for a batch of windows.
struct ForecastInputs {
  nn::Tensor poses;    // [n, N*J*2], neck-centered pixels (unscaled)
  nn::Tensor actions;  // [n, N*N_a], one-hot per step
  nn::Tensor objects;  // [n, N_o], multi-hot; empty when N_o = 0
  std::size_t rows() const { return poses.rows(); }
};

ForecastInputs make_inputs(const ForecasterConfig& config, std::span<const pose::SequenceSample> samples);

struct ForecastVars {
  nn::Var logits;  // [n, N_a]
  nn::Var pose3d;  // [n, 3J] mm, neck at the origin
};

struct ForecasterOutput {
  std::vector<float> action_logits;
  pose::Skeleton3D pose3d;
};

class Forecaster {
 public:
  Forecaster() = default;
  Forecaster(const ForecasterConfig& config, std::uint64_t seed);

  const ForecasterConfig& config() const { return config_; }

  nn::Var encode_pose_history(nn::Binder& bind, const nn::Var& poses);
  nn::Var encode_labels(nn::Binder& bind, const nn::Var& actions, const nn::Var& objects);
  nn::Var fuse(nn::Binder& bind, const ForecastInputs& inputs, const nn::Tensor& noise);
  // noise is [n, noise_dim] (ignored when noise_dim = 0).
  ForecastVars forward(nn::Binder& bind, const ForecastInputs& inputs, const nn::Tensor& noise);

  // Single-sample convenience on a private tape; empty noise means zeros.
  ForecasterOutput predict(const pose::SequenceSample& sample, const std::vector<float>& noise);

  std::vector<nn::Parameter*> parameters();
  // Named groups: pose_encoder, action_encoder, object_encoder, fusion, action_decoder, pose_decoder.
  std::vector<std::pair<std::string, std::vector<nn::Parameter*>>> parameter_groups();

  nlohmann::json metadata() const;
  void save(const std::string& path, nlohmann::json extra = nlohmann::json::object());
  static Forecaster load(const std::string& path);

 private:
  ForecasterConfig config_;
  nn::LinearLayer pose_in_;
  std::vector<nn::ResidualBlock> pose_blocks_;
  nn::Mlp action_encoder_;
  nn::Mlp object_encoder_;
  nn::Mlp fusion_;
  nn::Mlp action_decoder_;
  nn::Mlp pose_decoder_;
};

}  // namespace posecast::model
