#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/nn/layers.hpp"
#include "posecast/pose/layout.hpp"

namespace posecast::model {

// How the critic is kept (approximately) 1-Lipschitz.
struct Lipschitz {
  enum class Kind { kGradientPenalty, kClip } kind = Kind::kGradientPenalty;
  float value = 10.0f;  // penalty weight, or the clip bound

  // "gp", "gp:<weight>" or "clip:<bound>"
  static Lipschitz parse(const std::string& text);
  std::string to_string() const;
};

struct CriticConfig {
  std::vector<std::size_t> joint_widths = {256, 256, 256, 256};  // 4 layers
  std::vector<std::size_t> kinematic_widths = {256, 256, 256};   // 3 layers over the psi upper triangle
  std::vector<std::size_t> merge_widths = {256, 1};              // 2 layers to the score
  Lipschitz lipschitz;
  float leaky_slope = nn::kDefaultLeakySlope;
  float input_scale = 0.002f;  // mm -> network units

  void validate() const;
};

void to_json(nlohmann::json& j, const CriticConfig& c);
void from_json(const nlohmann::json& j, CriticConfig& c);

struct CriticLosses {
  nn::Var loss;          // mean(fake) - mean(real) + weight * gp
  nn::Var penalty;       // gp before weighting (zero tensor in clip mode)
  double mean_real = 0.0;
  double mean_fake = 0.0;
};

// mean(fake) - mean(real) on [n, 1] score columns.
nn::Var wasserstein_critic_loss(const nn::Var& real_scores, const nn::Var& fake_scores);
// -mean(fake)
nn::Var wasserstein_generator_term(const nn::Var& fake_scores);

class Critic {
 public:
  Critic() = default;
  Critic(const CriticConfig& config, const pose::JointLayout& layout, std::uint64_t seed);

  const CriticConfig& config() const { return config_; }

  // poses [n, 3J] in mm, neck-centered; returns [n, 1]. Higher means more real.
  nn::Var score(nn::Binder& bind, const nn::Var& poses);
  // Same, on input already multiplied by input_scale.
  nn::Var score_normalized(nn::Binder& bind, const nn::Var& x);

  // Critic objective on detached pose batches. `bind` must be trainable for
  // the critic update. Interpolation weights are drawn from rng.
  CriticLosses critic_losses(nn::Binder& bind, const nn::Tensor& real, const nn::Tensor& fake, nn::Rng& rng);
  // (||d score / d x|| - 1)^2 averaged over rows, x in normalized units.
  nn::Var gradient_penalty(nn::Binder& bind, const nn::Tensor& x_normalized);
  // -mean(score(fake)); gradients reach the generator through `fake` only
  // when `bind` is frozen.
  nn::Var generator_term(nn::Binder& bind, const nn::Var& fake);

  // Clamp every parameter to [-bound, bound] (clip mode).
  void clip_parameters();

  std::vector<nn::Parameter*> parameters();
  void save(const std::string& path, nlohmann::json extra = nlohmann::json::object());
  static Critic load(const std::string& path, const pose::JointLayout& layout);

 private:
  CriticConfig config_;
  pose::JointLayout layout_;
  nn::Mlp joint_branch_;
  nn::Mlp kinematic_branch_;
  nn::Mlp merge_;
};

}  // namespace posecast::model
