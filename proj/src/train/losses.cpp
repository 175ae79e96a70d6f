#include "posecast/train/losses.hpp"

#include "posecast/errors.hpp"
#include "posecast/geometry/metrics.hpp"

namespace posecast::train {

TargetBatch make_targets(std::span<const pose::SequenceSample> samples) {
  if (samples.empty()) throw ContractError("make_targets: empty batch");
  const std::size_t n = samples.size(), J = samples[0].target_pose2d.size();
  TargetBatch t{{}, nn::Tensor({n, 2 * J}, 0.0f), nn::Tensor({n, J}, 0.0f), {}};
  for (std::size_t r = 0; r < n; ++r) {
    const auto& s = samples[r];
    if (s.target_pose2d.size() != J) throw DimensionError("make_targets: mixed joint counts");
    t.actions.push_back(s.target_action);
    t.cameras.push_back(s.camera);
    for (std::size_t j = 0; j < J; ++j) {
      t.pose2d.at(r, 2 * j) = s.target_pose2d.joints[j][0];
      t.pose2d.at(r, 2 * j + 1) = s.target_pose2d.joints[j][1];
      t.mask.at(r, j) = s.target_pose2d.visible(j) ? 1.0f : 0.0f;
    }
  }
  return t;
}

nn::Var action_loss(const nn::Var& logits, std::span<const std::size_t> targets) {
  return nn::softmax_cross_entropy(logits, targets);
}

nn::Var project_centered(const nn::Var& pose3d, std::span<const pose::Camera> cameras,
                         const geometry::ProjectionOptions& options) {
  const std::size_t J = pose3d.value().cols() / 3;
  return geometry::center_batch(geometry::project_batch(pose3d, cameras, options), 2, J);
}

double weighted_total(const LossWeights& w, double action, double pose2d, double adv3d) {
  return w.action * action + w.pose2d * pose2d + w.adv3d * adv3d;
}

LossTerms generator_loss(const model::ForecastVars& out, const TargetBatch& targets, model::Critic* critic,
                         nn::Binder* critic_bind, const LossWeights& weights,
                         const geometry::ProjectionOptions& projection) {
  LossTerms t;
  t.action = action_loss(out.logits, targets.actions);
  t.pose2d = geometry::pose2d_loss_batch(project_centered(out.pose3d, targets.cameras, projection), targets.pose2d,
                                         targets.mask);
  t.action_value = t.action.value().item();
  t.pose2d_value = t.pose2d.value().item();
  if (critic) {
    if (!critic_bind) throw ContractError("generator_loss: critic given without a binder");
    t.adv3d = critic->generator_term(*critic_bind, out.pose3d);
    t.adv3d_value = t.adv3d.value().item();
  }
  std::vector<nn::Var> parts;
  if (weights.action > 0.0) parts.push_back(nn::scale(t.action, static_cast<float>(weights.action)));
  if (weights.pose2d > 0.0) parts.push_back(nn::scale(t.pose2d, static_cast<float>(weights.pose2d)));
  if (weights.adv3d > 0.0 && t.adv3d.valid()) parts.push_back(nn::scale(t.adv3d, static_cast<float>(weights.adv3d)));
  if (parts.empty()) throw ContractError("generator_loss: every loss weight is zero");
  t.total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) t.total = nn::add(t.total, parts[i]);
  t.total_value = t.total.value().item();
  return t;
}

}  // namespace posecast::train
