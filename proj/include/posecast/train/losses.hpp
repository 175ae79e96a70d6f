#pragma once

#include <optional>
#include <span>
#include <vector>

#include "posecast/geometry/projection.hpp"
#include "posecast/model/critic.hpp"
#include "posecast/model/forecaster.hpp"
#include "posecast/train/config.hpp"

namespace posecast::train {

struct TargetBatch {
  std::vector<std::size_t> actions;
  nn::Tensor pose2d;  // [n, 2J], neck-centered pixels
  nn::Tensor mask;    // [n, J], 1 where target confidence > 0
  std::vector<pose::Camera> cameras;
};

TargetBatch make_targets(std::span<const pose::SequenceSample> samples);

// Mean softmax cross-entropy; VocabularyError for out-of-range targets.
nn::Var action_loss(const nn::Var& logits, std::span<const std::size_t> targets);

// Projects [n, 3J] poses with per-row cameras and re-centers the result at the neck.
nn::Var project_centered(const nn::Var& pose3d, std::span<const pose::Camera> cameras,
                         const geometry::ProjectionOptions& options);

struct LossTerms {
  nn::Var total;
  nn::Var action;
  nn::Var pose2d;
  nn::Var adv3d;  // invalid when no critic is given
  double action_value = 0.0;
  double pose2d_value = 0.0;
  std::optional<double> adv3d_value;
  double total_value = 0.0;
};

double weighted_total(const LossWeights& w, double action, double pose2d, double adv3d);

// lambda_action * CE + lambda_pose2d * L_pose2d + lambda_adv3d * L_adv3d.
// Terms with zero weight are still computed for logging but stay out of the
// differentiated total. `critic_bind` must be a frozen binder on the same tape.
LossTerms generator_loss(const model::ForecastVars& out, const TargetBatch& targets, model::Critic* critic,
                         nn::Binder* critic_bind, const LossWeights& weights,
                         const geometry::ProjectionOptions& projection);

}  // namespace posecast::train
