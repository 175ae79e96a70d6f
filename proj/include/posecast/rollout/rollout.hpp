#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "posecast/data/dataset.hpp"
#include "posecast/geometry/projection.hpp"
#include "posecast/model/forecaster.hpp"
#include "posecast/nn/rng.hpp"

namespace posecast::rollout {

enum class NoisePolicy { kFixedZero, kResample };

NoisePolicy parse_noise_policy(const std::string& name);  // "zero" | "resample"
std::string to_string(NoisePolicy policy);

struct RolloutOptions {
  std::size_t steps = 5;  // M
  NoisePolicy noise = NoisePolicy::kResample;
  bool sample_actions = false;
  float temperature = 1.0f;
  geometry::ProjectionOptions projection;  // hard depth check by default
};

struct RolloutStep {
  std::size_t action = 0;
  std::vector<float> logits;
  pose::Skeleton3D pose3d;  // mm, neck at the origin
  pose::Skeleton2D pose2d;  // pixels, neck-centered
};

struct RolloutRecord {
  std::string sequence_id;
  std::size_t start_step = 0;  // index of the first predicted step within the sequence
  std::vector<RolloutStep> steps;
  std::optional<std::string> error;  // set when the rollout stopped early
  std::optional<std::size_t> error_step;
};

// Index of the largest logit; the lowest index wins ties.
std::size_t argmax(std::span<const float> logits);

// Autoregressive prediction of options.steps steps. Each predicted pose is
// projected with the sample's camera, neck-centered and pushed into the
// sliding window with the chosen action; objects stay fixed. A projection
// failure ends the rollout with an annotated error.
RolloutRecord rollout(model::Forecaster& model, const pose::SequenceSample& initial, const RolloutOptions& options,
                      nn::Rng& rng);

// Ground-truth continuation for one start position.
struct RolloutTask {
  pose::SequenceSample initial;  // history = the N steps before start_step
  std::size_t start_step = 0;
  std::vector<std::size_t> gt_actions;
  std::vector<pose::Skeleton2D> gt_poses;
};

// Every start with N observed steps before it and M steps after it.
std::vector<RolloutTask> rollout_tasks(const data::Sequence& sequence, std::size_t history, std::size_t steps);

// Predictions equal to the ground truth (one-hot logits); used to check evaluation plumbing.
RolloutRecord ground_truth_record(const RolloutTask& task, std::size_t num_actions);

struct RolloutFile {
  std::string split;
  std::size_t history = 0;
  std::size_t steps = 0;
  std::vector<std::string> action_names;
  std::vector<RolloutRecord> records;
};

nlohmann::json to_json(const RolloutFile& file);
RolloutFile rollouts_from_json(const nlohmann::json& j);
void write_rollouts(const std::filesystem::path& path, const RolloutFile& file);
RolloutFile read_rollouts(const std::filesystem::path& path);

}  // namespace posecast::rollout
