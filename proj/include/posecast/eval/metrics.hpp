#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "posecast/data/dataset.hpp"
#include "posecast/rollout/rollout.hpp"

namespace posecast::eval {

// Logits per sequence, per step.
using LogitSequences = std::vector<std::vector<std::vector<float>>>;
using LabelSequences = std::vector<std::vector<std::size_t>>;

// Number of entries ranked above `target`; equal scores rank the lower index first.
std::size_t rank_of(std::span<const float> scores, std::size_t target);

// Per sequence: fraction of steps whose label is among the k best scores;
// then the mean over sequences. ContractError when k exceeds the vocabulary.
double topk_accuracy(const LogitSequences& logits, const LabelSequences& labels, std::size_t k);

// Accuracy at each step index over the sequences long enough to have it.
std::vector<double> per_step_accuracy(const LogitSequences& logits, const LabelSequences& labels, std::size_t k = 1);

// --- pose baselines (neck-centered pixels) ---
std::vector<pose::Skeleton2D> zero_velocity_baseline(const pose::Skeleton2D& last_observed, std::size_t steps);
// Per-joint mean of the visible target poses of the training windows.
pose::Skeleton2D train_average_pose(std::span<const pose::SequenceSample> train);

// --- action baselines, expressed as scores so they rank like logits ---
// The most recent history label first, then earlier distinct labels, then the rest by index.
std::vector<float> repeat_last_scores(std::span<const std::size_t> history_actions, std::size_t num_actions);
// Frequency of every label over all steps of the training sequences.
std::vector<std::size_t> action_counts(const std::vector<data::Sequence>& train, std::size_t num_actions);
// Ranks labels by training frequency (ties: lower index first).
std::vector<float> most_common_scores(std::span<const std::size_t> counts);

// Evaluation of a rollout file against the ground truth of its split.
struct EvalInputs {
  std::vector<rollout::RolloutTask> tasks;         // aligned with records
  std::vector<rollout::RolloutRecord> records;
  std::vector<pose::SequenceSample> train_windows;  // for the train-average baseline
  std::vector<std::size_t> train_counts;            // for the most-common baseline
  std::size_t num_actions = 0;
};

// Pairs every record with its task via (sequence_id, start_step).
EvalInputs align(const rollout::RolloutFile& file, const std::vector<data::Sequence>& sequences,
                 const std::vector<data::Sequence>& train, std::size_t num_actions);

struct BaselineReport {
  double zero_velocity_mpjpe = 0.0;
  double train_average_mpjpe = 0.0;
  double repeat_last_top1 = 0.0, repeat_last_top3 = 0.0;
  double most_common_top1 = 0.0, most_common_top3 = 0.0;
};

struct EvalReport {
  double mpjpe_px = 0.0;
  std::optional<double> quality;
  double top1 = 0.0;
  double top3 = 0.0;
  double symmetry_mm = 0.0;
  std::vector<double> per_step_accuracy;
  std::vector<double> per_step_top3;
  std::size_t rollouts = 0;
  std::size_t truncated = 0;
  BaselineReport baselines;
};

EvalReport evaluate(const EvalInputs& inputs, const pose::JointLayout& layout);

nlohmann::json to_json(const EvalReport& report);
void write_report(const std::filesystem::path& path, const EvalReport& report);
// "step,top1,top3" with steps numbered from 1.
void write_accuracy_curve(const std::filesystem::path& path, const EvalReport& report);

}  // namespace posecast::eval
