#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <vector>

#include "posecast/data/dataset.hpp"
#include "posecast/model/critic.hpp"
#include "posecast/model/forecaster.hpp"
#include "posecast/nn/adam.hpp"
#include "posecast/train/config.hpp"
#include "posecast/train/losses.hpp"

namespace posecast::train {

struct TrainData {
  std::vector<pose::SequenceSample> train;
  std::vector<pose::SequenceSample> val;
  std::vector<pose::Skeleton3D> pose_db;  // neck-centered, mm
  pose::JointLayout layout = pose::JointLayout::upper_body();
  std::vector<std::string> action_names;
};

// Train/val windows, the neck-centered 3D database and the vocabulary of a manifest.
TrainData load_train_data(const data::DatasetManifest& manifest, std::size_t history);

// One-step-ahead metrics with zero noise.
struct WindowMetrics {
  double mpjpe_px = 0.0;
  double top1 = 0.0;
  double top3 = 0.0;
  double symmetry_mm = 0.0;
  std::vector<pose::Skeleton3D> poses;
};

WindowMetrics evaluate_windows(model::Forecaster& generator, std::span<const pose::SequenceSample> samples,
                               const pose::JointLayout& layout, const geometry::ProjectionOptions& projection,
                               std::size_t batch = 512);

struct StepStats {
  double action = 0.0, pose2d = 0.0, total = 0.0;
  std::optional<double> adv3d, critic, gp;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double action = 0.0, pose2d = 0.0, total = 0.0;
  std::optional<double> adv3d, critic;
  double val_mpjpe = 0.0, val_top1 = 0.0, val_top3 = 0.0, symmetry_mm = 0.0;
  std::optional<double> critic_gap;  // mean score(real) - mean score(val predictions)
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path critic_checkpoint;  // empty without adversarial loss
  std::filesystem::path fake_pool;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_mpjpe = 0.0;
  bool stopped_early = false;
};

// Alternating critic / generator optimization. Writes into out_dir:
// metrics.jsonl (one line per optimizer step after a header line),
// epochs.jsonl, generator_best.ckpt, generator_last.ckpt(.adam),
// critic_last.ckpt(.adam), fake_pool.p3db and config.json.
class Trainer {
 public:
  Trainer(TrainConfig config, TrainData data, std::filesystem::path out_dir);

  TrainResult run();

  // A single optimizer step on explicit samples (no logging).
  StepStats step(std::span<const pose::SequenceSample> batch);

  model::Forecaster& generator() { return generator_; }
  model::Critic* critic() { return critic_ ? critic_.get() : nullptr; }
  const TrainConfig& config() const { return config_; }
  const std::vector<pose::Skeleton3D>& fake_pool() const { return fake_pool_; }

 private:
  StepStats micro_step(std::span<const pose::SequenceSample> batch, float loss_scale);
  double critic_step(const nn::Tensor& fake, double* gp);
  void add_to_pool(const nn::Tensor& fakes);
  void save_last(std::size_t epoch);
  nlohmann::json checkpoint_meta(std::size_t epoch) const;

  TrainConfig config_;
  TrainData data_;
  std::filesystem::path out_dir_;
  geometry::ProjectionOptions projection_;
  model::Forecaster generator_;
  std::unique_ptr<model::Critic> critic_;
  nn::Adam gen_opt_;
  nn::Adam critic_opt_;
  nn::Rng shuffle_rng_, noise_rng_, critic_rng_, pool_rng_;
  std::vector<pose::Skeleton3D> fake_pool_;
  std::uint64_t pool_seen_ = 0;
  std::uint64_t step_ = 0;
  std::string last_good_;
};

}  // namespace posecast::train
