#pragma once

#include <vector>

#include "posecast/nn/layers.hpp"
#include "posecast/pose/layout.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::eval {

struct QualityOptions {
  std::vector<std::size_t> hidden = {64, 64};  // three linear layers in total
  float leaky_slope = nn::kDefaultLeakySlope;
  float lr = 1e-3f;
  std::size_t epochs = 30;
  std::size_t batch = 128;
  double train_fraction = 0.8;
  float input_scale = 0.002f;
};

// Neck-centered joints and bone lengths, both scaled by input_scale.
std::vector<float> quality_features(const pose::Skeleton3D& pose, const pose::JointLayout& layout, float input_scale);

// Binary real-vs-generated classifier; trained once, then reused to score any
// number of generated pools.
class QualityClassifier {
 public:
  QualityClassifier(const pose::JointLayout& layout, QualityOptions options = {});

  void fit(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake, std::uint64_t seed);
  // Fraction of poses labelled correctly (real as real, fake as fake).
  double accuracy(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake);
  bool predicts_real(const pose::Skeleton3D& pose);

 private:
  nn::Tensor features(const std::vector<const pose::Skeleton3D*>& poses) const;

  pose::JointLayout layout_;
  QualityOptions options_;
  nn::Mlp net_;
};

// Pools split 80/20 along one shared index permutation, classifier trained on
// the first part, 1 - held-out accuracy returned. ContractError when a pool
// is too small to leave held-out poses.
double quality_metric(const std::vector<pose::Skeleton3D>& real, const std::vector<pose::Skeleton3D>& fake,
                      std::uint64_t seed, const QualityOptions& options = {});

// Shared split used by quality_metric: returns (train, held_out) of a pool.
std::pair<std::vector<pose::Skeleton3D>, std::vector<pose::Skeleton3D>> split_pool(
    const std::vector<pose::Skeleton3D>& pool, const std::vector<std::size_t>& permutation, double train_fraction);

std::vector<std::size_t> shared_permutation(std::size_t size, std::uint64_t seed);

}  // namespace posecast::eval
