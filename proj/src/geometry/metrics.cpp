#include "posecast/geometry/metrics.hpp"

#include <cmath>

#include "posecast/errors.hpp"
#include "posecast/geometry/kinematics.hpp"
#include "posecast/nn/ops.hpp"

namespace posecast::geometry {

double pose2d_loss(const pose::Skeleton2D& pred, const pose::Skeleton2D& target) {
  if (pred.size() != target.size()) {
    throw DimensionError("pose2d_loss: " + std::to_string(pred.size()) + " vs " + std::to_string(target.size()) +
                         " joints");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (!target.visible(j)) continue;
    const double dx = static_cast<double>(pred.joints[j][0]) - target.joints[j][0];
    const double dy = static_cast<double>(pred.joints[j][1]) - target.joints[j][1];
    sum += dx * dx + dy * dy;
    ++count;
  }
  if (count == 0) throw LossUndefinedError("pose2d_loss: every target joint is masked");
  return sum / static_cast<double>(count);
}

nn::Var pose2d_loss_batch(const nn::Var& pred, const nn::Tensor& target, const nn::Tensor& mask) {
  nn::require_same_shape(pred.value(), target, "pose2d_loss_batch");
  const std::size_t n = target.rows(), joints = mask.cols();
  if (mask.rows() != n || target.cols() != 2 * joints) {
    throw DimensionError("pose2d_loss_batch: mask " + nn::shape_string(mask.shape()) + " vs target " +
                         nn::shape_string(target.shape()));
  }
  nn::Tensor weights(target.shape(), 0.0f);
  std::size_t used = 0;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t visible = 0;
    for (std::size_t j = 0; j < joints; ++j) visible += mask.at(r, j) > 0.0f;
    if (visible) ++used;
  }
  if (used == 0) throw LossUndefinedError("pose2d_loss: every target joint in the batch is masked");
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t visible = 0;
    for (std::size_t j = 0; j < joints; ++j) visible += mask.at(r, j) > 0.0f;
    if (!visible) continue;
    const float w = 1.0f / static_cast<float>(visible * used);
    for (std::size_t j = 0; j < joints; ++j) {
      if (mask.at(r, j) > 0.0f) weights.at(r, 2 * j) = weights.at(r, 2 * j + 1) = w;
    }
  }
  nn::Tape& tape = pred.tape();
  nn::Var diff = nn::sub(pred, tape.constant(target));
  return nn::sum_all(nn::mul(nn::mul(diff, diff), tape.constant(std::move(weights))));
}

double mpjpe_2d(const std::vector<pose::Skeleton2D>& pred, const std::vector<pose::Skeleton2D>& target) {
  if (pred.empty()) throw ContractError("mpjpe_2d: empty sequence");
  if (pred.size() != target.size()) {
    throw ContractError("mpjpe_2d: " + std::to_string(pred.size()) + " predicted vs " +
                        std::to_string(target.size()) + " target steps");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != target[s].size()) throw DimensionError("mpjpe_2d: joint count mismatch");
    for (std::size_t j = 0; j < target[s].size(); ++j) {
      if (!target[s].visible(j)) continue;
      const double dx = static_cast<double>(pred[s].joints[j][0]) - target[s].joints[j][0];
      const double dy = static_cast<double>(pred[s].joints[j][1]) - target[s].joints[j][1];
      sum += std::sqrt(dx * dx + dy * dy);
      ++count;
    }
  }
  if (count == 0) throw LossUndefinedError("mpjpe_2d: every target joint is masked");
  return sum / static_cast<double>(count);
}

double symmetry_error(const pose::Skeleton3D& pose, const pose::JointLayout& layout) {
  const auto pairs = layout.mirrored_bones();
  if (pairs.empty()) return 0.0;
  const auto lengths = bone_lengths(pose, layout);
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += std::abs(lengths[a] - lengths[b]);
  return sum / static_cast<double>(pairs.size());
}

}  // namespace posecast::geometry
