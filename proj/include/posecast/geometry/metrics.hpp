#pragma once

#include <vector>

#include "posecast/nn/tape.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::geometry {

// Mean squared pixel distance over joints visible in `target` (confidence > 0).
// Throws LossUndefinedError when every joint is masked.
double pose2d_loss(const pose::Skeleton2D& pred, const pose::Skeleton2D& target);

// Batched form on the tape. pred and target are [n, 2J]; mask is [n, J] with
// 1 for visible joints. Each sample is normalized by its own visible-joint
// count, then samples are averaged; fully masked samples are skipped.
nn::Var pose2d_loss_batch(const nn::Var& pred, const nn::Tensor& target, const nn::Tensor& mask);

// Mean Euclidean pixel distance over steps and visible target joints.
double mpjpe_2d(const std::vector<pose::Skeleton2D>& pred, const std::vector<pose::Skeleton2D>& target);

// Mean |len(bone) - len(mirror bone)| over mirrored bone pairs, in mm.
double symmetry_error(const pose::Skeleton3D& pose, const pose::JointLayout& layout);

}  // namespace posecast::geometry
