#include "posecast/geometry/kinematics.hpp"

#include <cmath>

#include "posecast/errors.hpp"
#include "posecast/nn/ops.hpp"

namespace posecast::geometry {

KinematicStats kinematic_stats(const pose::Skeleton3D& pose, const pose::JointLayout& layout) {
  if (pose.size() != layout.size()) {
    throw DimensionError("kinematic_stats: pose has " + std::to_string(pose.size()) + " joints, layout " +
                         std::to_string(layout.size()));
  }
  const auto& bones = layout.bones();
  KinematicStats s;
  s.bone_matrix.resize(3, static_cast<Eigen::Index>(bones.size()));
  for (std::size_t i = 0; i < bones.size(); ++i) {
    const auto& c = pose.joints[bones[i].child];
    const auto& p = pose.joints[bones[i].parent];
    for (int k = 0; k < 3; ++k) {
      s.bone_matrix(k, static_cast<Eigen::Index>(i)) = static_cast<double>(c[k]) - static_cast<double>(p[k]);
    }
  }
  s.psi = s.bone_matrix.transpose() * s.bone_matrix;
  return s;
}

std::vector<double> bone_lengths(const pose::Skeleton3D& pose, const pose::JointLayout& layout) {
  std::vector<double> out;
  out.reserve(layout.bones().size());
  for (const auto& b : layout.bones()) {
    double sq = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = static_cast<double>(pose.joints[b.child][k]) - pose.joints[b.parent][k];
      sq += d * d;
    }
    out.push_back(std::sqrt(sq));
  }
  return out;
}

nn::Var psi_upper_batch(const nn::Var& poses, const pose::JointLayout& layout) {
  const std::size_t joints = layout.size();
  const std::size_t nb = layout.bones().size();
  if (poses.value().cols() != 3 * joints) {
    throw DimensionError("psi_upper_batch: pose width " + std::to_string(poses.value().cols()) + " for " +
                         std::to_string(joints) + " joints");
  }
  nn::Tape& tape = poses.tape();
  // bones [n, 3B]: column 3i+k = child_k - parent_k
  nn::Tensor to_bones = nn::Tensor::matrix(3 * joints, 3 * nb);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      to_bones.at(3 * layout.bones()[i].child + k, 3 * i + k) += 1.0f;
      to_bones.at(3 * layout.bones()[i].parent + k, 3 * i + k) -= 1.0f;
    }
  }
  const std::size_t pairs = psi_upper_size(nb);
  nn::Tensor pick_a = nn::Tensor::matrix(3 * nb, 3 * pairs);
  nn::Tensor pick_b = nn::Tensor::matrix(3 * nb, 3 * pairs);
  nn::Tensor reduce = nn::Tensor::matrix(3 * pairs, pairs);
  std::size_t q = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = i; j < nb; ++j, ++q) {
      for (std::size_t k = 0; k < 3; ++k) {
        pick_a.at(3 * i + k, 3 * q + k) = 1.0f;
        pick_b.at(3 * j + k, 3 * q + k) = 1.0f;
        reduce.at(3 * q + k, q) = 1.0f;
      }
    }
  }
  nn::Var bones = nn::matmul(poses, tape.constant(std::move(to_bones)));
  nn::Var a = nn::matmul(bones, tape.constant(std::move(pick_a)));
  nn::Var b = nn::matmul(bones, tape.constant(std::move(pick_b)));
  return nn::matmul(nn::mul(a, b), tape.constant(std::move(reduce)));
}

}  // namespace posecast::geometry
