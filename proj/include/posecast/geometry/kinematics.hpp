#pragma once

#include <Eigen/Core>
#include <vector>

#include "posecast/nn/tape.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::geometry {

// Gram matrix of bone vectors. Column i of bone_matrix is child - parent of
// layout bone i; psi = bone_matrix^T * bone_matrix, so the diagonal holds
// squared bone lengths and off-diagonals the pairwise bone dot products.
struct KinematicStats {
  Eigen::Matrix<double, 3, Eigen::Dynamic> bone_matrix;
  Eigen::MatrixXd psi;
};

KinematicStats kinematic_stats(const pose::Skeleton3D& pose, const pose::JointLayout& layout);

std::vector<double> bone_lengths(const pose::Skeleton3D& pose, const pose::JointLayout& layout);

// Upper triangle of psi (row-major, diagonal included) for a batch of
// flattened poses [n, 3J]; returns [n, B(B+1)/2]. Built from matmuls and
// elementwise products, so it is twice differentiable.
nn::Var psi_upper_batch(const nn::Var& poses, const pose::JointLayout& layout);

inline std::size_t psi_upper_size(std::size_t bones) { return bones * (bones + 1) / 2; }

}  // namespace posecast::geometry
