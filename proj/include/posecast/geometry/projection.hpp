#pragma once

#include <span>

#include "posecast/nn/tape.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::geometry {

enum class ProjectionMode {
  // p = K (R y + t), pixel = (p_x / p_z, p_y / p_z)
  kPerspective,
  // Literal K (R y + t) without the homogeneous divide; kept for ablations.
  kAffine,
};

struct ProjectionOptions {
  ProjectionMode mode = ProjectionMode::kPerspective;
  double z_min = 1.0;  // mm
  // Training only: replace depth by z_min + s*softplus((z - z_min)/s) with s = z_min
  // instead of failing, so gradients stay finite for degenerate predictions.
  bool soft_clamp = false;
};

ProjectionMode parse_projection_mode(const std::string& name);
std::string to_string(ProjectionMode mode);

// Throws ProjectionError naming the first joint with depth <= z_min (unless soft_clamp).
pose::Skeleton2D project(const pose::Skeleton3D& pose, const pose::Camera& camera, const ProjectionOptions& options = {});

// Differentiable batch projection: poses [n, 3J] in mm, one camera per row;
// returns pixels [n, 2J].
nn::Var project_batch(const nn::Var& poses, std::span<const pose::Camera> cameras,
                      const ProjectionOptions& options = {});

// Inverse of perspective projection for a pixel whose camera-frame depth is known.
pose::Vec3 unproject(const pose::Vec2& pixel, double depth, const pose::Camera& camera);

// Subtracts the neck joint from every joint of a flattened [n, dims*J] batch.
nn::Var center_batch(const nn::Var& flat, std::size_t dims, std::size_t num_joints, std::size_t neck = pose::kNeck);

}  // namespace posecast::geometry
