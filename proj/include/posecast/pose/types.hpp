#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "posecast/pose/layout.hpp"

namespace posecast::pose {

using Vec2 = std::array<float, 2>;
using Vec3 = std::array<float, 3>;

// Pixel coordinates, origin top-left, x right, y down. Confidence 0 marks an
// occluded joint.
struct Skeleton2D {
  std::vector<Vec2> joints;
  std::vector<float> confidence;

  Skeleton2D() = default;
  explicit Skeleton2D(std::size_t num_joints) : joints(num_joints, Vec2{0, 0}), confidence(num_joints, 1.0f) {}

  std::size_t size() const { return joints.size(); }
  bool visible(std::size_t j) const { return confidence[j] > 0.0f; }
  // Row-major [x0, y0, x1, y1, ...]
  std::vector<float> flat() const;
  static Skeleton2D from_flat(const std::vector<float>& xy, float confidence = 1.0f);
};

// Millimeters in camera-frame axes (x right, y down, z forward).
struct Skeleton3D {
  std::vector<Vec3> joints;

  Skeleton3D() = default;
  explicit Skeleton3D(std::size_t num_joints) : joints(num_joints, Vec3{0, 0, 0}) {}

  std::size_t size() const { return joints.size(); }
  std::vector<float> flat() const;
  static Skeleton3D from_flat(const std::vector<float>& xyz);
};

// Pinhole camera, zero skew. Extrinsics map skeleton coordinates (mm) into the
// camera frame: p_cam = R * y + t.
struct Camera {
  double fx = 1000.0, fy = 1000.0, cx = 0.0, cy = 0.0;
  std::array<double, 9> R = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  std::array<double, 3> t = {0, 0, 0};

  // R orthonormal within 1e-6, det(R) = +1, fx, fy > 0; ValidationError otherwise.
  void validate() const;
  std::array<double, 3> to_camera(const Vec3& y) const;
  friend bool operator==(const Camera&, const Camera&) = default;
};

// Rotation matrix (row-major) from yaw about y, then pitch about x, then roll about z; radians.
std::array<double, 9> rotation_from_euler(double yaw, double pitch, double roll);

std::vector<float> one_hot(std::size_t index, std::size_t vocab_size);
// Sum of one-hot vectors; used for object sets.
std::vector<float> multi_hot(const std::vector<std::size_t>& indices, std::size_t vocab_size);

Skeleton2D center_at_neck(const Skeleton2D& pose, std::size_t neck = kNeck);
Skeleton3D center_at_neck(const Skeleton3D& pose, std::size_t neck = kNeck);

struct HistoryStep {
  Skeleton2D pose;
  std::size_t action = 0;
};

// One training/evaluation window: N observed steps and the step that follows.
// Objects are the sequence's initial object set, re-used for every step.
struct SequenceSample {
  std::vector<HistoryStep> history;
  std::vector<std::size_t> objects;
  std::size_t target_action = 0;
  Skeleton2D target_pose2d;
  Camera camera;
  std::string sequence_id;
  std::size_t step_index = 0;  // index of the target step within its sequence
};

}  // namespace posecast::pose
