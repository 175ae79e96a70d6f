#include "posecast/pose/types.hpp"

#include <cmath>

#include "posecast/errors.hpp"

namespace posecast::pose {

std::vector<float> Skeleton2D::flat() const {
  std::vector<float> out;
  out.reserve(joints.size() * 2);
  for (const auto& j : joints) out.insert(out.end(), j.begin(), j.end());
  return out;
}

Skeleton2D Skeleton2D::from_flat(const std::vector<float>& xy, float confidence) {
  if (xy.size() % 2) throw DimensionError("Skeleton2D::from_flat: odd length");
  Skeleton2D s(xy.size() / 2);
  for (std::size_t j = 0; j < s.size(); ++j) {
    s.joints[j] = {xy[2 * j], xy[2 * j + 1]};
    s.confidence[j] = confidence;
  }
  return s;
}

std::vector<float> Skeleton3D::flat() const {
  std::vector<float> out;
  out.reserve(joints.size() * 3);
  for (const auto& j : joints) out.insert(out.end(), j.begin(), j.end());
  return out;
}

Skeleton3D Skeleton3D::from_flat(const std::vector<float>& xyz) {
  if (xyz.size() % 3) throw DimensionError("Skeleton3D::from_flat: length not a multiple of 3");
  Skeleton3D s(xyz.size() / 3);
  for (std::size_t j = 0; j < s.size(); ++j) s.joints[j] = {xyz[3 * j], xyz[3 * j + 1], xyz[3 * j + 2]};
  return s;
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += R[3 * k + i] * R[3 * k + j];
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-6) throw ValidationError("camera rotation is not orthonormal");
    }
  }
  const double det = R[0] * (R[4] * R[8] - R[5] * R[7]) - R[1] * (R[3] * R[8] - R[5] * R[6]) +
                     R[2] * (R[3] * R[7] - R[4] * R[6]);
  if (std::abs(det - 1.0) > 1e-6) throw ValidationError("camera rotation has det " + std::to_string(det));
  for (double v : {cx, cy, t[0], t[1], t[2]})
    if (!std::isfinite(v)) throw ValidationError("camera has non-finite parameters");
}

std::array<double, 3> Camera::to_camera(const Vec3& y) const {
  std::array<double, 3> p{};
  for (int r = 0; r < 3; ++r) {
    p[r] = R[3 * r] * y[0] + R[3 * r + 1] * y[1] + R[3 * r + 2] * y[2] + t[r];
  }
  return p;
}

std::array<double, 9> rotation_from_euler(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  // Rz(roll) * Rx(pitch) * Ry(yaw)
  const std::array<double, 9> ry = {cy, 0, sy, 0, 1, 0, -sy, 0, cy};
  const std::array<double, 9> rx = {1, 0, 0, 0, cp, -sp, 0, sp, cp};
  const std::array<double, 9> rz = {cr, -sr, 0, sr, cr, 0, 0, 0, 1};
  auto mul = [](const std::array<double, 9>& a, const std::array<double, 9>& b) {
    std::array<double, 9> c{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) c[3 * i + j] += a[3 * i + k] * b[3 * k + j];
    return c;
  };
  return mul(rz, mul(rx, ry));
}

std::vector<float> one_hot(std::size_t index, std::size_t vocab_size) {
  if (index >= vocab_size) {
    throw VocabularyError("label " + std::to_string(index) + " outside vocabulary of size " +
                          std::to_string(vocab_size));
  }
  std::vector<float> v(vocab_size, 0.0f);
  v[index] = 1.0f;
  return v;
}

std::vector<float> multi_hot(const std::vector<std::size_t>& indices, std::size_t vocab_size) {
  std::vector<float> v(vocab_size, 0.0f);
  for (auto i : indices) {
    if (i >= vocab_size) {
      throw VocabularyError("label " + std::to_string(i) + " outside vocabulary of size " +
                            std::to_string(vocab_size));
    }
    v[i] += 1.0f;
  }
  return v;
}

Skeleton2D center_at_neck(const Skeleton2D& pose, std::size_t neck) {
  if (neck >= pose.size()) throw DimensionError("center_at_neck: pose has no neck joint");
  Skeleton2D out = pose;
  const Vec2 n = pose.joints[neck];
  for (auto& j : out.joints) {
    j[0] -= n[0];
    j[1] -= n[1];
  }
  return out;
}

Skeleton3D center_at_neck(const Skeleton3D& pose, std::size_t neck) {
  if (neck >= pose.size()) throw DimensionError("center_at_neck: pose has no neck joint");
  Skeleton3D out = pose;
  const Vec3 n = pose.joints[neck];
  for (auto& j : out.joints)
    for (int k = 0; k < 3; ++k) j[k] -= n[k];
  return out;
}

}  // namespace posecast::pose
