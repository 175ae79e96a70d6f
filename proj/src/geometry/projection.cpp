#include "posecast/geometry/projection.hpp"

#include <cmath>

#include "posecast/errors.hpp"
#include "posecast/nn/ops.hpp"

namespace posecast::geometry {
namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Pixel coordinates of one joint plus the 2x3 Jacobian w.r.t. the skeleton-frame joint.
struct JointProjection {
  double u, v;
  std::array<double, 6> jac;  // row-major [du/dy; dv/dy]
};

JointProjection project_joint(const pose::Vec3& y, const pose::Camera& cam, const ProjectionOptions& opt,
                              std::size_t joint) {
  const auto pc = cam.to_camera(y);
  // d(out)/d(p_cam)
  std::array<double, 6> d{};
  JointProjection out{};
  if (opt.mode == ProjectionMode::kAffine) {
    out.u = cam.fx * pc[0] + cam.cx * pc[2];
    out.v = cam.fy * pc[1] + cam.cy * pc[2];
    d = {cam.fx, 0.0, cam.cx, 0.0, cam.fy, cam.cy};
  } else {
    double z = pc[2];
    double dz = 1.0;
    if (opt.soft_clamp) {
      const double s = opt.z_min;
      const double x = (pc[2] - opt.z_min) / s;
      z = opt.z_min + s * softplus(x);
      dz = sigmoid(x);
    } else if (!(z > opt.z_min)) {
      throw ProjectionError(joint, static_cast<float>(z));
    }
    out.u = cam.fx * pc[0] / z + cam.cx;
    out.v = cam.fy * pc[1] / z + cam.cy;
    d = {cam.fx / z, 0.0, -cam.fx * pc[0] / (z * z) * dz, 0.0, cam.fy / z, -cam.fy * pc[1] / (z * z) * dz};
  }
  // chain through p_cam = R y + t
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      out.jac[3 * r + c] = d[3 * r] * cam.R[c] + d[3 * r + 1] * cam.R[3 + c] + d[3 * r + 2] * cam.R[6 + c];
  return out;
}

}  // namespace

ProjectionMode parse_projection_mode(const std::string& name) {
  if (name == "perspective") return ProjectionMode::kPerspective;
  if (name == "affine") return ProjectionMode::kAffine;
  throw ConfigError("unknown projection mode '" + name + "' (expected perspective|affine)");
}

std::string to_string(ProjectionMode mode) { return mode == ProjectionMode::kAffine ? "affine" : "perspective"; }

pose::Skeleton2D project(const pose::Skeleton3D& pose, const pose::Camera& camera, const ProjectionOptions& options) {
  pose::Skeleton2D out(pose.size());
  for (std::size_t j = 0; j < pose.size(); ++j) {
    const auto p = project_joint(pose.joints[j], camera, options, j);
    out.joints[j] = {static_cast<float>(p.u), static_cast<float>(p.v)};
  }
  return out;
}

nn::Var project_batch(const nn::Var& poses, std::span<const pose::Camera> cameras, const ProjectionOptions& options) {
  const nn::Tensor& pv = poses.value();
  const std::size_t n = pv.rows(), width = pv.cols();
  if (width % 3) throw DimensionError("project_batch: pose width " + std::to_string(width) + " not a multiple of 3");
  if (cameras.size() != n) {
    throw DimensionError("project_batch: " + std::to_string(cameras.size()) + " cameras for " + std::to_string(n) +
                         " poses");
  }
  const std::size_t joints = width / 3;
  nn::Tensor out = nn::Tensor::matrix(n, 2 * joints);
  std::vector<double> jac(n * joints * 6);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < joints; ++j) {
      const float* y = pv.data().data() + r * width + 3 * j;
      const auto p = project_joint({y[0], y[1], y[2]}, cameras[r], options, j);
      out.at(r, 2 * j) = static_cast<float>(p.u);
      out.at(r, 2 * j + 1) = static_cast<float>(p.v);
      std::copy(p.jac.begin(), p.jac.end(), jac.begin() + (r * joints + j) * 6);
    }
  }
  nn::Tape* tape = &poses.tape();
  // The vector-Jacobian product is recorded as a constant: second derivatives
  // through the projection are not needed by any loss.
  return tape->record(std::move(out), {poses},
                      [tape, jac = std::move(jac), n, joints, width](const nn::Var& g) -> std::vector<nn::Var> {
                        const nn::Tensor& gv = g.value();
                        nn::Tensor gp = nn::Tensor::matrix(n, width);
                        for (std::size_t r = 0; r < n; ++r) {
                          for (std::size_t j = 0; j < joints; ++j) {
                            const double* J = jac.data() + (r * joints + j) * 6;
                            const double gu = gv.at(r, 2 * j), gvv = gv.at(r, 2 * j + 1);
                            for (int c = 0; c < 3; ++c)
                              gp.at(r, 3 * j + c) = static_cast<float>(gu * J[c] + gvv * J[3 + c]);
                          }
                        }
                        return {tape->constant(std::move(gp))};
                      });
}

pose::Vec3 unproject(const pose::Vec2& pixel, double depth, const pose::Camera& camera) {
  const double pc[3] = {(pixel[0] - camera.cx) / camera.fx * depth, (pixel[1] - camera.cy) / camera.fy * depth, depth};
  pose::Vec3 y{};
  const auto& R = camera.R;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (int r = 0; r < 3; ++r) acc += R[3 * r + c] * (pc[r] - camera.t[r]);
    y[c] = static_cast<float>(acc);
  }
  return y;
}

nn::Var center_batch(const nn::Var& flat, std::size_t dims, std::size_t num_joints, std::size_t neck) {
  const std::size_t width = dims * num_joints;
  if (flat.value().cols() != width) {
    throw DimensionError("center_batch: expected width " + std::to_string(width) + ", got " +
                         nn::shape_string(flat.shape()));
  }
  // y = x C with C = I - (columns of the neck coordinate)
  nn::Tensor c = nn::Tensor::matrix(width, width);
  for (std::size_t j = 0; j < num_joints; ++j) {
    for (std::size_t d = 0; d < dims; ++d) {
      c.at(dims * j + d, dims * j + d) += 1.0f;
      c.at(dims * neck + d, dims * j + d) -= 1.0f;
    }
  }
  return nn::matmul(flat, flat.tape().constant(std::move(c)));
}

}  // namespace posecast::geometry
