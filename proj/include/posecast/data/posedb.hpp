#pragma once

#include <filesystem>
#include <vector>

#include "posecast/pose/types.hpp"

namespace posecast::data {

// Little-endian: "P3DB" | count u64 | J u8 | count * J * 3 f32 (mm).
std::vector<pose::Skeleton3D> read_pose_db(const std::filesystem::path& path);
void write_pose_db(const std::filesystem::path& path, const std::vector<pose::Skeleton3D>& poses);

// Re-centers every pose at the neck; ValidationError on non-finite values or
// a joint count that differs from the layout.
std::vector<pose::Skeleton3D> prepare_pose_db(std::vector<pose::Skeleton3D> poses, const pose::JointLayout& layout);

}  // namespace posecast::data
