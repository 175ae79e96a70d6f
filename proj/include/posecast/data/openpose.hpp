#pragma once

#include <filesystem>

#include "json.hpp"
#include "posecast/pose/types.hpp"

namespace posecast::data {

// BODY_25 keypoints 0..8 (nose, neck, right arm, left arm, mid-hip) line up
// with the upper-body layout. Takes the first person in the frame; an empty
// skeleton means nobody was detected.
pose::Skeleton2D import_openpose_frame(const nlohmann::json& frame);
pose::Skeleton2D import_openpose_file(const std::filesystem::path& path);

}  // namespace posecast::data
