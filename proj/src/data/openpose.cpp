#include "posecast/data/openpose.hpp"

#include <fstream>

#include "posecast/errors.hpp"

namespace posecast::data {

pose::Skeleton2D import_openpose_frame(const nlohmann::json& frame) {
  if (!frame.contains("people")) throw FormatError("openpose: missing 'people'");
  const auto& people = frame.at("people");
  if (people.empty()) return {};
  const auto& kp = people.at(0).at("pose_keypoints_2d");
  if (kp.size() % 3 != 0 || kp.size() / 3 < pose::kNumJoints) {
    throw FormatError("openpose: pose_keypoints_2d has " + std::to_string(kp.size()) + " values");
  }
  pose::Skeleton2D s(pose::kNumJoints);
  for (std::size_t j = 0; j < pose::kNumJoints; ++j) {
    s.joints[j] = {kp[3 * j].get<float>(), kp[3 * j + 1].get<float>()};
    s.confidence[j] = kp[3 * j + 2].get<float>();
  }
  return s;
}

pose::Skeleton2D import_openpose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return import_openpose_frame(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace posecast::data
