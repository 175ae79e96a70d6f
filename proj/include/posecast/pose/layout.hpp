#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace posecast::pose {

// Upper-body layout shared by 2D keypoints and 3D database poses. Indices 0..8
// coincide with the first nine OpenPose BODY_25 keypoints.
enum Joint : std::size_t {
  kHead = 0,
  kNeck = 1,
  kRightShoulder = 2,
  kRightElbow = 3,
  kRightHand = 4,
  kLeftShoulder = 5,
  kLeftElbow = 6,
  kLeftHand = 7,
  kHip = 8,
};

inline constexpr std::size_t kNumJoints = 9;

struct Bone {
  std::size_t parent;
  std::size_t child;
  friend bool operator==(const Bone&, const Bone&) = default;
};

class JointLayout {
 public:
  // The canonical 9-joint layout, rooted at the neck.
  static JointLayout upper_body();

  // Validates that bones form a spanning tree rooted at `root` and that the
  // mirror map is an involution. Throws ValidationError otherwise.
  JointLayout(std::vector<std::string> names, std::vector<Bone> bones,
              std::vector<std::pair<std::size_t, std::size_t>> mirror_pairs, std::size_t root);

  std::size_t size() const { return names_.size(); }
  std::size_t root() const { return root_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Bone>& bones() const { return bones_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& mirror_pairs() const { return mirror_pairs_; }

  // Mirror image of a joint (itself for joints on the midline).
  std::size_t mirror(std::size_t joint) const { return mirror_.at(joint); }
  // Pairs of bone indices (a, b) where bone b is the mirror image of bone a; each pair listed once.
  std::vector<std::pair<std::size_t, std::size_t>> mirrored_bones() const;
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const JointLayout& a, const JointLayout& b) {
    return a.names_ == b.names_ && a.bones_ == b.bones_ && a.mirror_pairs_ == b.mirror_pairs_ && a.root_ == b.root_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Bone> bones_;
  std::vector<std::pair<std::size_t, std::size_t>> mirror_pairs_;
  std::vector<std::size_t> mirror_;
  std::size_t root_;
};

}  // namespace posecast::pose
